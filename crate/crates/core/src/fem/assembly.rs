use crate::linalg::SparseMatrix;
use crate::mesh::DofMap;
use crate::{Error, Result};

use super::reference::{triangle_rule_deg4, ElementGeometry};

/// Velocity DoFs of an element in local order `2·a + component`.
pub fn element_velocity_dofs(nodes: &[usize; 6]) -> [usize; 12] {
    let mut d = [0; 12];
    for a in 0..6 {
        d[2 * a] = 2 * nodes[a];
        d[2 * a + 1] = 2 * nodes[a] + 1;
    }
    d
}

pub fn element_geometry(dofmap: &DofMap, t: usize) -> ElementGeometry {
    let n = &dofmap.elem_nodes()[t];
    let p = dofmap.nodes();
    ElementGeometry::new([p[n[0]], p[n[1]], p[n[2]]])
}

/// Parameter-independent and viscosity-scaled operators of one (sub)domain.
#[derive(Debug, Clone)]
pub struct AssembledOperators {
    /// Velocity mass matrix, `m(u, v)`.
    pub mass: SparseMatrix,
    /// Vector Laplacian `(∇u, ∇v)` without the viscosity.
    pub laplace: SparseMatrix,
    /// `a(u, v) = ν (∇u, ∇v)`.
    pub stiffness: SparseMatrix,
    /// `B` with `(B u)_q = b(u, q) = −(div u, q)`; rows are pressure DoFs.
    pub divergence: SparseMatrix,
    /// P1 pressure mass matrix.
    pub pressure_mass: SparseMatrix,
    pub nu: f64,
}

impl AssembledOperators {
    /// Full H¹ inner product `M + K` on the velocity space.
    pub fn h1_inner(&self) -> SparseMatrix {
        SparseMatrix::linear_combination(1.0, &self.mass, 1.0, &self.laplace)
    }

    pub fn with_viscosity(&self, nu: f64) -> Result<Self> {
        check_viscosity(nu)?;
        Ok(Self { stiffness: self.laplace.scaled(nu), nu, ..self.clone() })
    }
}

fn check_viscosity(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("viscosity must be positive, got {nu}")))
    }
}

pub fn assemble_constant_ops(dofmap: &DofMap, nu: f64) -> Result<AssembledOperators> {
    check_viscosity(nu)?;
    let nu_dofs = dofmap.num_velocity();
    let np = dofmap.num_pressure();
    let rule = triangle_rule_deg4();
    let ne = dofmap.elem_nodes().len();
    let mut mt = Vec::with_capacity(ne * 72);
    let mut kt = Vec::with_capacity(ne * 72);
    let mut bt = Vec::with_capacity(ne * 36);
    let mut pt = Vec::with_capacity(ne * 9);

    for t in 0..ne {
        let geo = element_geometry(dofmap, t);
        let nodes = &dofmap.elem_nodes()[t];
        let pdofs = &dofmap.elem_pressure()[t];
        let mut me = [[0.0; 6]; 6];
        let mut ke = [[0.0; 6]; 6];
        let mut be = [[[0.0; 2]; 6]; 3];
        let mut pe = [[0.0; 3]; 3];
        for q in &rule {
            let w = q.weight * geo.area;
            let (phi, grad) = geo.p2(q.bary);
            for a in 0..6 {
                for b in 0..6 {
                    me[a][b] += w * phi[a] * phi[b];
                    ke[a][b] += w * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
                }
            }
            for k in 0..3 {
                let psi = q.bary[k];
                for b in 0..6 {
                    be[k][b][0] -= w * psi * grad[b][0];
                    be[k][b][1] -= w * psi * grad[b][1];
                }
                for l in 0..3 {
                    pe[k][l] += w * psi * q.bary[l];
                }
            }
        }
        for a in 0..6 {
            for b in 0..6 {
                for c in 0..2 {
                    mt.push((2 * nodes[a] + c, 2 * nodes[b] + c, me[a][b]));
                    kt.push((2 * nodes[a] + c, 2 * nodes[b] + c, ke[a][b]));
                }
            }
        }
        for k in 0..3 {
            for b in 0..6 {
                for c in 0..2 {
                    bt.push((pdofs[k], 2 * nodes[b] + c, be[k][b][c]));
                }
            }
            for l in 0..3 {
                pt.push((pdofs[k], pdofs[l], pe[k][l]));
            }
        }
    }
    let laplace = SparseMatrix::from_triplets(nu_dofs, nu_dofs, &kt);
    Ok(AssembledOperators {
        mass: SparseMatrix::from_triplets(nu_dofs, nu_dofs, &mt),
        stiffness: laplace.scaled(nu),
        laplace,
        divergence: SparseMatrix::from_triplets(np, nu_dofs, &bt),
        pressure_mass: SparseMatrix::from_triplets(np, np, &pt),
        nu,
    })
}

/// Load vector `(f, v)` for a body force `f`.
pub fn assemble_load(dofmap: &DofMap, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let mut out = vec![0.0; dofmap.num_velocity()];
    let rule = triangle_rule_deg4();
    for t in 0..dofmap.elem_nodes().len() {
        let geo = element_geometry(dofmap, t);
        let dofs = element_velocity_dofs(&dofmap.elem_nodes()[t]);
        for q in &rule {
            let w = q.weight * geo.area;
            let fx = f(geo.point(q.bary));
            let (phi, _) = geo.p2(q.bary);
            for a in 0..6 {
                out[dofs[2 * a]] += w * fx[0] * phi[a];
                out[dofs[2 * a + 1]] += w * fx[1] * phi[a];
            }
        }
    }
    out
}

/// Nodal interpolant of a vector field on the P2 nodes.
pub fn interpolate_velocity(dofmap: &DofMap, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    dofmap.nodes().iter().flat_map(|&p| f(p)).collect()
}

/// Nodal interpolant of a scalar on the pressure DoFs.
pub fn interpolate_pressure(dofmap: &DofMap, h: f64, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    dofmap.pressure_keys().iter().map(|k| f([k[0] as f64 * 0.5 * h, k[1] as f64 * 0.5 * h])).collect()
}
