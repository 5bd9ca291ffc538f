use crate::linalg::{Cholesky, DenseMatrix, SparseMatrix};
use crate::mesh::{DofMap, InterfaceMesh};
use crate::{Error, Result};

use super::reference::{gauss3_unit, p2_1d};

/// P2 trace space on the interface: nodes sorted by `y`, DoF `2·node + component`.
#[derive(Debug, Clone)]
pub struct InterfaceSpace {
    keys: Vec<[i64; 2]>,
    points: Vec<[f64; 2]>,
    mass: DenseMatrix,
    chol: Cholesky,
    length: f64,
}

impl InterfaceSpace {
    pub fn new(iface: &InterfaceMesh) -> Result<Self> {
        let nv = iface.keys.len();
        if nv < 2 {
            return Err(Error::InvalidMesh("interface needs at least one edge".into()));
        }
        let mut keys = Vec::with_capacity(2 * nv - 1);
        let mut points = Vec::with_capacity(2 * nv - 1);
        for k in 0..nv {
            if k > 0 {
                let (a, b) = (iface.keys[k - 1], iface.keys[k]);
                if (a[0] + b[0]) % 2 != 0 || (a[1] + b[1]) % 2 != 0 {
                    return Err(Error::InvalidMesh("interface vertex keys are not on the vertex lattice".into()));
                }
                keys.push([(a[0] + b[0]) / 2, (a[1] + b[1]) / 2]);
                let (p, q) = (iface.points[k - 1], iface.points[k]);
                points.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            }
            keys.push(iface.keys[k]);
            points.push(iface.points[k]);
        }
        let n = 2 * points.len();
        let mut mass = DenseMatrix::zeros(n, n);
        let mut length = 0.0;
        for e in 0..nv - 1 {
            let (p, q) = (iface.points[e], iface.points[e + 1]);
            let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            length += len;
            let nodes = [2 * e, 2 * e + 1, 2 * e + 2];
            for (s, w) in gauss3_unit() {
                let phi = p2_1d(s);
                for a in 0..3 {
                    for b in 0..3 {
                        let v = w * len * phi[a] * phi[b];
                        for c in 0..2 {
                            let (i, j) = (2 * nodes[a] + c, 2 * nodes[b] + c);
                            mass.col_mut(j)[i] += v;
                        }
                    }
                }
            }
        }
        let chol = Cholesky::factor(&mass)?;
        Ok(Self { keys, points, mass, chol, length })
    }

    pub fn dim(&self) -> usize {
        2 * self.points.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.points.len()
    }

    pub fn keys(&self) -> &[[i64; 2]] {
        &self.keys
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `M_Γ`, the L²(Γ₀) mass matrix of the trace space.
    pub fn mass(&self) -> &DenseMatrix {
        &self.mass
    }

    /// Cholesky factor `M_Γ = L Lᵀ`.
    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        crate::linalg::dot(a, &self.mass.matvec(b))
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// Riesz representative: solves `M_Γ x = b`.
    pub fn riesz(&self, b: &[f64]) -> Vec<f64> {
        self.chol.solve(b)
    }
}

/// Correspondence between trace DoFs and the velocity DoFs of one (sub)domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMap {
    dofs: Vec<usize>,
    num_velocity: usize,
}

impl TraceMap {
    pub fn new(dofmap: &DofMap, space: &InterfaceSpace) -> Result<Self> {
        let mut dofs = Vec::with_capacity(space.dim());
        for (k, key) in space.keys().iter().enumerate() {
            let node = dofmap.node_of_key(*key).ok_or_else(|| {
                Error::InvalidMesh(format!("interface node {k} at {:?} has no velocity DoF", space.points()[k]))
            })?;
            if dofmap.nodes()[node] != space.points()[k] {
                return Err(Error::InvalidMesh(format!("interface node {k} coordinates differ")));
            }
            dofs.extend([2 * node, 2 * node + 1]);
        }
        Ok(Self { dofs, num_velocity: dofmap.num_velocity() })
    }

    pub fn velocity_dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn dim(&self) -> usize {
        self.dofs.len()
    }

    pub fn extract(&self, u: &[f64]) -> Vec<f64> {
        self.dofs.iter().map(|&d| u[d]).collect()
    }

    /// `out += Eᵀ t`.
    pub fn scatter_add(&self, t: &[f64], scale: f64, out: &mut [f64]) {
        for (&d, &v) in self.dofs.iter().zip(t) {
            out[d] += scale * v;
        }
    }

    /// Extraction matrix `E` (trace × velocity).
    pub fn matrix(&self) -> SparseMatrix {
        let trip: Vec<_> = self.dofs.iter().enumerate().map(|(k, &d)| (k, d, 1.0)).collect();
        SparseMatrix::from_triplets(self.dofs.len(), self.num_velocity, &trip)
    }
}

/// `T_Γ = Eᵀ M_Γ` (velocity × trace), so that `T_Γ g` is the load `⟨g, v⟩_Γ₀`,
/// together with the dense `M_Γ`.
pub fn assemble_interface_ops(dofmap: &DofMap, space: &InterfaceSpace) -> Result<(SparseMatrix, DenseMatrix)> {
    let map = TraceMap::new(dofmap, space)?;
    let m = space.mass();
    let mut trip = Vec::new();
    for (k, &d) in map.velocity_dofs().iter().enumerate() {
        for j in 0..space.dim() {
            let v = m[(k, j)];
            if v != 0.0 {
                trip.push((d, j, v));
            }
        }
    }
    Ok((SparseMatrix::from_triplets(dofmap.num_velocity(), space.dim(), &trip), m.clone()))
}
