use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::mesh::DofMap;

use super::assembly::{element_geometry, element_velocity_dofs};
use super::reference::triangle_rule_deg5;

const NQ: usize = 7;

/// Precomputed quadrature data for the trilinear form
/// `c(u, w, v) = ((u·∇) w, v)` on every element (degree-5 rule).
#[derive(Debug, Clone)]
pub struct ConvectionAssembler {
    num_velocity: usize,
    dofs: Vec<[usize; 12]>,
    weight: Vec<f64>,
    phi: Vec<[f64; 6]>,
    grad: Vec<[[f64; 2]; 6]>,
}

/// Value and gradient of a P2 velocity field at one quadrature point.
#[inline]
fn eval(dofs: &[usize; 12], phi: &[f64; 6], grad: &[[f64; 2]; 6], w: &[f64]) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut v = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for a in 0..6 {
        for c in 0..2 {
            let coef = w[dofs[2 * a + c]];
            v[c] += coef * phi[a];
            g[c][0] += coef * grad[a][0];
            g[c][1] += coef * grad[a][1];
        }
    }
    (v, g)
}

impl ConvectionAssembler {
    pub fn new(dofmap: &DofMap) -> Self {
        let rule = triangle_rule_deg5();
        let ne = dofmap.elem_nodes().len();
        let mut s = Self {
            num_velocity: dofmap.num_velocity(),
            dofs: Vec::with_capacity(ne),
            weight: Vec::with_capacity(ne * NQ),
            phi: Vec::with_capacity(ne * NQ),
            grad: Vec::with_capacity(ne * NQ),
        };
        for t in 0..ne {
            let geo = element_geometry(dofmap, t);
            s.dofs.push(element_velocity_dofs(&dofmap.elem_nodes()[t]));
            for q in &rule {
                let (phi, grad) = geo.p2(q.bary);
                s.weight.push(q.weight * geo.area);
                s.phi.push(phi);
                s.grad.push(grad);
            }
        }
        s
    }

    pub fn num_velocity(&self) -> usize {
        self.num_velocity
    }

    pub fn num_elements(&self) -> usize {
        self.dofs.len()
    }

    pub fn element_dofs(&self) -> &[[usize; 12]] {
        &self.dofs
    }

    /// `out += C(w) w`, i.e. the vector `c(w, w, φ_i)`.
    pub fn add_residual(&self, w: &[f64], out: &mut [f64]) {
        for (e, dofs) in self.dofs.iter().enumerate() {
            for q in e * NQ..(e + 1) * NQ {
                let (v, g) = eval(dofs, &self.phi[q], &self.grad[q], w);
                let conv = [v[0] * g[0][0] + v[1] * g[0][1], v[0] * g[1][0] + v[1] * g[1][1]];
                let wt = self.weight[q];
                for a in 0..6 {
                    let p = wt * self.phi[q][a];
                    out[dofs[2 * a]] += p * conv[0];
                    out[dofs[2 * a + 1]] += p * conv[1];
                }
            }
        }
    }

    /// Element matrix of `δu ↦ c(δu, w, ·) + c(w, δu, ·)`; row = test, column = trial,
    /// both in local order `2·a + component`.
    pub fn element_jacobian(&self, e: usize, w: &[f64]) -> [[f64; 12]; 12] {
        let dofs = &self.dofs[e];
        let mut m = [[0.0; 12]; 12];
        for q in e * NQ..(e + 1) * NQ {
            let (v, g) = eval(dofs, &self.phi[q], &self.grad[q], w);
            let wt = self.weight[q];
            let phi = &self.phi[q];
            let grad = &self.grad[q];
            let mut adv = [0.0; 6];
            for b in 0..6 {
                adv[b] = v[0] * grad[b][0] + v[1] * grad[b][1];
            }
            for a in 0..6 {
                let pa = wt * phi[a];
                for b in 0..6 {
                    let s = pa * adv[b];
                    let pb = pa * phi[b];
                    m[2 * a][2 * b] += s + pb * g[0][0];
                    m[2 * a][2 * b + 1] += pb * g[0][1];
                    m[2 * a + 1][2 * b] += pb * g[1][0];
                    m[2 * a + 1][2 * b + 1] += s + pb * g[1][1];
                }
            }
        }
        m
    }

    /// Element matrix of `u ↦ c(w, u, ·)`.
    pub fn element_advection(&self, e: usize, w: &[f64]) -> [[f64; 12]; 12] {
        let dofs = &self.dofs[e];
        let mut m = [[0.0; 12]; 12];
        for q in e * NQ..(e + 1) * NQ {
            let (v, _) = eval(dofs, &self.phi[q], &self.grad[q], w);
            let wt = self.weight[q];
            for a in 0..6 {
                for b in 0..6 {
                    let s = wt * self.phi[q][a] * (v[0] * self.grad[q][b][0] + v[1] * self.grad[q][b][1]);
                    m[2 * a][2 * b] += s;
                    m[2 * a + 1][2 * b + 1] += s;
                }
            }
        }
        m
    }

    /// Adds the Jacobian into a CSR value array through per-element slot tables
    /// (`slots[e][12·row + col]`).
    pub fn add_jacobian_into(&self, w: &[f64], values: &mut [f64], slots: &[[usize; 144]]) {
        for (e, s) in slots.iter().enumerate() {
            let m = self.element_jacobian(e, w);
            for r in 0..12 {
                for c in 0..12 {
                    values[s[12 * r + c]] += m[r][c];
                }
            }
        }
    }

    fn to_sparse(&self, local: impl Fn(usize) -> [[f64; 12]; 12]) -> SparseMatrix {
        let mut trip = Vec::with_capacity(self.dofs.len() * 144);
        for (e, dofs) in self.dofs.iter().enumerate() {
            let m = local(e);
            for r in 0..12 {
                for c in 0..12 {
                    trip.push((dofs[r], dofs[c], m[r][c]));
                }
            }
        }
        SparseMatrix::from_triplets(self.num_velocity, self.num_velocity, &trip)
    }

    /// `C(w)` with `C(w) u = c(w, u, ·)`.
    pub fn matrix(&self, w: &[f64]) -> SparseMatrix {
        self.to_sparse(|e| self.element_advection(e, w))
    }

    /// `J_c(w)`, the derivative of `u ↦ C(u) u` at `w`.
    pub fn jacobian(&self, w: &[f64]) -> SparseMatrix {
        self.to_sparse(|e| self.element_jacobian(e, w))
    }

    /// `c(u, w, v)`.
    pub fn trilinear(&self, u: &[f64], w: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for (e, dofs) in self.dofs.iter().enumerate() {
            for q in e * NQ..(e + 1) * NQ {
                let (uu, _) = eval(dofs, &self.phi[q], &self.grad[q], u);
                let (_, gw) = eval(dofs, &self.phi[q], &self.grad[q], w);
                let (vv, _) = eval(dofs, &self.phi[q], &self.grad[q], v);
                let conv = [uu[0] * gw[0][0] + uu[1] * gw[0][1], uu[0] * gw[1][0] + uu[1] * gw[1][1]];
                s += self.weight[q] * (conv[0] * vv[0] + conv[1] * vv[1]);
            }
        }
        s
    }

    /// Reduced tensor `T[k][i][j] = c(W_i, W_j, Z_k)`, stored flat with `j` fastest.
    pub fn reduced_tensor(&self, trial: &DenseMatrix, test: &DenseMatrix) -> Vec<f64> {
        let (nw, nz) = (trial.ncols(), test.ncols());
        let mut out = vec![0.0; nz * nw * nw];
        let mut wv = vec![[0.0; 2]; nw];
        let mut wg = vec![[[0.0; 2]; 2]; nw];
        let mut zv = vec![[0.0; 2]; nz];
        let mut s = vec![[0.0; 2]; nw * nw];
        for (e, dofs) in self.dofs.iter().enumerate() {
            for q in e * NQ..(e + 1) * NQ {
                for i in 0..nw {
                    (wv[i], wg[i]) = eval(dofs, &self.phi[q], &self.grad[q], trial.col(i));
                }
                for k in 0..nz {
                    zv[k] = eval(dofs, &self.phi[q], &self.grad[q], test.col(k)).0;
                }
                let wt = self.weight[q];
                for i in 0..nw {
                    for j in 0..nw {
                        let g = &wg[j];
                        s[i * nw + j] = [
                            wt * (wv[i][0] * g[0][0] + wv[i][1] * g[0][1]),
                            wt * (wv[i][0] * g[1][0] + wv[i][1] * g[1][1]),
                        ];
                    }
                }
                for k in 0..nz {
                    let z = zv[k];
                    if z == [0.0, 0.0] {
                        continue;
                    }
                    let block = &mut out[k * nw * nw..(k + 1) * nw * nw];
                    for (o, sij) in block.iter_mut().zip(&s) {
                        *o += sij[0] * z[0] + sij[1] * z[1];
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::interpolate_velocity;
    use crate::linalg::{dot, norm2};
    use crate::mesh::generate_rect_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (DofMap, ConvectionAssembler) {
        let mesh = generate_rect_mesh(2.0, 1.0, 0.5).unwrap();
        let d = DofMap::new(&mesh);
        let c = ConvectionAssembler::new(&d);
        (d, c)
    }

    #[test]
    fn zero_field_gives_zero_matrices() {
        let (d, c) = setup();
        let z = vec![0.0; d.num_velocity()];
        assert_eq!(c.matrix(&z).max_abs(), 0.0);
        assert_eq!(c.jacobian(&z).max_abs(), 0.0);
    }

    #[test]
    fn trilinear_matches_closed_form() {
        // u = (1, x), w = (y, x), v = (1, y) on [0,2]×[0,1]:
        // (u·∇)w = (x, 1) → ∫ x + y = 2 + 1 = 3
        let (d, c) = setup();
        let u = interpolate_velocity(&d, |p| [1.0, p[0]]);
        let w = interpolate_velocity(&d, |p| [p[1], p[0]]);
        let v = interpolate_velocity(&d, |p| [1.0, p[1]]);
        assert!((c.trilinear(&u, &w, &v) - 3.0).abs() < 1e-12);
        assert!((c.matrix(&u).bilinear(&v, &w) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobian_is_directional_derivative() {
        let (d, c) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = d.num_velocity();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jd = c.jacobian(&w).matvec(&dir);
        let f = |x: &[f64]| {
            let mut out = vec![0.0; n];
            c.add_residual(x, &mut out);
            out
        };
        let f0 = f(&w);
        let mut errs = vec![];
        for eps in [1e-2, 1e-3] {
            let wp: Vec<f64> = w.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
            let diff: Vec<f64> = f(&wp).iter().zip(&f0).zip(&jd).map(|((a, b), j)| (a - b) / eps - j).collect();
            errs.push(norm2(&diff));
        }
        // residual is quadratic: the error is exactly linear in ε
        assert!((errs[0] / errs[1] - 10.0).abs() < 1e-6, "{errs:?}");
        // C(w)w == J(w)w / 2
        let jw = c.jacobian(&w).matvec(&w);
        let cw = c.matrix(&w).matvec(&w);
        assert!(jw.iter().zip(&cw).all(|(a, b)| (a - 2.0 * b).abs() < 1e-12));
        assert!((dot(&f0, &f0) - dot(&cw, &cw)).abs() < 1e-9);
    }

    #[test]
    fn tensor_matches_trilinear() {
        let (d, c) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = d.num_velocity();
        let cols = |k: usize, rng: &mut ChaCha8Rng| {
            DenseMatrix::from_columns(n, &(0..k).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect::<Vec<Vec<f64>>>())
        };
        let w = cols(3, &mut rng);
        let z = cols(2, &mut rng);
        let t = c.reduced_tensor(&w, &z);
        for k in 0..2 {
            for i in 0..3 {
                for j in 0..3 {
                    let exact = c.trilinear(w.col(i), w.col(j), z.col(k));
                    assert!((t[k * 9 + i * 3 + j] - exact).abs() < 1e-11);
                }
            }
        }
    }
}
