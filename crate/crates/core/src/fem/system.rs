use crate::linalg::SparseMatrix;
use crate::mesh::DofMap;
use crate::{Error, Result};

use super::assembly::{element_velocity_dofs, AssembledOperators};

/// Sparsity pattern of the coupled velocity–pressure system `[u; p]` with
/// per-element scatter tables and the constraint masks of symmetric elimination.
#[derive(Debug, Clone)]
pub struct SaddlePattern {
    nu: usize,
    np: usize,
    pattern: SparseMatrix,
    vv_slots: Vec<[usize; 144]>,
    constrained: Vec<bool>,
    masked_slots: Vec<usize>,
    diag_slots: Vec<usize>,
}

impl SaddlePattern {
    /// `constrained` lists indices into `[u; p]` (velocity Dirichlet DoFs and
    /// any pinned pressure DoF).
    pub fn new(dofmap: &DofMap, constrained: &[usize]) -> Result<Self> {
        let nu = dofmap.num_velocity();
        let np = dofmap.num_pressure();
        let n = nu + np;
        let mut trip = Vec::with_capacity(dofmap.elem_nodes().len() * 216 + n);
        for (nodes, pdofs) in dofmap.elem_nodes().iter().zip(dofmap.elem_pressure()) {
            let vd = element_velocity_dofs(nodes);
            for &r in &vd {
                for &c in &vd {
                    trip.push((r, c, 0.0));
                }
                for &q in pdofs {
                    trip.push((r, nu + q, 0.0));
                    trip.push((nu + q, r, 0.0));
                }
            }
        }
        trip.extend((0..n).map(|i| (i, i, 0.0)));
        let pattern = SparseMatrix::from_triplets(n, n, &trip);

        let vv_slots = dofmap
            .elem_nodes()
            .iter()
            .map(|nodes| {
                let vd = element_velocity_dofs(nodes);
                let mut s = [0usize; 144];
                for r in 0..12 {
                    for c in 0..12 {
                        s[12 * r + c] = pattern.slot(vd[r], vd[c]).expect("element entry in pattern");
                    }
                }
                s
            })
            .collect();

        let mut mask = vec![false; n];
        for &d in constrained {
            if d >= n {
                return Err(Error::Dimension(format!("constrained index {d} outside system of order {n}")));
            }
            mask[d] = true;
        }
        let mut masked_slots = Vec::new();
        let mut diag_slots = Vec::new();
        for r in 0..n {
            for k in pattern.row_ptr()[r]..pattern.row_ptr()[r + 1] {
                let c = pattern.col_idx()[k];
                if r == c {
                    if mask[r] {
                        diag_slots.push(k);
                    }
                } else if mask[r] || mask[c] {
                    masked_slots.push(k);
                }
            }
        }
        Ok(Self { nu, np, pattern, vv_slots, constrained: mask, masked_slots, diag_slots })
    }

    pub fn dim(&self) -> usize {
        self.nu + self.np
    }

    pub fn num_velocity(&self) -> usize {
        self.nu
    }

    pub fn num_pressure(&self) -> usize {
        self.np
    }

    pub fn pattern(&self) -> &SparseMatrix {
        &self.pattern
    }

    pub fn vv_slots(&self) -> &[[usize; 144]] {
        &self.vv_slots
    }

    pub fn is_constrained(&self, i: usize) -> bool {
        self.constrained[i]
    }

    pub fn constrained_mask(&self) -> &[bool] {
        &self.constrained
    }

    /// Values of `[[α M + β K, Bᵀ], [B, 0]]` on the pattern (unconstrained).
    pub fn linear_values(&self, ops: &AssembledOperators, alpha: f64, beta: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.pattern.nnz()];
        let mut add = |r: usize, c: usize, x: f64| {
            let k = self.pattern.slot(r, c).expect("operator entry in pattern");
            v[k] += x;
        };
        for r in 0..self.nu {
            for (c, x) in ops.mass.row(r) {
                add(r, c, alpha * x);
            }
            for (c, x) in ops.laplace.row(r) {
                add(r, c, beta * x);
            }
        }
        for q in 0..self.np {
            for (c, x) in ops.divergence.row(q) {
                add(self.nu + q, c, x);
                add(c, self.nu + q, x);
            }
        }
        v
    }

    /// Replaces constrained rows and columns by identity rows and columns.
    pub fn apply_constraints(&self, values: &mut [f64]) {
        for &k in &self.masked_slots {
            values[k] = 0.0;
        }
        for &k in &self.diag_slots {
            values[k] = 1.0;
        }
    }

    pub fn matrix(&self, values: Vec<f64>) -> SparseMatrix {
        self.pattern.with_values(values)
    }

    /// Zeroes the constrained entries of a full `[u; p]` vector.
    pub fn zero_constrained(&self, x: &mut [f64]) {
        for (xi, &m) in x.iter_mut().zip(&self.constrained) {
            if m {
                *xi = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_constant_ops;
    use crate::mesh::generate_rect_mesh;

    #[test]
    fn linear_values_reproduce_operators() {
        let mesh = generate_rect_mesh(2.0, 1.0, 0.5).unwrap();
        let d = DofMap::new(&mesh);
        let ops = assemble_constant_ops(&d, 0.3).unwrap();
        let pat = SaddlePattern::new(&d, &d.dirichlet_dofs()).unwrap();
        let a = pat.matrix(pat.linear_values(&ops, 2.0, 0.3));
        let nu = d.num_velocity();
        for r in 0..nu {
            for (c, x) in ops.mass.row(r) {
                let expected = 2.0 * x + ops.stiffness.get(r, c);
                assert!((a.get(r, c) - expected).abs() < 1e-14);
            }
        }
        for q in 0..d.num_pressure() {
            for (c, x) in ops.divergence.row(q) {
                assert_eq!(a.get(nu + q, c), x);
                assert_eq!(a.get(c, nu + q), x);
            }
        }
        let mut v = a.values().to_vec();
        pat.apply_constraints(&mut v);
        let a = pat.matrix(v);
        for &k in &d.dirichlet_dofs() {
            assert_eq!(a.row(k).filter(|&(_, x)| x != 0.0).collect::<Vec<_>>(), vec![(k, 1.0)]);
        }
        assert!(a.transpose().row(d.dirichlet_dofs()[0]).all(|(c, x)| x == 0.0 || c == d.dirichlet_dofs()[0]));
    }
}
