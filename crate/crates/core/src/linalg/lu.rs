//! Sparse direct solves. Numeric factorisation is delegated to faer's
//! supernodal LU with partial pivoting; the symbolic analysis is computed once
//! per sparsity pattern and shared between refactorisations.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;

use super::{norm_inf, SparseMatrix};
use crate::error::{Error, Result};

/// Symbolic LU analysis bound to one CSR sparsity pattern.
pub struct LuAnalysis {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

impl std::fmt::Debug for LuAnalysis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuAnalysis").field("n", &self.n).field("nnz", &self.col_idx.len()).finish()
    }
}

impl LuAnalysis {
    pub fn new(a: &SparseMatrix) -> Result<Arc<Self>> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!("LU needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        // CSR arrays of A are the CSC arrays of Aᵀ; faer factors Aᵀ.
        let structure = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
        let symbolic = SymbolicLu::try_new(structure)
            .map_err(|e| Error::Singular(format!("symbolic analysis failed: {e:?}")))?;
        Ok(Arc::new(Self {
            n,
            row_ptr: a.row_ptr().to_vec(),
            col_idx: a.col_idx().to_vec(),
            symbolic,
        }))
    }

    pub fn matches(&self, a: &SparseMatrix) -> bool {
        a.nrows() == self.n && a.row_ptr() == self.row_ptr.as_slice() && a.col_idx() == self.col_idx.as_slice()
    }

    pub fn factor(self: &Arc<Self>, a: &SparseMatrix) -> Result<SparseLu> {
        if !self.matches(a) {
            return Err(Error::Dimension("matrix pattern differs from the analysed pattern".into()));
        }
        if !a.is_finite() {
            return Err(Error::Singular("matrix has non-finite entries".into()));
        }
        let structure = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.row_ptr, None, &self.col_idx);
        let mat = SparseColMatRef::new(structure, a.values());
        let numeric = Lu::try_new_with_symbolic(self.symbolic.clone(), mat).map_err(|e| match e {
            LuError::SymbolicSingular { index } => {
                Error::Singular(format!("structurally singular at elimination step {index}"))
            }
            LuError::Generic(e) => Error::Singular(format!("factorisation failed: {e:?}")),
        })?;
        Ok(SparseLu { analysis: self.clone(), numeric })
    }
}

/// Numeric LU factorisation of a sparse square matrix.
pub struct SparseLu {
    analysis: Arc<LuAnalysis>,
    numeric: Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.analysis.n).finish()
    }
}

impl SparseLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        LuAnalysis::new(a)?.factor(a)
    }

    pub fn dim(&self) -> usize {
        self.analysis.n
    }

    pub fn analysis(&self) -> &Arc<LuAnalysis> {
        &self.analysis
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_impl(b, false)
    }

    /// Solves Aᵀ x = b.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_impl(b, true)
    }

    fn solve_impl(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Dimension(format!("rhs length {} vs matrix order {n}", b.len())));
        }
        let mut x = b.to_vec();
        let rhs = MatMut::from_column_major_slice_mut(&mut x, n, 1);
        // The stored factorisation is of Aᵀ.
        if transpose {
            self.numeric.solve_in_place(rhs);
        } else {
            self.numeric.solve_transpose_in_place(rhs);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("zero pivot encountered during solve".into()));
        }
        Ok(x)
    }
}

/// One-shot sparse solve with the backward-error check
/// ‖Ax − b‖∞ ≤ 1e-10 (‖A‖∞‖x‖∞ + ‖b‖∞); one step of iterative refinement is
/// attempted before a failure is reported as singularity.
pub fn lu_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let lu = SparseLu::factor(a)?;
    let mut x = lu.solve(b)?;
    let a_norm = a.norm_inf();
    let threshold = super::dense::PIVOT_THRESHOLD * a.max_abs();
    for attempt in 0..2 {
        let r: Vec<f64> = a.matvec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
        let bound = 1e-10 * (a_norm * norm_inf(&x) + norm_inf(b));
        if norm_inf(&r) <= bound {
            return Ok(x);
        }
        if attempt == 0 {
            let dx = lu.solve(&r)?;
            super::axpy(1.0, &dx, &mut x);
        }
    }
    Err(Error::Singular(format!(
        "residual check failed; matrix numerically singular (pivot threshold {threshold:.3e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let b = vec![1.0, -2.0, 3.5, 0.0];
        assert_eq!(lu_solve(&SparseMatrix::identity(4), &b).unwrap(), b);
    }

    #[test]
    fn two_by_two_hand_check() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]);
        let x = lu_solve(&a, &[3.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    fn random_sparse(n: usize, seed: u64) -> SparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for i in 0..n {
            for _ in 0..4 {
                let j = rng.gen_range(0..n);
                let v = rng.gen_range(-1.0..1.0);
                trip.push((i, j, v));
                trip.push((j, i, v));
            }
            trip.push((i, i, 10.0));
        }
        SparseMatrix::from_triplets(n, n, &trip)
    }

    #[test]
    fn random_spd_shifted_residual_bound() {
        let a = random_sparse(50, 5);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x = lu_solve(&a, &b).unwrap();
        let r = crate::linalg::sub(&a.matvec(&x), &b);
        assert!(norm_inf(&r) <= 1e-10 * (a.norm_inf() * norm_inf(&x) + norm_inf(&b)));
    }

    #[test]
    fn transpose_solve_matches() {
        let mut a = random_sparse(40, 9);
        // break symmetry
        for (k, v) in a.values_mut().iter_mut().enumerate() {
            *v += 0.01 * (k % 7) as f64;
        }
        let lu = SparseLu::factor(&a).unwrap();
        let b: Vec<f64> = (0..40).map(|i| 1.0 + i as f64).collect();
        let y = lu.solve_transpose(&b).unwrap();
        let r = crate::linalg::sub(&a.matvec_transpose(&y), &b);
        assert!(norm_inf(&r) < 1e-10);
    }

    #[test]
    fn saddle_point_with_zero_diagonal() {
        // [[I, Bᵀ],[B, 0]] with B = [1 1]
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (1, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 1, 1.0)],
        );
        let x = lu_solve(&a, &[1.0, 2.0, 0.0]).unwrap();
        assert!((x[0] + x[1]).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 4.0)]);
        assert!(matches!(lu_solve(&a, &[1.0, 1.0]), Err(Error::Singular(_))));
        let empty_row = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]);
        assert!(matches!(lu_solve(&empty_row, &[1.0, 1.0]), Err(Error::Singular(_))));
    }
}
