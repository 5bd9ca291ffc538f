//! Compressed sparse and dense linear algebra used by assembly, the nonlinear
//! solvers and the reduced-order pipeline.

mod dense;
mod lu;
mod sparse;
mod svd;

pub use dense::{dense_solve, Cholesky, DenseLu, DenseMatrix, PIVOT_THRESHOLD};
pub use lu::{lu_solve, LuAnalysis, SparseLu};
pub use sparse::{axpy, dot, norm2, norm_inf, sub, SparseMatrix};
pub use svd::{svd, Svd};
