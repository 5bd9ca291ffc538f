use crate::fem::{apply_dirichlet, DirichletData};
use crate::linalg::{svd, DenseMatrix, SparseLu};
use crate::solvers::FlowDomain;
use crate::Result;

use super::pod::cgs2;
use super::pod::Gram;

/// Appends the supremizers of the pressure modes to an X_u-orthonormal
/// velocity basis. Each supremizer solves `X_u s = Bᵀ q` with homogeneous
/// Dirichlet conditions and is orthonormalised against the current basis;
/// vanishing or dependent supremizers are skipped. Returns the enriched basis
/// and the number of appended columns.
pub fn supremizer_enrich(domain: &FlowDomain, pressure_modes: &DenseMatrix, velocity: &DenseMatrix) -> Result<(DenseMatrix, usize)> {
    let x = domain.ops().h1_inner();
    let zero = DirichletData::homogeneous(domain.dofmap());
    let mut dummy = vec![0.0; x.nrows()];
    let xe = apply_dirichlet(&x, &mut dummy, &zero)?;
    let lu = SparseLu::factor(&xe)?;
    let mut basis = velocity.clone();
    let mut added = 0;
    for q in pressure_modes.columns() {
        let mut rhs = domain.ops().divergence.matvec_transpose(q);
        zero.zero(&mut rhs);
        if rhs.iter().all(|&v| v == 0.0) {
            continue;
        }
        let s = lu.solve(&rhs)?;
        let n0 = x.inner(&s, &s).max(0.0).sqrt();
        let (_, r) = cgs2(&basis, &x, &s);
        let rn = x.inner(&r, &r).max(0.0).sqrt();
        if n0 == 0.0 || rn <= 1e-10 * n0 {
            continue;
        }
        basis.push_column(&r.iter().map(|v| v / rn).collect::<Vec<_>>());
        added += 1;
    }
    Ok((basis, added))
}

/// Smallest singular value of the reduced divergence `Z_pᵀ B Z_u`; with
/// orthonormal bases this is the reduced inf-sup constant.
pub fn reduced_inf_sup(domain: &FlowDomain, velocity: &DenseMatrix, pressure_modes: &DenseMatrix) -> Result<f64> {
    let bz: Vec<Vec<f64>> = velocity.columns().map(|c| domain.ops().divergence.matvec(c)).collect();
    let rb = DenseMatrix::from_fn(pressure_modes.ncols(), velocity.ncols(), |i, j| {
        crate::linalg::dot(pressure_modes.col(i), &bz[j])
    });
    if rb.nrows() > rb.ncols() {
        return Ok(0.0);
    }
    let s = svd(&rb)?;
    Ok(s.singular_values.iter().take(rb.nrows()).copied().fold(f64::INFINITY, f64::min))
}
