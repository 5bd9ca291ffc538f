use super::{dot, norm2, DenseMatrix};
use crate::error::{Error, Result};

/// Thin singular value decomposition S = U diag(σ) Vᵀ with σ non-increasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

const ROTATION_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(s: &DenseMatrix) -> Result<Svd> {
    if !s.is_finite() {
        return Err(Error::Dimension("svd input has non-finite entries".into()));
    }
    if s.nrows() < s.ncols() {
        let t = svd(&s.transpose())?;
        return Ok(Svd { u: t.v, singular_values: t.singular_values, v: t.u });
    }
    let (m, n) = (s.nrows(), s.ncols());
    let mut a = s.clone();
    let mut v = DenseMatrix::identity(n);

    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NonConvergence {
                what: "Jacobi SVD".into(),
                iterations: sweeps,
                history: Vec::new(),
            });
        }
        sweeps += 1;
        converged = true;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let alpha = dot(a.col(i), a.col(i));
                let beta = dot(a.col(j), a.col(j));
                let gamma = dot(a.col(i), a.col(j));
                if gamma == 0.0 || gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                rotate(&mut a, i, j, c, sn);
                rotate(&mut v, i, j, c, sn);
            }
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| norm2(a.col(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let mut u = DenseMatrix::zeros(m, n);
    let mut vs = DenseMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let sj = norms[j];
        sigma.push(sj);
        vs.col_mut(k).copy_from_slice(v.col(j));
        if sj > 0.0 && sj > scale * 1e-300 {
            let inv = 1.0 / sj;
            for (dst, src) in u.col_mut(k).iter_mut().zip(a.col(j)) {
                *dst = src * inv;
            }
        } else {
            missing.push(k);
        }
    }
    complete_orthonormal(&mut u, &missing);
    Ok(Svd { u, singular_values: sigma, v: vs })
}

fn rotate(m: &mut DenseMatrix, i: usize, j: usize, c: f64, s: f64) {
    let rows = m.nrows();
    for r in 0..rows {
        let x = m[(r, i)];
        let y = m[(r, j)];
        m[(r, i)] = c * x - s * y;
        m[(r, j)] = s * x + c * y;
    }
}

/// Fills the listed columns with unit vectors orthogonal to every other column.
fn complete_orthonormal(u: &mut DenseMatrix, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let m = u.nrows();
    let mut candidate = 0;
    for &k in missing {
        loop {
            assert!(candidate < m, "cannot complete orthonormal basis");
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for j in 0..u.ncols() {
                    if j == k || (missing.contains(&j) && norm2(u.col(j)) == 0.0) {
                        continue;
                    }
                    let p = dot(u.col(j), &e);
                    super::axpy(-p, u.col(j), &mut e);
                }
            }
            let nrm = norm2(&e);
            if nrm > 1e-8 {
                for (dst, x) in u.col_mut(k).iter_mut().zip(&e) {
                    *dst = x / nrm;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orthonormality_error(q: &DenseMatrix) -> f64 {
        q.transpose_matmul(q).sub(&DenseMatrix::identity(q.ncols())).max_abs()
    }

    fn reconstruct(d: &Svd) -> DenseMatrix {
        let mut us = d.u.clone();
        for (k, s) in d.singular_values.iter().enumerate() {
            us.col_mut(k).iter_mut().for_each(|x| *x *= s);
        }
        us.matmul(&d.v.transpose())
    }

    #[test]
    fn rank_one_outer_product() {
        let u = [1.0, 2.0, -1.0, 0.5];
        let v = [3.0, -1.0, 2.0];
        let s = DenseMatrix::from_fn(4, 3, |i, j| u[i] * v[j]);
        let d = svd(&s).unwrap();
        let expected = norm2(&u) * norm2(&v);
        assert!((d.singular_values[0] - expected).abs() < 1e-12 * expected);
        assert!(d.singular_values[1..].iter().all(|&x| x < 1e-12 * expected));
        assert!(orthonormality_error(&d.u) < 1e-10);
        assert!(orthonormality_error(&d.v) < 1e-10);
    }

    #[test]
    fn diagonal_singular_values_sorted() {
        let s = DenseMatrix::from_rows(&[&[3.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0]]);
        let d = svd(&s).unwrap();
        assert_eq!(d.singular_values, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn random_tall_and_wide_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (m, n) in [(20, 12), (12, 20)] {
            let s = DenseMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            let d = svd(&s).unwrap();
            assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
            assert!(d.singular_values.iter().all(|&x| x >= 0.0));
            assert!(orthonormality_error(&d.u) < 1e-10);
            assert!(orthonormality_error(&d.v) < 1e-10);
            let err = reconstruct(&d).sub(&s).frobenius_norm();
            assert!(err <= 1e-10 * s.frobenius_norm());
        }
    }

    #[test]
    fn orthonormal_transpose_has_unit_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DenseMatrix::from_fn(15, 6, |_, _| rng.gen_range(-1.0..1.0));
        let q = svd(&a).unwrap().u;
        let d = svd(&q.transpose()).unwrap();
        assert!(d.singular_values.iter().all(|&x| (x - 1.0).abs() < 1e-10));
    }

    #[test]
    fn zero_matrix_gets_completed_basis() {
        let d = svd(&DenseMatrix::zeros(5, 3)).unwrap();
        assert!(d.singular_values.iter().all(|&x| x == 0.0));
        assert!(orthonormality_error(&d.u) < 1e-12);
    }
}
