use crate::linalg::{dot, svd, DenseMatrix, SparseMatrix};
use crate::{Error, Result};

/// An inner product given by an SPD Gram matrix.
pub trait Gram {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }
}

impl Gram for SparseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
}

impl Gram for DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
}

/// The Euclidean inner product on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct Euclidean(pub usize);

impl Gram for Euclidean {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// Relative size below which a Gram–Schmidt remainder counts as dependent.
const DEPENDENT: f64 = 1e-13;
/// Relative singular-value threshold defining the numerical rank.
pub const RANK_TOL: f64 = 1e-12;

/// Orthogonalises `v` against the columns of `q` twice (classical
/// Gram–Schmidt with reorthogonalisation); returns the coefficients and the
/// remainder.
pub fn cgs2(q: &DenseMatrix, x: &dyn Gram, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut r = v.to_vec();
    let mut coef = vec![0.0; q.ncols()];
    for _ in 0..2 {
        let xr = x.apply(&r);
        let c: Vec<f64> = q.columns().map(|col| dot(col, &xr)).collect();
        for (j, cj) in c.iter().enumerate() {
            for (ri, qi) in r.iter_mut().zip(q.col(j)) {
                *ri -= cj * qi;
            }
            coef[j] += cj;
        }
    }
    (coef, r)
}

/// Output of a weighted POD.
#[derive(Debug, Clone)]
pub struct PodBasis {
    /// X-orthonormal modes, leading first.
    pub modes: DenseMatrix,
    /// All singular values of the weighted snapshot matrix (length = number of
    /// snapshots, zero-padded beyond the numerical rank).
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

/// Leading `n` POD modes of the snapshot columns in the inner product `x`.
///
/// The snapshots are factored as `S = Q R` with `Qᵀ X Q = I`; the left
/// singular vectors of `X^{1/2} S` are then `Q U` with `R = U Σ Vᵀ`.
pub fn pod_basis(snapshots: &DenseMatrix, n: usize, x: &dyn Gram) -> Result<PodBasis> {
    let m = snapshots.ncols();
    if snapshots.nrows() != x.dim() {
        return Err(Error::Dimension(format!(
            "snapshots have {} rows but the inner product has dimension {}",
            snapshots.nrows(),
            x.dim()
        )));
    }
    let mut q = DenseMatrix::zeros(snapshots.nrows(), 0);
    let mut rcols: Vec<Vec<f64>> = Vec::with_capacity(m);
    for s in snapshots.columns() {
        let norm0 = x.inner(s, s).max(0.0).sqrt();
        let (mut coef, rem) = cgs2(&q, x, s);
        let rn = x.inner(&rem, &rem).max(0.0).sqrt();
        if norm0 > 0.0 && rn > DEPENDENT * norm0 {
            q.push_column(&rem.iter().map(|v| v / rn).collect::<Vec<_>>());
            coef.push(rn);
        }
        rcols.push(coef);
    }
    let k = q.ncols();
    let r = DenseMatrix::from_fn(k, m, |i, j| rcols[j].get(i).copied().unwrap_or(0.0));
    let dec = svd(&r)?;
    let mut sv = dec.singular_values.clone();
    sv.resize(m, 0.0);
    let s1 = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * s1 && s > 0.0).count();
    if n > rank {
        return Err(Error::RankDeficient { requested: n, rank });
    }
    let modes = q.matmul(&dec.u.leading_columns(n));
    Ok(PodBasis { modes, singular_values: sv, rank })
}

/// Maximum deviation of `Zᵀ X Z` from the identity.
pub fn orthonormality_error(z: &DenseMatrix, x: &dyn Gram) -> f64 {
    let xz: Vec<Vec<f64>> = z.columns().map(|c| x.apply(c)).collect();
    let mut err: f64 = 0.0;
    for i in 0..z.ncols() {
        for j in 0..z.ncols() {
            let v = dot(z.col(i), &xz[j]);
            err = err.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    err
}

/// X-orthogonal projection error `‖s − Z Zᵀ X s‖_X` of one vector.
pub fn projection_error(z: &DenseMatrix, x: &dyn Gram, s: &[f64]) -> f64 {
    let xs = x.apply(s);
    let c: Vec<f64> = z.columns().map(|col| dot(col, &xs)).collect();
    let r: Vec<f64> = (0..s.len()).map(|i| s[i] - (0..z.ncols()).map(|j| z.col(j)[i] * c[j]).sum::<f64>()).collect();
    x.inner(&r, &r).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Cholesky;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spd(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let a = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut g = a.transpose_matmul(&a);
        for i in 0..n {
            g.col_mut(i)[i] += n as f64;
        }
        g
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn identical_snapshots_give_one_mode() {
        let s0: Vec<f64> = (0..8).map(|k| (k as f64).cos()).collect();
        let s = DenseMatrix::from_columns(8, &[s0.clone(), s0.clone(), s0.clone()]);
        let p = pod_basis(&s, 1, &Euclidean(8)).unwrap();
        assert!(p.singular_values[1] / p.singular_values[0] <= 1e-12);
        let n = crate::linalg::norm2(&s0);
        let m = p.modes.col(0);
        let sign = m[0].signum() * s0[0].signum();
        assert!(m.iter().zip(&s0).all(|(a, b)| (sign * a - b / n).abs() < 1e-14));
        assert!(matches!(pod_basis(&s, 2, &Euclidean(8)), Err(Error::RankDeficient { requested: 2, rank: 1 })));
    }

    #[test]
    fn orthogonal_snapshots_reconstruct_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = spd(6, &mut rng);
        let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b0: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = x.inner(&a, &b0) / x.inner(&a, &a);
        let b: Vec<f64> = b0.iter().zip(&a).map(|(v, w)| v - c * w).collect();
        let s = DenseMatrix::from_columns(6, &[a.clone(), b.clone()]);
        let p = pod_basis(&s, 2, &x).unwrap();
        for col in [&a, &b] {
            assert!(projection_error(&p.modes, &x, col) <= 1e-12);
        }
    }

    #[test]
    fn singular_values_match_cholesky_oracle() {
        // oracle: σ(Lᵀ S) with X = L Lᵀ, computed independently
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = spd(200, &mut rng);
        let s = random(200, 30, &mut rng);
        let p = pod_basis(&s, 10, &x).unwrap();
        let l = Cholesky::factor(&x).unwrap();
        let lts = DenseMatrix::from_columns(200, &s.columns().map(|c| l.mul_lt(c)).collect::<Vec<_>>());
        let oracle = svd(&lts).unwrap().singular_values;
        for (a, b) in p.singular_values.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10 * oracle[0], "{a} vs {b}");
        }
        assert!(orthonormality_error(&p.modes, &x) <= 1e-10);
    }

    #[test]
    fn eckart_young_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = spd(40, &mut rng);
        let s = random(40, 9, &mut rng);
        for n in [1, 4, 7] {
            let p = pod_basis(&s, n, &x).unwrap();
            let err: f64 = s.columns().map(|c| projection_error(&p.modes, &x, c).powi(2)).sum();
            let tail: f64 = p.singular_values[n..].iter().map(|v| v * v).sum();
            assert!((err - tail).abs() <= 1e-10 * p.singular_values[0].powi(2), "{n}: {err} vs {tail}");
        }
    }

    #[test]
    fn projection_error_non_increasing_in_mode_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = spd(30, &mut rng);
        let s = random(30, 12, &mut rng);
        let errs: Vec<Vec<f64>> = [2, 5, 9]
            .iter()
            .map(|&n| {
                let p = pod_basis(&s, n, &x).unwrap();
                s.columns().map(|c| projection_error(&p.modes, &x, c)).collect()
            })
            .collect();
        for k in 0..12 {
            assert!(errs[1][k] <= errs[0][k] + 1e-12 && errs[2][k] <= errs[1][k] + 1e-12);
        }
    }
}
