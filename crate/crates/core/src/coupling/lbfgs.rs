//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use crate::linalg::{dot, norm2, norm_inf};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsSettings {
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search: usize,
    /// Stop when `‖∇J‖∞ ≤ gtol`.
    pub gtol: f64,
    /// Stop when `|ΔJ| ≤ ftol·max(|J|, 1)`.
    pub ftol: f64,
    pub max_iterations: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self { memory: 10, c1: 1e-4, c2: 0.9, max_line_search: 20, gtol: 1e-8, ftol: 1e-12, max_iterations: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    FunctionChange,
    MaxIterations,
    /// The line search failed even along steepest descent.
    Stagnated,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Gradient => "gradient",
            Termination::FunctionChange => "function-change",
            Termination::MaxIterations => "max-iterations",
            Termination::Stagnated => "stagnated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    /// Best point evaluated.
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub initial_f: f64,
    /// Accepted steps.
    pub iterations: usize,
    /// Objective/gradient evaluations, the initial one included.
    pub evaluations: usize,
    pub line_search_failures: usize,
    pub termination: Termination,
    /// Objective at the start point and after every accepted step.
    pub history: Vec<f64>,
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Evaluator<'a, F> {
    f: &'a mut F,
    count: usize,
    best: Option<Point>,
}

impl<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>> Evaluator<'_, F> {
    fn eval(&mut self, x: Vec<f64>) -> Result<Point> {
        let (f, g) = (self.f)(&x)?;
        self.count += 1;
        if g.len() != x.len() {
            return Err(Error::Dimension(format!("gradient has length {} for a control of length {}", g.len(), x.len())));
        }
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("objective returned a non-finite value".into()));
        }
        if self.best.as_ref().is_none_or(|b| f < b.f) {
            self.best = Some(Point { x: x.clone(), f, g: g.clone() });
        }
        Ok(Point { x, f, g })
    }
}

fn step(x: &[f64], d: &[f64], a: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + a * di).collect()
}

/// Minimiser of the cubic through `(a, fa, da)` and `(b, fb, db)`, kept inside
/// the central 80% of the bracket.
fn cubic_step(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let mid = 0.5 * (a + b);
    let t = if disc >= 0.0 {
        let d2 = (b - a).signum() * disc.sqrt();
        b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2)
    } else {
        mid
    };
    let (lo, hi) = (a.min(b), a.max(b));
    let w = hi - lo;
    if t.is_finite() {
        t.clamp(lo + 0.1 * w, hi - 0.1 * w)
    } else {
        mid
    }
}

/// Strong-Wolfe line search along `d`; `None` when the trial budget runs out.
fn line_search<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>>(
    ev: &mut Evaluator<'_, F>,
    start: &Point,
    d: &[f64],
    a0: f64,
    s: &LbfgsSettings,
) -> Result<Option<(f64, Point)>> {
    let (f0, dphi0) = (start.f, dot(&start.g, d));
    let armijo = |a: f64, fa: f64| fa <= f0 + s.c1 * a * dphi0;
    let curvature = |da: f64| da.abs() <= -s.c2 * dphi0;
    let mut trials = 0;
    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, f0, dphi0);
    let mut a = a0;
    let (mut lo, mut hi);
    loop {
        if trials == s.max_line_search {
            return Ok(None);
        }
        trials += 1;
        let p = ev.eval(step(&start.x, d, a))?;
        let da = dot(&p.g, d);
        if !armijo(a, p.f) || (trials > 1 && p.f >= f_prev) {
            lo = (a_prev, f_prev, d_prev);
            hi = (a, p.f, da);
            break;
        }
        if curvature(da) {
            return Ok(Some((a, p)));
        }
        if da >= 0.0 {
            lo = (a, p.f, da);
            hi = (a_prev, f_prev, d_prev);
            break;
        }
        (a_prev, f_prev, d_prev) = (a, p.f, da);
        a *= 2.0;
    }
    while trials < s.max_line_search {
        trials += 1;
        let a = cubic_step(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2);
        let p = ev.eval(step(&start.x, d, a))?;
        let da = dot(&p.g, d);
        if !armijo(a, p.f) || p.f >= lo.1 {
            hi = (a, p.f, da);
        } else {
            if curvature(da) {
                return Ok(Some((a, p)));
            }
            if da * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, p.f, da);
        }
    }
    Ok(None)
}

/// Two-loop recursion: `-H ∇f` with the stored pairs.
fn direction(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimises `f` from `x0`. `f` returns the objective and its gradient.
pub fn lbfgs_minimize<F>(mut f: F, x0: &[f64], settings: &LbfgsSettings) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let s = settings;
    let mut ev = Evaluator { f: &mut f, count: 0, best: None };
    let mut cur = ev.eval(x0.to_vec())?;
    let initial_f = cur.f;
    let mut history = vec![cur.f];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut failures = 0;
    let termination = loop {
        if norm_inf(&cur.g) <= s.gtol {
            break Termination::Gradient;
        }
        if iterations >= s.max_iterations {
            break Termination::MaxIterations;
        }
        let mut d = direction(&cur.g, &pairs);
        if dot(&d, &cur.g) >= 0.0 {
            pairs.clear();
            d = cur.g.iter().map(|v| -v).collect();
        }
        let a0 = if pairs.is_empty() { 1.0 / norm2(&cur.g) } else { 1.0 };
        let next = match line_search(&mut ev, &cur, &d, a0, s)? {
            Some((_, p)) => p,
            None => {
                failures += 1;
                if pairs.is_empty() {
                    break Termination::Stagnated;
                }
                pairs.clear();
                continue;
            }
        };
        let sv: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&sv, &yv);
        if sy > f64::EPSILON * dot(&yv, &yv) {
            if pairs.len() == s.memory {
                pairs.pop_front();
            }
            pairs.push_back((sv, yv, 1.0 / sy));
        }
        let df = (cur.f - next.f).abs();
        iterations += 1;
        history.push(next.f);
        let scale = cur.f.abs().max(next.f.abs()).max(1.0);
        cur = next;
        if df <= s.ftol * scale {
            break if norm_inf(&cur.g) <= s.gtol { Termination::Gradient } else { Termination::FunctionChange };
        }
    };
    let best = ev.best.take().expect("at least one evaluation");
    Ok(LbfgsOutcome {
        x: best.x,
        f: best.f,
        grad: best.g,
        initial_f,
        iterations,
        evaluations: ev.count,
        line_search_failures: failures,
        termination,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dense_solve, DenseMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn convex_quadratic_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DenseMatrix::from_fn(10, 10, |_, _| rng.gen_range(-1.0..1.0));
        let mut h = a.transpose_matmul(&a);
        for k in 0..10 {
            h.col_mut(k)[k] += 1.0;
        }
        let b: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let exact = dense_solve(&h, &b).unwrap();
        let out = lbfgs_minimize(
            |x| {
                let hx = h.matvec(x);
                let f = 0.5 * dot(x, &hx) - dot(&b, x);
                Ok((f, hx.iter().zip(&b).map(|(a, c)| a - c).collect()))
            },
            &[0.0; 10],
            // J resolves the minimiser only to about √eps, so the
            // function-change exit is disabled and the gradient test decides
            &LbfgsSettings { ftol: 0.0, ..LbfgsSettings::default() },
        )
        .unwrap();
        assert!(out.iterations <= 30, "{} iterations", out.iterations);
        let err = out.x.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "error {err} after {} iterations", out.iterations);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rosenbrock_reaches_minimiser() {
        let rosen = |x: &[f64]| {
            let f = 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
            let g = vec![-400.0 * x[0] * (x[1] - x[0] * x[0]) - 2.0 * (1.0 - x[0]), 200.0 * (x[1] - x[0] * x[0])];
            Ok((f, g))
        };
        let out = lbfgs_minimize(rosen, &[-1.2, 1.0], &LbfgsSettings::default()).unwrap();
        assert!((out.x[0] - 1.0).abs() <= 1e-6 && (out.x[1] - 1.0).abs() <= 1e-6, "{:?}", out.x);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn optimal_start_exits_immediately() {
        let out = lbfgs_minimize(|x| Ok((dot(x, x), x.iter().map(|v| 2.0 * v).collect())), &[0.0; 4], &LbfgsSettings::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.evaluations, 1);
        assert_eq!(out.termination, Termination::Gradient);
    }

    #[test]
    fn inconsistent_gradient_is_flagged_stagnated() {
        // gradient points uphill, so no step can satisfy the sufficient decrease
        let out = lbfgs_minimize(|x| Ok((x[0], vec![-1.0])), &[0.0], &LbfgsSettings::default()).unwrap();
        assert_eq!(out.termination, Termination::Stagnated);
        assert_eq!(out.x, vec![0.0]);
    }
}
