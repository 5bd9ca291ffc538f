use std::sync::Arc;

use crate::fem::DirichletData;
use crate::linalg::{norm_inf, LuAnalysis, SparseLu, SparseMatrix};
use crate::{Error, Result};

use super::domain::FlowDomain;

/// Controls of the Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Absolute residual tolerance (∞-norm).
    pub atol: f64,
    /// Relative residual tolerance (w.r.t. the initial residual).
    pub rtol: f64,
    /// Cap on linear solves per nonlinear solve.
    pub max_iterations: usize,
    /// A step whose residual ratio exceeds this triggers a refactorisation at
    /// the current iterate (values ≥ 1 disable Jacobian reuse across steps).
    pub reuse_ratio: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self { atol: 1e-12, rtol: 1e-14, max_iterations: 50, reuse_ratio: 0.25 }
    }
}

/// Solution of one state solve.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// `‖B u‖∞` at the returned solution.
    pub divergence: f64,
}

impl StateSolution {
    pub fn zeros(domain: &FlowDomain) -> Self {
        Self {
            u: vec![0.0; domain.num_velocity()],
            p: vec![0.0; domain.num_pressure()],
            iterations: 0,
            residual_history: Vec::new(),
            divergence: 0.0,
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut x = self.u.clone();
        x.extend_from_slice(&self.p);
        x
    }
}

/// Adjoint velocity ξ and pressure λ.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSolution {
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub divergence: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub factorizations: usize,
    pub linear_solves: usize,
    pub nonlinear_solves: usize,
    pub adjoint_solves: usize,
}

/// Implicit-Euler (or steady) Navier–Stokes/Stokes solver on one domain.
///
/// The Jacobian factorisation is kept between calls and reused as a chord
/// iteration while it contracts the residual fast enough; a poor contraction
/// triggers a refactorisation at the current iterate. Converged residuals are
/// those of the exact Newton system, so the reuse only affects cost.
pub struct StateSolver {
    domain: Arc<FlowDomain>,
    nu: f64,
    alpha: f64,
    convective: bool,
    settings: NewtonSettings,
    linear: SparseMatrix,
    analysis: Option<Arc<LuAnalysis>>,
    lu: Option<SparseLu>,
    stats: SolverStats,
}

impl std::fmt::Debug for StateSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateSolver")
            .field("nu", &self.nu)
            .field("alpha", &self.alpha)
            .field("convective", &self.convective)
            .field("stats", &self.stats)
            .finish()
    }
}

impl StateSolver {
    /// `dt = None` gives the steady problem; `convective = false` drops `c`.
    pub fn new(domain: Arc<FlowDomain>, nu: f64, dt: Option<f64>, convective: bool, settings: NewtonSettings) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::Config(format!("viscosity must be positive, got {nu}")));
        }
        let alpha = match dt {
            Some(dt) if dt > 0.0 => 1.0 / dt,
            Some(dt) => return Err(Error::Config(format!("time step must be positive, got {dt}"))),
            None => 0.0,
        };
        let linear = domain.pattern().matrix(domain.pattern().linear_values(domain.ops(), alpha, nu));
        Ok(Self { domain, nu, alpha, convective, settings, linear, analysis: None, lu: None, stats: SolverStats::default() })
    }

    pub fn domain(&self) -> &Arc<FlowDomain> {
        &self.domain
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    pub fn settings(&self) -> NewtonSettings {
        self.settings
    }

    /// Drops the cached factorisation.
    pub fn reset(&mut self) {
        self.lu = None;
    }

    /// Constant right-hand side `α M u_prev + f + load`.
    fn rhs(&self, u_prev: Option<&[f64]>, load: Option<&[f64]>) -> Vec<f64> {
        let nu = self.domain.num_velocity();
        let mut rhs = self.domain.forcing().to_vec();
        if let Some(up) = u_prev {
            if self.alpha != 0.0 {
                let mu = self.domain.ops().mass.matvec(up);
                rhs.iter_mut().zip(&mu).for_each(|(r, m)| *r += self.alpha * m);
            }
        }
        if let Some(l) = load {
            rhs.iter_mut().zip(l).for_each(|(r, v)| *r += v);
        }
        rhs.resize(nu + self.domain.num_pressure(), 0.0);
        rhs
    }

    /// Residual of the coupled system; constrained rows are zero.
    fn residual_with(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let nu = self.domain.num_velocity();
        let mut r = self.linear.matvec(x);
        if self.convective {
            self.domain.convection().add_residual(&x[..nu], &mut r[..nu]);
        }
        r.iter_mut().zip(rhs).for_each(|(a, b)| *a -= b);
        self.domain.pattern().zero_constrained(&mut r);
        r
    }

    /// Round-off level of the residual evaluation at `x`.
    fn roundoff(&self, x: &[f64], rhs_norm: f64) -> f64 {
        let nu = self.domain.num_velocity();
        let mut conv = 0.0;
        if self.convective {
            let mut c = vec![0.0; nu];
            self.domain.convection().add_residual(&x[..nu], &mut c);
            conv = norm_inf(&c);
        }
        64.0 * f64::EPSILON * (self.linear.abs_product_norm(x) + conv + rhs_norm)
    }

    /// Residual of the state equations at `x = [u; p]` (constrained rows zeroed).
    pub fn residual(&self, x: &[f64], u_prev: Option<&[f64]>, load: Option<&[f64]>) -> Vec<f64> {
        self.residual_with(x, &self.rhs(u_prev, load))
    }

    /// Exact Jacobian at velocity `u` with constraints applied.
    pub fn jacobian(&self, u: &[f64]) -> SparseMatrix {
        let mut v = self.linear.values().to_vec();
        if self.convective {
            self.domain.convection().add_jacobian_into(u, &mut v, self.domain.pattern().vv_slots());
        }
        self.domain.pattern().apply_constraints(&mut v);
        self.domain.pattern().matrix(v)
    }

    fn factor(&mut self, jac: &SparseMatrix) -> Result<()> {
        let analysis = match &self.analysis {
            Some(a) => a.clone(),
            None => {
                let a = LuAnalysis::new(jac)?;
                self.analysis = Some(a.clone());
                a
            }
        };
        self.lu = Some(analysis.factor(jac)?);
        self.stats.factorizations += 1;
        Ok(())
    }

    fn lu_solve(&mut self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let lu = self.lu.as_ref().expect("factorisation present");
        self.stats.linear_solves += 1;
        if transpose {
            lu.solve_transpose(b)
        } else {
            lu.solve(b)
        }
    }

    /// Solves the state equations for `[u; p]`.
    ///
    /// `load` is an extra velocity load (the interface term), `guess` an initial
    /// iterate (its constrained velocity entries are overwritten by `dirichlet`).
    pub fn solve(
        &mut self,
        u_prev: Option<&[f64]>,
        load: Option<&[f64]>,
        dirichlet: &DirichletData,
        guess: Option<&[f64]>,
    ) -> Result<StateSolution> {
        let nu = self.domain.num_velocity();
        let n = self.domain.num_state();
        let mut x = match guess {
            Some(g) if g.len() == n => g.to_vec(),
            Some(g) => return Err(Error::Dimension(format!("initial guess has length {} not {n}", g.len()))),
            None => vec![0.0; n],
        };
        dirichlet.impose(&mut x[..nu]);
        let rhs = self.rhs(u_prev, load);
        let mut r = self.residual_with(&x, &rhs);
        let mut rn = norm_inf(&r);
        let r0 = rn;
        let rhs_norm = norm_inf(&rhs);
        let base_tol = self.settings.atol.max(self.settings.rtol * r0);
        let mut tol = base_tol.max(self.roundoff(&x, rhs_norm));
        let mut history = vec![rn];
        let mut fresh = false;
        let mut iterations = 0;
        self.stats.nonlinear_solves += 1;
        while rn > tol {
            if iterations == self.settings.max_iterations {
                return Err(Error::NonConvergence { what: "Newton".into(), iterations, history });
            }
            if self.lu.is_none() {
                let jac = self.jacobian(&x[..nu]);
                self.factor(&jac)?;
                fresh = true;
            }
            let mut dx = self.lu_solve(&r, false)?;
            dx.iter_mut().for_each(|v| *v = -*v);
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let r_trial = self.residual_with(&trial, &rhs);
            let rn_trial = norm_inf(&r_trial);
            iterations += 1;
            let ratio = rn_trial / rn;
            if ratio >= 1.0 && !fresh {
                // the stale Jacobian made things worse: refactor here and retry
                self.lu = None;
                history.push(rn_trial);
                continue;
            }
            if ratio >= 1.0 && rn <= 1e3 * tol {
                // a fresh Newton step cannot improve: round-off level reached
                break;
            }
            x = trial;
            tol = base_tol.max(self.roundoff(&x, rhs_norm));
            r = r_trial;
            rn = rn_trial;
            history.push(rn);
            if ratio > self.settings.reuse_ratio && rn > tol {
                self.lu = None;
            }
            fresh = false;
        }
        let (u, p) = x.split_at(nu);
        let divergence = self.domain.divergence_norm(u);
        Ok(StateSolution { u: u.to_vec(), p: p.to_vec(), iterations, residual_history: history, divergence })
    }

    /// Solves the adjoint system `J(u)ᵀ [ξ; λ] = [rhs; 0]` with homogeneous
    /// constraints, `J(u)` the exact Newton Jacobian at the state `u`.
    pub fn adjoint(&mut self, u: &[f64], rhs_velocity: &[f64]) -> Result<AdjointSolution> {
        let nu = self.domain.num_velocity();
        let n = self.domain.num_state();
        if rhs_velocity.len() != nu || u.len() != nu {
            return Err(Error::Dimension("adjoint inputs must live on the velocity space".into()));
        }
        let mut b = rhs_velocity.to_vec();
        b.resize(n, 0.0);
        self.domain.pattern().zero_constrained(&mut b);
        self.stats.adjoint_solves += 1;
        let jac = self.jacobian(u);
        let bn = norm_inf(&b);
        if bn == 0.0 {
            return Ok(AdjointSolution { xi: vec![0.0; nu], lambda: vec![0.0; n - nu], divergence: 0.0 });
        }
        if self.lu.is_none() {
            self.factor(&jac)?;
        }
        let scale = jac.norm_inf();
        let mut refactored = false;
        let mut y = self.lu_solve(&b, true)?;
        let mut prev = f64::INFINITY;
        let mut iterations = 0;
        loop {
            let jty = jac.matvec_transpose(&y);
            let res: Vec<f64> = b.iter().zip(&jty).map(|(a, c)| a - c).collect();
            let rn = norm_inf(&res);
            if rn <= 64.0 * f64::EPSILON * (scale * norm_inf(&y) + bn) {
                break;
            }
            iterations += 1;
            if rn > self.settings.reuse_ratio * prev || iterations > 40 {
                if refactored {
                    if rn <= 1e-10 * (scale * norm_inf(&y) + bn) {
                        break;
                    }
                    return Err(Error::NonConvergence {
                        what: "adjoint refinement".into(),
                        iterations,
                        history: vec![rn],
                    });
                }
                self.factor(&jac)?;
                refactored = true;
                y = self.lu_solve(&b, true)?;
                prev = f64::INFINITY;
                continue;
            }
            prev = rn;
            let dy = self.lu_solve(&res, true)?;
            y.iter_mut().zip(&dy).for_each(|(a, d)| *a += d);
        }
        let lambda = y.split_off(nu);
        let divergence = self.domain.divergence_norm(&y);
        Ok(AdjointSolution { xi: y, lambda, divergence })
    }
}
