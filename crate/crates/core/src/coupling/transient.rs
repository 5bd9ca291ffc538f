use std::time::Instant;

use log::{debug, info, warn};

use crate::solvers::{monolithic_step, Discretisation, NewtonSettings, Parameter, StateSolution, StateSolver};
use crate::{Error, Result};

use super::lbfgs::{lbfgs_minimize, LbfgsSettings, Termination};
use super::problem::{gradient_norm, CouplingProblem, LiftedStates, ObjectiveEvaluation, SubState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientSettings {
    pub steps: usize,
    pub lbfgs: LbfgsSettings,
    /// Start every step from the previous optimum (otherwise from `g = 0`).
    pub warm_start: bool,
    /// Also evaluate `g = 0` on every step to report the uncontrolled mismatch.
    pub evaluate_zero_control: bool,
}

impl Default for TransientSettings {
    fn default() -> Self {
        Self { steps: 10, lbfgs: LbfgsSettings::default(), warm_start: true, evaluate_zero_control: true }
    }
}

/// Outcome of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestepReport {
    /// 1-based step number.
    pub step: usize,
    pub time: f64,
    pub iterations: usize,
    /// Objective evaluations of the optimiser (the `g = 0` probe excluded).
    pub evaluations: usize,
    pub j: f64,
    /// Objective at the optimiser's start point.
    pub j_initial: f64,
    /// Objective at `g = 0`, when evaluated.
    pub j_zero: Option<f64>,
    /// Unprojected interface mismatch at the optimum.
    pub mismatch: f64,
    pub grad_norm: f64,
    pub line_search_failures: usize,
    pub termination: Termination,
    pub wall_time: f64,
    /// Objective after every accepted step, starting point included.
    pub history: Vec<f64>,
    /// Largest discrete divergence of the committed states.
    pub divergence: f64,
}

/// One committed time level.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub report: TimestepReport,
    pub states: LiftedStates,
    /// Full-order control.
    pub control: Vec<f64>,
}

/// Completed prefix of a transient run and the error that stopped it, if any.
#[derive(Debug)]
pub struct TransientRun {
    pub steps: Vec<StepSolution>,
    pub failure: Option<Error>,
}

impl TransientRun {
    pub fn reports(&self) -> impl Iterator<Item = &TimestepReport> {
        self.steps.iter().map(|s| &s.report)
    }

    pub fn into_result(self) -> Result<Vec<StepSolution>> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self.steps),
        }
    }
}

fn optimise_step(problem: &mut CouplingProblem, x0: &[f64], settings: &TransientSettings, step: usize) -> Result<(StepSolution, Vec<f64>)> {
    let start = Instant::now();
    let zero = vec![0.0; problem.control_dim()];
    let j_zero = if settings.evaluate_zero_control {
        Some(problem.evaluate(&zero)?.j)
    } else {
        None
    };
    // a warm start that is worse than g = 0 (e.g. after the impulsive start)
    // is dropped in favour of g = 0
    let mut start_x = x0;
    if let Some(jz) = j_zero {
        if x0.iter().any(|&v| v != 0.0) {
            let jw = problem.evaluate(x0)?.j;
            if jw > jz {
                debug!("{} step {step}: warm start J {jw:.3e} exceeds g = 0 value {jz:.3e}", problem.mode());
                start_x = &zero;
            }
        }
    }
    let mut best: Option<(Vec<f64>, ObjectiveEvaluation)> = None;
    let out = lbfgs_minimize(
        |x| {
            let e = problem.evaluate(x)?;
            let r = (e.j, e.gradient.clone());
            if best.as_ref().is_none_or(|(_, b)| e.j < b.j) {
                best = Some((x.to_vec(), e));
            }
            Ok(r)
        },
        start_x,
        &settings.lbfgs,
    )?;
    let (bx, mut eval) = best.expect("at least one evaluation");
    if bx != out.x {
        eval = problem.evaluate(&out.x)?;
    }
    if out.termination == Termination::Stagnated {
        warn!("{} step {step}: line search stagnated at J = {:e}", problem.mode(), out.f);
    }
    let states = problem.lift(&eval.states);
    let divergence = problem.divergence(&eval.states);
    let report = TimestepReport {
        step,
        time: step as f64 * problem.dt(),
        iterations: out.iterations,
        evaluations: out.evaluations,
        j: out.f,
        j_initial: out.initial_f,
        j_zero,
        mismatch: eval.mismatch,
        grad_norm: gradient_norm(&out.grad),
        line_search_failures: out.line_search_failures,
        termination: out.termination,
        wall_time: start.elapsed().as_secs_f64(),
        history: out.history,
        divergence,
    };
    let control = eval.control.clone();
    let committed: [SubState; 2] = eval.states;
    problem.commit(committed);
    Ok((StepSolution { report, states, control }, out.x))
}

/// Advances the coupled problem by `settings.steps` implicit-Euler steps,
/// minimising the interface objective on each. `on_step` sees each committed
/// step as soon as it is available.
pub fn run_transient(
    problem: &mut CouplingProblem,
    settings: &TransientSettings,
    mut on_step: impl FnMut(&StepSolution),
) -> TransientRun {
    let mut x = vec![0.0; problem.control_dim()];
    let mut steps = Vec::with_capacity(settings.steps);
    for n in 1..=settings.steps {
        if !settings.warm_start {
            x.iter_mut().for_each(|v| *v = 0.0);
        }
        match optimise_step(problem, &x, settings, n) {
            Ok((sol, xn)) => {
                let r = &sol.report;
                info!(
                    "{} step {n}: {} iterations, {} evaluations, J = {:.3e} (start {:.3e}), {}",
                    problem.mode(),
                    r.iterations,
                    r.evaluations,
                    r.j,
                    r.j_initial,
                    r.termination.as_str()
                );
                on_step(&sol);
                steps.push(sol);
                x = xn;
            }
            Err(e) => {
                return TransientRun {
                    steps,
                    failure: Some(Error::Context { context: format!("{} step {n}", problem.mode()), source: Box::new(e) }),
                }
            }
        }
    }
    TransientRun { steps, failure: None }
}

/// Monolithic reference trajectory; returns the state after each step.
pub fn run_monolithic(disc: &Discretisation, mu: Parameter, dt: f64, steps: usize, newton: NewtonSettings) -> Result<Vec<StateSolution>> {
    let domain = disc.monolithic().clone();
    let mut solver = StateSolver::new(domain.clone(), mu.nu, Some(dt), true, newton)?;
    let mut prev = StateSolution::zeros(&domain);
    let mut out = Vec::with_capacity(steps);
    for n in 1..=steps {
        let guess = prev.stacked();
        let s = monolithic_step(&mut solver, &prev.u, mu, Some(&guess))
            .map_err(|e| Error::Context { context: format!("monolithic step {n}"), source: Box::new(e) })?;
        out.push(s.clone());
        prev = s;
    }
    Ok(out)
}

/// Relative L² errors of subdomain velocities and pressures against the
/// restricted monolithic state: `[u₁, u₂, p₁, p₂]`.
pub fn reference_errors(disc: &Discretisation, states: &LiftedStates, mono: &StateSolution) -> [f64; 4] {
    let mut e = [0.0; 4];
    for i in 0..2 {
        let d = disc.subdomain(i);
        let r = disc.restriction(i);
        let (um, pm) = (r.velocity(&mono.u), r.pressure(&mono.p));
        let du: Vec<f64> = states.u[i].iter().zip(&um).map(|(a, b)| a - b).collect();
        let dp: Vec<f64> = states.p[i].iter().zip(&pm).map(|(a, b)| a - b).collect();
        let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };
        e[i] = rel(d.velocity_l2(&du), d.velocity_l2(&um));
        e[2 + i] = rel(d.pressure_l2(&dp), d.pressure_l2(&pm));
    }
    e
}
