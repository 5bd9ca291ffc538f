use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;

use crate::archive::Archive;
use crate::coupling::{reference_errors, run_monolithic, run_transient, CouplingMode, CouplingProblem, StepSolution, TimestepReport};
use crate::rom::ReducedBasis;
use crate::solvers::{Discretisation, NewtonSettings, StateSolution};
use crate::{Error, Result};

use super::offline::{csv_error, load_offline_basis};
use super::{discretisation, fmt, Layout, RunConfig};

pub const METRICS_HEADER: [&str; 11] =
    ["mode", "step", "time", "iterations", "evaluations", "J", "grad_norm", "err_u1", "err_u2", "err_p1", "err_p2"];

const STATES_MAGIC: [u8; 8] = *b"DDROMSTA";

/// One row of the per-step metrics.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MetricsRecord {
    pub mode: CouplingMode,
    pub report: TimestepReport,
    /// Relative L² errors of u₁, u₂, p₁, p₂ against the restricted
    /// monolithic solution.
    pub errors: [f64; 4],
}

impl MetricsRecord {
    pub fn metrics_fields(&self) -> Vec<String> {
        let r = &self.report;
        let mut v = vec![
            self.mode.to_string(),
            r.step.to_string(),
            fmt(r.time),
            r.iterations.to_string(),
            r.evaluations.to_string(),
            fmt(r.j),
            fmt(r.grad_norm),
        ];
        v.extend(self.errors.iter().map(|&e| fmt(e)));
        v
    }
}

/// Output of one coupled run against the monolithic reference.
#[derive(Debug)]
pub(crate) struct ModeRun {
    pub records: Vec<MetricsRecord>,
    pub steps: Vec<StepSolution>,
    pub failure: Option<Error>,
}

pub(crate) fn run_mode(
    disc: &Arc<Discretisation>,
    basis: Option<Arc<ReducedBasis>>,
    mode: CouplingMode,
    config: &RunConfig,
    reference: &[StateSolution],
) -> Result<ModeRun> {
    let basis = if mode.needs_basis() { basis } else { None };
    let mut problem = CouplingProblem::new(mode, disc.clone(), basis, config.test, config.dt, NewtonSettings::default())?;
    let run = run_transient(&mut problem, &config.transient(), |s| {
        let r = &s.report;
        info!(
            "{mode} step {}: {} iterations, J = {:e}, {} ({:.2}s)",
            r.step,
            r.iterations,
            r.j,
            r.termination.as_str(),
            r.wall_time
        );
    });
    let records = run
        .steps
        .iter()
        .map(|s| MetricsRecord { mode, report: s.report.clone(), errors: reference_errors(disc, &s.states, &reference[s.report.step - 1]) })
        .collect();
    Ok(ModeRun { records, steps: run.steps, failure: run.failure })
}

pub(crate) fn reference(disc: &Discretisation, config: &RunConfig) -> Result<Vec<StateSolution>> {
    run_monolithic(disc, config.test, config.dt, config.steps(), NewtonSettings::default())
}

pub(crate) fn load_basis_for(config: &RunConfig, disc: &Discretisation, modes: &[CouplingMode]) -> Result<Option<Arc<ReducedBasis>>> {
    if modes.iter().any(|m| m.needs_basis()) {
        Ok(Some(Arc::new(load_offline_basis(config, disc)?)))
    } else {
        Ok(None)
    }
}

/// Optimiser trace rows `mode,step,iteration,J`.
pub(crate) fn write_trace(path: &Path, records: &[&MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["mode", "step", "iteration", "J"]).map_err(csv_error)?;
    for r in records {
        for (it, j) in r.report.history.iter().enumerate() {
            w.write_record([r.mode.to_string(), r.report.step.to_string(), it.to_string(), fmt(*j)]).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_states(path: &Path, disc: &Discretisation, mode: CouplingMode, steps: &[StepSolution]) -> Result<()> {
    let mut a = Archive::new(STATES_MAGIC, disc.fingerprint());
    a.push_int("steps", steps.len() as u64);
    a.push_int(&format!("mode.{}", mode.as_str()), 1);
    for s in steps {
        let n = s.report.step;
        for i in 0..2 {
            a.push_vector(&format!("step{n}.u{}", i + 1), &s.states.u[i]);
            a.push_vector(&format!("step{n}.p{}", i + 1), &s.states.p[i]);
        }
        a.push_vector(&format!("step{n}.g"), &s.control);
    }
    fs::write(path, a.to_bytes())?;
    Ok(())
}

#[derive(Debug)]
pub struct OnlineOutput {
    pub dir: PathBuf,
    pub metrics: PathBuf,
    pub rows: usize,
}

/// Runs the monolithic reference and the configured coupling mode at the
/// test parameter; writes `metrics.csv`, `details.csv`, `trace.csv` and
/// `states.bin`. A failed step still leaves the completed prefix on disk.
pub fn run_online(config: &RunConfig) -> Result<OnlineOutput> {
    let disc = Arc::new(discretisation(config)?);
    let mode = config.mode;
    let basis = load_basis_for(config, &disc, &[mode])?;
    let dir = Layout::new(&config.out).online(mode.as_str());
    fs::create_dir_all(&dir)?;
    info!("online: monolithic reference over {} steps", config.steps());
    let reference = reference(&disc, config)?;
    let run = run_mode(&disc, basis, mode, config, &reference)?;

    let metrics = dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&metrics).map_err(csv_error)?;
    w.write_record(METRICS_HEADER).map_err(csv_error)?;
    for r in &run.records {
        w.write_record(r.metrics_fields()).map_err(csv_error)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("details.csv")).map_err(csv_error)?;
    w.write_record(["mode", "step", "j_zero", "j_initial", "mismatch", "termination", "line_search_failures", "divergence"])
        .map_err(csv_error)?;
    for r in &run.records {
        let p = &r.report;
        w.write_record([
            mode.to_string(),
            p.step.to_string(),
            p.j_zero.map_or(String::new(), fmt),
            fmt(p.j_initial),
            fmt(p.mismatch),
            p.termination.as_str().to_string(),
            p.line_search_failures.to_string(),
            fmt(p.divergence),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;

    write_trace(&dir.join("trace.csv"), &run.records.iter().collect::<Vec<_>>())?;
    write_states(&dir.join("states.bin"), &disc, mode, &run.steps)?;
    if let Some(e) = run.failure {
        return Err(e);
    }
    Ok(OnlineOutput { dir, metrics, rows: run.records.len() })
}
