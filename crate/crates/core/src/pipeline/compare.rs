use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use crate::coupling::CouplingMode;
use crate::{Error, Result};

use super::offline::csv_error;
use super::online::{load_basis_for, reference, run_mode, write_trace, ModeRun};
use super::plot::plot_compare;
use super::{discretisation, fmt, Layout, RunConfig, METRICS_HEADER};

/// Metrics columns followed by the diagnostics; `wall_time` is last so
/// determinism checks can drop it.
pub const COMPARE_HEADER: [&str; 18] = [
    "mode",
    "step",
    "time",
    "iterations",
    "evaluations",
    "J",
    "grad_norm",
    "err_u1",
    "err_u2",
    "err_p1",
    "err_p2",
    "j_zero",
    "j_initial",
    "mismatch",
    "termination",
    "line_search_failures",
    "divergence",
    "wall_time",
];

#[derive(Debug)]
pub struct CompareOutput {
    pub csv: PathBuf,
    pub plots: Vec<PathBuf>,
    pub rows: usize,
    /// Modes whose run stopped early, with the error.
    pub failures: Vec<(CouplingMode, Error)>,
    pub wall_time: f64,
}

/// Runs all four couplings at the test parameter against one monolithic
/// reference, writes `compare.csv` and `trace.csv`, and plots from the CSV.
pub fn run_compare(config: &RunConfig) -> Result<CompareOutput> {
    debug_assert_eq!(COMPARE_HEADER[..METRICS_HEADER.len()], METRICS_HEADER);
    let start = Instant::now();
    let disc = Arc::new(discretisation(config)?);
    let basis = load_basis_for(config, &disc, &CouplingMode::ALL)?;
    let dir = Layout::new(&config.out).compare();
    fs::create_dir_all(&dir)?;
    info!("compare: monolithic reference over {} steps", config.steps());
    let reference = reference(&disc, config)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.min(CouplingMode::ALL.len()))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", config.workers)))?;
    let runs: Vec<Result<ModeRun>> = pool.install(|| {
        CouplingMode::ALL.par_iter().map(|&m| run_mode(&disc, basis.clone(), m, config, &reference)).collect()
    });

    let mut failures = Vec::new();
    let mut records = Vec::new();
    for (mode, run) in CouplingMode::ALL.into_iter().zip(runs) {
        match run {
            Ok(run) => {
                if let Some(e) = run.failure {
                    warn!("{mode} stopped after {} steps: {e}", run.records.len());
                    failures.push((mode, e));
                }
                records.extend(run.records);
            }
            Err(e) => {
                warn!("{mode} could not start: {e}");
                failures.push((mode, e));
            }
        }
    }

    let csv_path = dir.join("compare.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_error)?;
    w.write_record(COMPARE_HEADER).map_err(csv_error)?;
    for r in &records {
        let p = &r.report;
        let mut row = r.metrics_fields();
        row.extend([
            p.j_zero.map_or(String::new(), fmt),
            fmt(p.j_initial),
            fmt(p.mismatch),
            p.termination.as_str().to_string(),
            p.line_search_failures.to_string(),
            fmt(p.divergence),
            format!("{:.3}", p.wall_time),
        ]);
        w.write_record(row).map_err(csv_error)?;
    }
    w.flush()?;
    write_trace(&dir.join("trace.csv"), &records.iter().collect::<Vec<_>>())?;
    let plots = plot_compare(&csv_path, &dir)?;
    Ok(CompareOutput { csv: csv_path, plots, rows: records.len(), failures, wall_time: start.elapsed().as_secs_f64() })
}
