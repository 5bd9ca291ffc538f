use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::rom::{collect_parameter, load_basis, manifest_path, save_basis, ReducedBasis, SnapshotSet, SnapshotSettings};
use crate::solvers::{Discretisation, NewtonSettings, Parameter};
use crate::{Error, Result, ResultExt};

use super::{discretisation, fmt, sha256_file, Layout, RunConfig};

/// Largest tolerated fraction of failed training runs.
const MAX_FAILED_FRACTION: f64 = 0.2;

#[derive(Debug)]
pub struct OfflineOutput {
    pub basis: Arc<ReducedBasis>,
    pub discretisation: Arc<Discretisation>,
    pub training: Vec<Parameter>,
    pub snapshots: SnapshotSet,
    pub failed: Vec<usize>,
    /// Parameters whose snapshots were loaded from an earlier run.
    pub reused: usize,
    pub manifest: PathBuf,
    pub wall_time: f64,
}

/// Seeded uniform sample of the parameter box.
pub fn sample_training(config: &RunConfig) -> Vec<Parameter> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.training_size)
        .map(|_| {
            let u_bar = rng.gen_range(config.u_bar_min..=config.u_bar_max);
            let nu = rng.gen_range(config.nu_min..=config.nu_max);
            Parameter::new(u_bar, nu)
        })
        .collect()
}

fn snapshot_fingerprint(disc: &Discretisation, config: &RunConfig, mu: Parameter) -> String {
    format!(
        "{} dt={:?} steps={} mu=({:?},{:?}) lbfgs={:?} warm={}",
        disc.fingerprint(),
        config.dt,
        config.steps(),
        mu.u_bar,
        mu.nu,
        config.lbfgs,
        config.warm_start
    )
}

/// Samples the training set, runs the full-order coupling at every training
/// parameter (reusing snapshot files of an interrupted run), and builds and
/// saves the reduced bases.
pub fn run_offline(config: &RunConfig) -> Result<OfflineOutput> {
    let start = Instant::now();
    let layout = Layout::new(&config.out);
    fs::create_dir_all(layout.snapshots())?;
    let disc = Arc::new(discretisation(config)?);
    let training = sample_training(config);
    let settings = SnapshotSettings { dt: config.dt, transient: config.transient(), newton: NewtonSettings::default() };
    let empty = SnapshotSet::for_discretisation(&disc)?;
    info!(
        "offline: {} training parameters, {} steps, {} monolithic DoFs",
        training.len(),
        config.steps(),
        disc.monolithic().num_state()
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", config.workers)))?;
    let results: Vec<(Result<SnapshotSet>, bool)> = pool.install(|| {
        training
            .par_iter()
            .enumerate()
            .map(|(k, &mu)| {
                let path = layout.snapshots().join(format!("param_{k:03}.bin"));
                let fp = snapshot_fingerprint(&disc, config, mu);
                if let Ok(set) = SnapshotSet::load(&path, &fp) {
                    info!("parameter {k}: reusing {}", path.display());
                    return (Ok(set), true);
                }
                let t = Instant::now();
                let run = collect_parameter(&disc, mu, &settings, &empty)
                    .and_then(|set| set.save(&path, &fp).map(|_| set))
                    .context(|| format!("training parameter {k} (Ū = {}, ν = {})", mu.u_bar, mu.nu));
                match &run {
                    Ok(_) => info!("parameter {k}: Ū = {:.4}, ν = {:.4} done in {:.1}s", mu.u_bar, mu.nu, t.elapsed().as_secs_f64()),
                    Err(e) => warn!("{e}"),
                }
                (run, false)
            })
            .collect()
    });

    let mut parts = vec![empty];
    let mut failed = Vec::new();
    let mut first_error = None;
    let mut reused = 0;
    for (k, (r, cached)) in results.into_iter().enumerate() {
        reused += cached as usize;
        match r {
            Ok(set) => parts.push(set),
            Err(e) => {
                failed.push(k);
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        if failed.len() as f64 > MAX_FAILED_FRACTION * training.len() as f64 {
            let n = training.len();
            return Err(e).context(|| format!("{} of {n} training parameters failed", failed.len()));
        }
    }
    let snapshots = SnapshotSet::merge(parts)?;
    let basis = ReducedBasis::build(&disc, &snapshots, config.modes, config.seed).context(|| "building reduced bases")?;
    save_basis(&basis, &layout.basis())?;

    let training_csv = layout.offline().join("training.csv");
    let mut w = csv::Writer::from_path(&training_csv).map_err(csv_error)?;
    w.write_record(["index", "u_bar", "nu", "status"]).map_err(csv_error)?;
    for (k, mu) in training.iter().enumerate() {
        let status = if failed.contains(&k) { "failed" } else { "ok" };
        w.write_record([k.to_string(), fmt(mu.u_bar), fmt(mu.nu), status.to_string()]).map_err(csv_error)?;
    }
    w.flush()?;

    let mut manifest = String::new();
    let _ = writeln!(manifest, "config {}", config.offline_key());
    let _ = writeln!(manifest, "fingerprint {}", disc.fingerprint());
    let _ = writeln!(manifest, "snapshots {}", snapshots.len());
    let _ = writeln!(manifest, "failed {}", failed.len());
    let mut files = vec![layout.basis(), manifest_path(&layout.basis()), training_csv];
    files.extend((0..training.len()).filter(|k| !failed.contains(k)).map(|k| layout.snapshots().join(format!("param_{k:03}.bin"))));
    for f in &files {
        let rel = f.strip_prefix(layout.offline()).unwrap_or(f);
        let _ = writeln!(manifest, "sha256 {} {}", sha256_file(f)?, rel.display());
    }
    let manifest_file = layout.offline().join("manifest.txt");
    fs::write(&manifest_file, manifest)?;
    let wall_time = start.elapsed().as_secs_f64();
    info!("offline stage finished in {wall_time:.1}s ({} snapshots, {} failed)", snapshots.len(), failed.len());
    Ok(OfflineOutput {
        basis: Arc::new(basis),
        discretisation: disc,
        training,
        snapshots,
        failed,
        reused,
        manifest: manifest_file,
        wall_time,
    })
}

/// Basis saved by [`run_offline`] for this configuration's mesh.
pub fn load_offline_basis(config: &RunConfig, disc: &Discretisation) -> Result<ReducedBasis> {
    let path = Layout::new(&config.out).basis();
    let basis = load_basis(&path, disc.fingerprint())?;
    let m = &config.modes;
    let sizes = [basis.subdomain(0).n_pod, basis.subdomain(1).n_pod, basis.subdomain(0).pressure.ncols(), basis.subdomain(1).pressure.ncols(), basis.control_dim()];
    if sizes != [m.u1, m.u2, m.p1, m.p2, m.g] {
        return Err(Error::Fingerprint {
            expected: format!("modes {}/{}/{}/{}/{}", m.u1, m.u2, m.p1, m.p2, m.g),
            found: format!("modes {}/{}/{}/{}/{}", sizes[0], sizes[1], sizes[2], sizes[3], sizes[4]),
        });
    }
    Ok(basis)
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Format(format!("csv: {other:?}")),
    }
}
