use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddrom::coupling::CouplingMode;
use ddrom::pipeline::{run_compare, run_offline, run_online, run_validation, RunConfig};
use ddrom::Error;

/// Domain-decomposed Navier-Stokes with full-order and reduced subdomains.
#[derive(Debug, Parser)]
#[command(name = "ddrom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key = value configuration file (defaults to the desk preset).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Coupling mode: FFF, FRF, FRR or RRR.
    #[arg(long, global = true)]
    mode: Option<CouplingMode>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the training-set sampler.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample training parameters, collect snapshots and build the bases.
    Offline,
    /// Run one coupling mode at the test parameter against the monolithic reference.
    Online,
    /// Run all four coupling modes and plot the comparison.
    Compare,
    /// Run the pipeline and check every acceptance criterion.
    Validate,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::MissingArtifact(_) | Error::Fingerprint { .. } | Error::InvalidMesh(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

fn config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut c = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::desk(),
    };
    if let Some(m) = cli.mode {
        c.mode = m;
    }
    if let Some(o) = &cli.out {
        c.out = o.clone();
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(w) = cli.workers {
        c.workers = w;
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let c = config(cli)?;
    match cli.command {
        Command::Offline => {
            let o = run_offline(&c)?;
            println!(
                "offline: {} snapshots from {} parameters ({} failed, {} reused) in {:.1}s; manifest {}",
                o.snapshots.len(),
                o.training.len(),
                o.failed.len(),
                o.reused,
                o.wall_time,
                o.manifest.display()
            );
        }
        Command::Online => {
            let o = run_online(&c)?;
            println!("online {}: {} steps written to {}", c.mode, o.rows, o.metrics.display());
        }
        Command::Compare => {
            let o = run_compare(&c)?;
            println!("compare: {} rows written to {} in {:.1}s", o.rows, o.csv.display(), o.wall_time);
            for p in &o.plots {
                println!("plot: {}", p.display());
            }
            if let Some((m, e)) = o.failures.first() {
                eprintln!("error: {m} failed: {e}");
                return Ok(EXIT_SOLVER);
            }
        }
        Command::Validate => {
            let r = run_validation(&c)?;
            for criterion in &r.criteria {
                println!("{criterion}");
            }
            if !r.passed() {
                return Ok(EXIT_VALIDATION);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // usage errors are configuration errors, not clap's default exit status 2
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
