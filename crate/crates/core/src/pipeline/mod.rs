//! Offline, online, comparison and validation stages driven by a
//! [`RunConfig`].

mod compare;
mod config;
mod offline;
mod online;
mod plot;
mod validate;

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub use compare::{run_compare, CompareOutput, COMPARE_HEADER};
pub use config::RunConfig;
pub use offline::{load_offline_basis, run_offline, sample_training, OfflineOutput};
pub use online::{run_online, OnlineOutput, METRICS_HEADER};
pub use plot::{plot_compare, PLOT_FILES};
pub use validate::{run_validation, Criterion, ValidationReport};

use crate::solvers::Discretisation;
use crate::Result;

/// Output directory layout below `config.out`.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn offline(&self) -> PathBuf {
        self.root.join("offline")
    }

    pub fn snapshots(&self) -> PathBuf {
        self.offline().join("snapshots")
    }

    pub fn basis(&self) -> PathBuf {
        self.offline().join("basis.bin")
    }

    pub fn online(&self, mode: &str) -> PathBuf {
        self.root.join("online").join(mode)
    }

    pub fn compare(&self) -> PathBuf {
        self.root.join("compare")
    }
}

pub fn discretisation(config: &RunConfig) -> Result<Discretisation> {
    Discretisation::backward_facing_step(config.h, config.x_gamma, true)
}

pub(crate) fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Float formatting shared by every CSV so reruns are byte-identical.
pub(crate) fn fmt(v: f64) -> String {
    format!("{v:e}")
}
