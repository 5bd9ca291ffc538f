use thiserror::Error;

/// Errors raised across mesh generation, assembly, solvers and the ROM pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh request: {0}")]
    InvalidMesh(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{what} did not converge after {iterations} iterations (residual history {history:?})")]
    NonConvergence {
        what: String,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("requested {requested} modes but the snapshot set has numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("basis fingerprint mismatch: file was built for {found}, current setup is {expected}")]
    Fingerprint { expected: String, found: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub trait ResultExt<T> {
    fn context<C: Into<String>>(self, context: impl FnOnce() -> C) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context<C: Into<String>>(self, context: impl FnOnce() -> C) -> Result<T> {
        self.map_err(|source| Error::Context {
            context: context().into(),
            source: Box::new(source),
        })
    }
}
