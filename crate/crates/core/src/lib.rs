pub mod archive;
pub mod coupling;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod pipeline;
pub mod rom;
pub mod solvers;

pub use error::{Error, Result, ResultExt};
