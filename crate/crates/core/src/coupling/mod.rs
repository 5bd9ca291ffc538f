//! Per-time-step optimal-control coupling of the two subdomains.

mod check;
mod lbfgs;
mod mode;
mod problem;
mod transient;

pub use check::{gradient_check, GradientCheck};
pub use lbfgs::{lbfgs_minimize, LbfgsOutcome, LbfgsSettings, Termination};
pub use mode::CouplingMode;
pub use problem::{gradient_norm, CouplingProblem, LiftedStates, ObjectiveEvaluation, SubState};
pub use transient::{
    reference_errors, run_monolithic, run_transient, StepSolution, TimestepReport, TransientRun, TransientSettings,
};
