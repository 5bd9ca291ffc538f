//! Monolithic and subdomain state solves, adjoints, the interface functional
//! and its gradient.

mod domain;
mod functional;
mod newton;

pub use domain::{Discretisation, FlowDomain, Parameter, Restriction};
pub use functional::{
    compute_functional, compute_gradient, interface_load, monolithic_flux, monolithic_step, subdomain_adjoint,
    subdomain_state_step, Gradient,
};
pub use newton::{AdjointSolution, NewtonSettings, SolverStats, StateSolution, StateSolver};
