use crate::fem::InterfaceSpace;
use crate::linalg::{dense_solve, DenseMatrix};
use crate::{Error, Result};

use super::domain::{Discretisation, FlowDomain, Parameter, Restriction};
use super::newton::{AdjointSolution, StateSolution, StateSolver};

/// `J = ½ δᵀ M_Γ δ` for the interface traces of the two states.
pub fn compute_functional(space: &InterfaceSpace, trace1: &[f64], trace2: &[f64]) -> f64 {
    let d: Vec<f64> = trace1.iter().zip(trace2).map(|(a, b)| a - b).collect();
    0.5 * space.inner(&d, &d)
}

/// Gradient of the interface functional with respect to the control.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// L²(Γ₀) Riesz representative `ξ₁|Γ − ξ₂|Γ`.
    pub riesz: Vec<f64>,
    /// Coefficient-space derivative `M_Γ (ξ₁|Γ − ξ₂|Γ)`.
    pub raw: Vec<f64>,
}

pub fn compute_gradient(space: &InterfaceSpace, xi1_trace: &[f64], xi2_trace: &[f64]) -> Gradient {
    let riesz: Vec<f64> = xi1_trace.iter().zip(xi2_trace).map(|(a, b)| a - b).collect();
    let raw = space.mass().matvec(&riesz);
    Gradient { riesz, raw }
}

/// Velocity load `sign · Eᵀ M_Γ g` of an interface function on one domain.
pub fn interface_load(domain: &FlowDomain, space: &InterfaceSpace, sign: f64, g: &[f64]) -> Result<Vec<f64>> {
    if g.len() != space.dim() {
        return Err(Error::Dimension(format!("interface vector has length {} not {}", g.len(), space.dim())));
    }
    let mut load = vec![0.0; domain.num_velocity()];
    domain.trace()?.scatter_add(&space.mass().matvec(g), sign, &mut load);
    Ok(load)
}

fn check_nu(solver: &StateSolver, mu: Parameter) -> Result<()> {
    if solver.nu() != mu.nu {
        return Err(Error::Config(format!("solver built for ν={} but parameter has ν={}", solver.nu(), mu.nu)));
    }
    Ok(())
}

/// One implicit-Euler step of the monolithic problem.
pub fn monolithic_step(
    solver: &mut StateSolver,
    u_prev: &[f64],
    mu: Parameter,
    guess: Option<&[f64]>,
) -> Result<StateSolution> {
    check_nu(solver, mu)?;
    let dir = solver.domain().dirichlet(mu);
    solver.solve(Some(u_prev), None, &dir, guess)
}

/// One implicit-Euler step on subdomain `i` driven by the interface control `g`
/// with load sign +1 on Ω₁ and −1 on Ω₂.
pub fn subdomain_state_step(
    solver: &mut StateSolver,
    i: usize,
    space: &InterfaceSpace,
    g: &[f64],
    u_prev: &[f64],
    mu: Parameter,
    guess: Option<&[f64]>,
) -> Result<StateSolution> {
    check_nu(solver, mu)?;
    let domain = solver.domain().clone();
    let load = interface_load(&domain, space, Discretisation::sign(i), g)?;
    let dir = domain.dirichlet(mu);
    solver.solve(Some(u_prev), Some(&load), &dir, guess)
}

/// Adjoint on subdomain `i` for the interface mismatch `delta = u₁|Γ − u₂|Γ`.
pub fn subdomain_adjoint(
    solver: &mut StateSolver,
    i: usize,
    space: &InterfaceSpace,
    u_i: &[f64],
    delta: &[f64],
) -> Result<AdjointSolution> {
    let domain = solver.domain().clone();
    let rhs = interface_load(&domain, space, Discretisation::sign(i), delta)?;
    solver.adjoint(u_i, &rhs)
}

/// Interface control that reproduces a monolithic solution exactly: the
/// Ω₁ momentum residual of the restricted monolithic state on the free
/// interface rows, mapped back through `M_Γ` (zero on constrained trace DoFs).
pub fn monolithic_flux(
    solver1: &StateSolver,
    space: &InterfaceSpace,
    restriction: &Restriction,
    mono: &StateSolution,
    mono_u_prev: &[f64],
) -> Result<Vec<f64>> {
    let domain = solver1.domain();
    let mut x = restriction.velocity(&mono.u);
    x.extend(restriction.pressure(&mono.p));
    let u_prev = restriction.velocity(mono_u_prev);
    let r = solver1.residual(&x, Some(&u_prev), None);
    let trace = domain.trace()?;
    let free: Vec<usize> = (0..space.dim())
        .filter(|&k| !domain.pattern().is_constrained(trace.velocity_dofs()[k]))
        .collect();
    let m = space.mass();
    let sub = DenseMatrix::from_fn(free.len(), free.len(), |a, b| m[(free[a], free[b])]);
    let rhs: Vec<f64> = free.iter().map(|&k| r[trace.velocity_dofs()[k]]).collect();
    let sol = dense_solve(&sub, &rhs)?;
    let mut g = vec![0.0; space.dim()];
    for (&k, v) in free.iter().zip(sol) {
        g[k] = Discretisation::sign(0) * v;
    }
    Ok(g)
}
