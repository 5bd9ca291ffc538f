use std::sync::Arc;

use crate::solvers::{FlowDomain, NewtonSettings, StateSolver};
use crate::Result;

/// Unit lifting: steady Stokes flow with the unit inflow as Dirichlet datum,
/// so that `l(μ) = Ū · l_unit` matches the inflow of every parameter and is
/// discretely divergence-free. Zero on domains without an inflow.
pub fn unit_lifting(domain: &Arc<FlowDomain>) -> Result<Vec<f64>> {
    let data = domain.unit_dirichlet();
    if data.values().iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; domain.num_velocity()]);
    }
    let mut solver = StateSolver::new(domain.clone(), 1.0, None, false, NewtonSettings::default())?;
    Ok(solver.solve(None, None, data, None)?.u)
}
