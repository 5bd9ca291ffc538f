use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{dot, norm2};
use crate::rom::ReducedBasis;
use crate::solvers::{Discretisation, NewtonSettings, Parameter};
use crate::Result;

use super::mode::CouplingMode;
use super::problem::CouplingProblem;

/// Adjoint directional derivative against a central finite difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub mode: CouplingMode,
    pub step: usize,
    pub j: f64,
    pub adjoint: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

/// Checks the gradient of `mode` on time step `step`. Earlier steps are
/// advanced with random controls; the check point and direction are random.
pub fn gradient_check(
    disc: &Arc<Discretisation>,
    basis: Option<Arc<ReducedBasis>>,
    mode: CouplingMode,
    mu: Parameter,
    dt: f64,
    step: usize,
    seed: u64,
) -> Result<GradientCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut problem = CouplingProblem::new(mode, disc.clone(), basis, mu, dt, NewtonSettings::default())?;
    let n = problem.control_dim();
    let random = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    for _ in 1..step {
        let x = random(&mut rng);
        let e = problem.evaluate(&x)?;
        problem.commit(e.states);
    }
    let x = random(&mut rng);
    let mut d = random(&mut rng);
    let dn = norm2(&d);
    d.iter_mut().for_each(|v| *v /= dn);
    let e = problem.evaluate(&x)?;
    let adjoint = dot(&e.gradient, &d);
    let eps = 1e-6 * norm2(&x).max(1.0);
    let shifted = |s: f64| -> Vec<f64> { x.iter().zip(&d).map(|(a, b)| a + s * b).collect() };
    let jp = problem.evaluate(&shifted(eps))?.j;
    let jm = problem.evaluate(&shifted(-eps))?.j;
    let fd = (jp - jm) / (2.0 * eps);
    let relative_error = (adjoint - fd).abs() / fd.abs().max(f64::MIN_POSITIVE);
    Ok(GradientCheck { mode, step, j: e.j, adjoint, finite_difference: fd, relative_error })
}
