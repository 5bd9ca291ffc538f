use std::sync::Arc;

use crate::linalg::{norm2, DenseMatrix};
use crate::rom::{ReducedBasis, ReducedSolver, ReducedState};
use crate::solvers::{
    compute_functional, subdomain_adjoint, subdomain_state_step, Discretisation, NewtonSettings, Parameter,
    StateSolution, StateSolver,
};
use crate::{Error, Result, ResultExt};

use super::mode::CouplingMode;

/// State of one subdomain in the model chosen by the coupling mode.
#[derive(Debug, Clone, PartialEq)]
pub enum SubState {
    Fem(StateSolution),
    Rom(ReducedState),
}

/// Full-order velocity and pressure of both subdomains.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedStates {
    pub u: [Vec<f64>; 2],
    pub p: [Vec<f64>; 2],
}

/// Result of one objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEvaluation {
    /// Objective minimised by the mode.
    pub j: f64,
    /// Gradient in optimisation coordinates.
    pub gradient: Vec<f64>,
    /// `½‖u₁ − u₂‖²` on Γ₀ of the (lifted) traces, without any projection.
    pub mismatch: f64,
    pub states: [SubState; 2],
    /// Full-order control `g`.
    pub control: Vec<f64>,
}

/// Per-time-step optimisation problem for one coupling mode.
///
/// Optimisation coordinates: for a full-order control, `z = Lᵀ g` with
/// `M_Γ = L Lᵀ`, so that the Euclidean geometry of `z` is the L²(Γ₀) geometry
/// of `g`; for a reduced control, the coefficients `c` of `g = Z_g c`, which
/// are already L²-orthonormal.
pub struct CouplingProblem {
    mode: CouplingMode,
    mu: Parameter,
    dt: f64,
    disc: Arc<Discretisation>,
    basis: Option<Arc<ReducedBasis>>,
    fem: [Option<StateSolver>; 2],
    prev: [SubState; 2],
    last: Option<[SubState; 2]>,
    evaluations: usize,
}

impl std::fmt::Debug for CouplingProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CouplingProblem").field("mode", &self.mode).field("mu", &self.mu).field("dt", &self.dt).finish()
    }
}

impl CouplingProblem {
    pub fn new(
        mode: CouplingMode,
        disc: Arc<Discretisation>,
        basis: Option<Arc<ReducedBasis>>,
        mu: Parameter,
        dt: f64,
        newton: NewtonSettings,
    ) -> Result<Self> {
        if mode.needs_basis() {
            let b = basis.as_ref().ok_or_else(|| {
                Error::MissingArtifact(format!("coupling {mode} needs a reduced basis; run the offline command first"))
            })?;
            if b.fingerprint != disc.fingerprint() {
                return Err(Error::Fingerprint { expected: disc.fingerprint().to_string(), found: b.fingerprint.clone() });
            }
        }
        let mut fem = [None, None];
        let mut prev = Vec::with_capacity(2);
        for (i, slot) in fem.iter_mut().enumerate() {
            if mode.reduced_state(i) {
                let ops = &basis.as_ref().expect("checked above").subdomain(i).reduced;
                prev.push(SubState::Rom(ReducedState::zeros(ops)));
            } else {
                let d = disc.subdomain(i).clone();
                prev.push(SubState::Fem(StateSolution::zeros(&d)));
                *slot = Some(StateSolver::new(d, mu.nu, Some(dt), true, newton)?);
            }
        }
        let prev = [prev.remove(0), prev.remove(0)];
        Ok(Self { mode, mu, dt, disc, basis, fem, prev, last: None, evaluations: 0 })
    }

    pub fn mode(&self) -> CouplingMode {
        self.mode
    }

    pub fn parameter(&self) -> Parameter {
        self.mu
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn discretisation(&self) -> &Arc<Discretisation> {
        &self.disc
    }

    pub fn basis(&self) -> Option<&Arc<ReducedBasis>> {
        self.basis.as_ref()
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Dimension of the optimisation variable.
    pub fn control_dim(&self) -> usize {
        if self.mode.reduced_control() {
            self.basis().expect("reduced control has a basis").control_dim()
        } else {
            self.disc.interface().dim()
        }
    }

    /// Full-order control of the optimisation variable `x`.
    pub fn control(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.control_dim() {
            return Err(Error::Dimension(format!("control has length {} not {}", x.len(), self.control_dim())));
        }
        Ok(if self.mode.reduced_control() {
            self.basis().expect("reduced control has a basis").control.matvec(x)
        } else {
            self.disc.interface().cholesky().solve_lt(x)
        })
    }

    /// Optimisation variable representing the full-order control `g` (exact for
    /// a full-order control, the L² projection for a reduced one).
    pub fn coordinates(&self, g: &[f64]) -> Result<Vec<f64>> {
        let space = self.disc.interface();
        if g.len() != space.dim() {
            return Err(Error::Dimension(format!("control has length {} not {}", g.len(), space.dim())));
        }
        Ok(if self.mode.reduced_control() {
            let z = &self.basis().expect("reduced control has a basis").control;
            z.matvec_transpose(&space.mass().matvec(g))
        } else {
            space.cholesky().mul_lt(g)
        })
    }

    /// States committed as the previous time level.
    pub fn previous(&self) -> &[SubState; 2] {
        &self.prev
    }

    /// Makes `states` the previous time level.
    pub fn commit(&mut self, states: [SubState; 2]) {
        self.prev = states;
    }

    fn reduced_basis(&self) -> &ReducedBasis {
        self.basis.as_deref().expect("reduced state has a basis")
    }

    fn reduced_solver(&self, i: usize) -> ReducedSolver<'_> {
        ReducedSolver::new(&self.reduced_basis().subdomain(i).reduced, self.mu.nu, Some(self.dt), true)
    }

    fn trace(&self, i: usize, s: &SubState) -> Result<Vec<f64>> {
        match s {
            SubState::Fem(st) => Ok(self.disc.subdomain(i).trace()?.extract(&st.u)),
            SubState::Rom(st) => Ok(self.reduced_basis().subdomain(i).reduced.trace.matvec(&st.extended())),
        }
    }

    /// Evaluates the objective and its gradient at the optimisation variable `x`.
    pub fn evaluate(&mut self, x: &[f64]) -> Result<ObjectiveEvaluation> {
        let g = self.control(x)?;
        let space = self.disc.interface().clone();
        let mut states = Vec::with_capacity(2);
        for i in 0..2 {
            let guess = self.last.as_ref().map(|l| &l[i]);
            let st = match &self.prev[i] {
                SubState::Fem(prev) => {
                    let guess = match guess {
                        Some(SubState::Fem(s)) => Some(s.stacked()),
                        _ => None,
                    };
                    let solver = self.fem[i].as_mut().expect("full-order solver");
                    SubState::Fem(
                        subdomain_state_step(solver, i, &space, &g, &prev.u, self.mu, guess.as_deref())
                            .context(|| format!("{} state on subdomain {}", self.mode, i + 1))?,
                    )
                }
                SubState::Rom(prev) => {
                    let guess = match guess {
                        Some(SubState::Rom(s)) => Some(s),
                        _ => None,
                    };
                    let ops = &self.reduced_basis().subdomain(i).reduced;
                    let load: Vec<f64> = ops.load.matvec(&g).iter().map(|v| Discretisation::sign(i) * v).collect();
                    SubState::Rom(
                        self.reduced_solver(i)
                            .solve(self.mu.u_bar, prev, &load, guess)
                            .context(|| format!("{} reduced state on subdomain {}", self.mode, i + 1))?,
                    )
                }
            };
            states.push(st);
        }
        let states = [states.remove(0), states.remove(0)];
        let t1 = self.trace(0, &states[0])?;
        let t2 = self.trace(1, &states[1])?;
        let delta: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| a - b).collect();
        let mismatch = compute_functional(&space, &t1, &t2);
        let m = space.mass();
        let (j, weight) = if self.mode == CouplingMode::Frr {
            // mismatch measured in the reduced control space
            let zg = &self.reduced_basis().control;
            let c = zg.matvec_transpose(&m.matvec(&delta));
            (0.5 * c.iter().map(|v| v * v).sum::<f64>(), zg.matvec(&c))
        } else {
            (mismatch, delta)
        };

        // adjoint traces α_i
        let mut alpha = Vec::with_capacity(2);
        for (i, st) in states.iter().enumerate() {
            let a = match st {
                SubState::Fem(s) => {
                    let solver = self.fem[i].as_mut().expect("full-order solver");
                    let adj = subdomain_adjoint(solver, i, &space, &s.u, &weight)
                        .context(|| format!("{} adjoint on subdomain {}", self.mode, i + 1))?;
                    self.disc.subdomain(i).trace()?.extract(&adj.xi)
                }
                SubState::Rom(s) => {
                    let ops = &self.reduced_basis().subdomain(i).reduced;
                    let rhs: Vec<f64> = ops.load.matvec(&weight).iter().map(|v| Discretisation::sign(i) * v).collect();
                    let adj = self.reduced_solver(i).adjoint(s, &rhs)?;
                    let ez = DenseMatrix::from_fn(ops.trace.nrows(), ops.nz, |r, c| ops.trace[(r, c + 1)]);
                    ez.matvec(&adj.xi)
                }
            };
            alpha.push(a);
        }
        let diff: Vec<f64> = alpha[0].iter().zip(&alpha[1]).map(|(a, b)| a - b).collect();
        let raw = m.matvec(&diff);
        let gradient = if self.mode.reduced_control() {
            self.reduced_basis().control.matvec_transpose(&raw)
        } else {
            space.cholesky().solve_l(&raw)
        };
        self.evaluations += 1;
        self.last = Some(states.clone());
        Ok(ObjectiveEvaluation { j, gradient, mismatch, states, control: g })
    }

    /// Full-order velocity and pressure of the given states.
    pub fn lift(&self, states: &[SubState; 2]) -> LiftedStates {
        let mut u = Vec::with_capacity(2);
        let mut p = Vec::with_capacity(2);
        for (i, s) in states.iter().enumerate() {
            match s {
                SubState::Fem(st) => {
                    u.push(st.u.clone());
                    p.push(st.p.clone());
                }
                SubState::Rom(st) => {
                    let b = self.reduced_basis().subdomain(i);
                    let mut v = b.velocity.matvec(&st.a);
                    v.iter_mut().zip(&b.lifting).for_each(|(a, l)| *a += st.u_bar * l);
                    u.push(v);
                    p.push(b.pressure.matvec(&st.p));
                }
            }
        }
        LiftedStates { u: [u.remove(0), u.remove(0)], p: [p.remove(0), p.remove(0)] }
    }

    /// Largest `‖B u‖∞` over full-order states (reduced ones report the
    /// reduced continuity residual).
    pub fn divergence(&self, states: &[SubState; 2]) -> f64 {
        states
            .iter()
            .enumerate()
            .map(|(i, s)| match s {
                SubState::Fem(st) => st.divergence,
                SubState::Rom(st) => {
                    let ops = &self.reduced_basis().subdomain(i).reduced;
                    crate::linalg::norm_inf(&ops.divergence.matvec(&st.extended()))
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Euclidean norm of a gradient in optimisation coordinates, i.e. the L²(Γ₀)
/// norm of its Riesz representative.
pub fn gradient_norm(g: &[f64]) -> f64 {
    norm2(g)
}
