use crate::fem::InterfaceSpace;
use crate::linalg::{norm_inf, DenseLu, DenseMatrix};
use crate::solvers::FlowDomain;
use crate::{Error, Result};

/// Galerkin-projected operators of one subdomain.
///
/// The trial basis is extended by the unit lifting, `W = [l | Z]`, so a reduced
/// velocity `Ū l + Z a` has extended coefficients `ã = [Ū, a]`; test functions
/// are the columns of `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSubdomain {
    pub nz: usize,
    pub np: usize,
    /// `Zᵀ M W`.
    pub mass: DenseMatrix,
    /// `Zᵀ K W` (viscosity not included).
    pub laplace: DenseMatrix,
    /// `Z_pᵀ B W`.
    pub divergence: DenseMatrix,
    /// `T[k][i][j] = c(W_i, W_j, Z_k)`, flat with `j` fastest.
    pub tensor: Vec<f64>,
    /// Interface trace of the extended basis, `E W`.
    pub trace: DenseMatrix,
    /// `(E Z)ᵀ M_Γ`: load of a trace-space function on the test basis.
    pub load: DenseMatrix,
    /// `Zᵀ f`.
    pub forcing: Vec<f64>,
}

impl ReducedSubdomain {
    pub fn build(
        domain: &FlowDomain,
        space: &InterfaceSpace,
        velocity: &DenseMatrix,
        pressure: &DenseMatrix,
        lifting: &[f64],
    ) -> Result<Self> {
        let nu = domain.num_velocity();
        if velocity.nrows() != nu || lifting.len() != nu || pressure.nrows() != domain.num_pressure() {
            return Err(Error::Dimension("basis does not match the subdomain spaces".into()));
        }
        let mut w = DenseMatrix::from_columns(nu, &[lifting.to_vec()]);
        for c in velocity.columns() {
            w.push_column(c);
        }
        let ops = domain.ops();
        let project = |m: &crate::linalg::SparseMatrix, test: &DenseMatrix| {
            let mw: Vec<Vec<f64>> = w.columns().map(|c| m.matvec(c)).collect();
            DenseMatrix::from_fn(test.ncols(), w.ncols(), |k, j| crate::linalg::dot(test.col(k), &mw[j]))
        };
        let trace_map = domain.trace()?;
        let trace = DenseMatrix::from_fn(space.dim(), w.ncols(), |r, j| w.col(j)[trace_map.velocity_dofs()[r]]);
        let ez = DenseMatrix::from_fn(space.dim(), velocity.ncols(), |r, j| velocity.col(j)[trace_map.velocity_dofs()[r]]);
        let load = ez.transpose_matmul(space.mass());
        Ok(Self {
            nz: velocity.ncols(),
            np: pressure.ncols(),
            mass: project(&ops.mass, velocity),
            laplace: project(&ops.laplace, velocity),
            divergence: project(&ops.divergence, pressure),
            tensor: domain.convection().reduced_tensor(&w, velocity),
            trace,
            load,
            forcing: velocity.matvec_transpose(domain.forcing()),
        })
    }

    pub fn dim(&self) -> usize {
        self.nz + self.np
    }
}

/// Reduced velocity/pressure coefficients with the lifting scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub u_bar: f64,
    pub a: Vec<f64>,
    pub p: Vec<f64>,
    pub iterations: usize,
}

impl ReducedState {
    pub fn zeros(ops: &ReducedSubdomain) -> Self {
        Self { u_bar: 0.0, a: vec![0.0; ops.nz], p: vec![0.0; ops.np], iterations: 0 }
    }

    /// Extended coefficients `[Ū, a]`.
    pub fn extended(&self) -> Vec<f64> {
        let mut e = Vec::with_capacity(self.a.len() + 1);
        e.push(self.u_bar);
        e.extend_from_slice(&self.a);
        e
    }
}

/// Reduced adjoint coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedAdjoint {
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Dense Newton solver for the reduced state equations.
#[derive(Debug, Clone)]
pub struct ReducedSolver<'a> {
    ops: &'a ReducedSubdomain,
    nu: f64,
    alpha: f64,
    convective: bool,
    pub max_iterations: usize,
    pub atol: f64,
}

impl<'a> ReducedSolver<'a> {
    pub fn new(ops: &'a ReducedSubdomain, nu: f64, dt: Option<f64>, convective: bool) -> Self {
        Self { ops, nu, alpha: dt.map_or(0.0, |d| 1.0 / d), convective, max_iterations: 50, atol: 1e-13 }
    }

    pub fn ops(&self) -> &ReducedSubdomain {
        self.ops
    }

    /// Residual of the reduced momentum (`nz` rows) and continuity (`np` rows).
    pub fn residual(&self, ext: &[f64], p: &[f64], prev: &[f64], load: &[f64]) -> Vec<f64> {
        let o = self.ops;
        let nw = o.nz + 1;
        let mut r = vec![0.0; o.nz + o.np];
        for k in 0..o.nz {
            let mut s = -o.forcing[k] - load[k];
            for j in 0..nw {
                s += self.alpha * o.mass[(k, j)] * (ext[j] - prev[j]) + self.nu * o.laplace[(k, j)] * ext[j];
            }
            if self.convective {
                let t = &o.tensor[k * nw * nw..(k + 1) * nw * nw];
                for i in 0..nw {
                    let ti = &t[i * nw..(i + 1) * nw];
                    s += ext[i] * ti.iter().zip(ext).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            for q in 0..o.np {
                s += o.divergence[(q, k + 1)] * p[q];
            }
            r[k] = s;
        }
        for q in 0..o.np {
            r[o.nz + q] = (0..nw).map(|j| o.divergence[(q, j)] * ext[j]).sum();
        }
        r
    }

    /// Jacobian with respect to `(a, p)`.
    pub fn jacobian(&self, ext: &[f64]) -> DenseMatrix {
        let o = self.ops;
        let nw = o.nz + 1;
        let n = o.nz + o.np;
        let mut j = DenseMatrix::zeros(n, n);
        for k in 0..o.nz {
            let t = &o.tensor[k * nw * nw..(k + 1) * nw * nw];
            for m in 0..o.nz {
                let mut v = self.alpha * o.mass[(k, m + 1)] + self.nu * o.laplace[(k, m + 1)];
                if self.convective {
                    for l in 0..nw {
                        v += (t[(m + 1) * nw + l] + t[l * nw + m + 1]) * ext[l];
                    }
                }
                j.col_mut(m)[k] = v;
            }
            for q in 0..o.np {
                j.col_mut(o.nz + q)[k] = o.divergence[(q, k + 1)];
            }
        }
        for q in 0..o.np {
            for m in 0..o.nz {
                j.col_mut(m)[o.nz + q] = o.divergence[(q, m + 1)];
            }
        }
        j
    }

    /// Solves for the state at lifting scale `u_bar`; `load` is the reduced
    /// interface load on the test basis.
    pub fn solve(&self, u_bar: f64, prev: &ReducedState, load: &[f64], guess: Option<&ReducedState>) -> Result<ReducedState> {
        let o = self.ops;
        let mut st = guess.cloned().unwrap_or_else(|| ReducedState::zeros(o));
        st.u_bar = u_bar;
        let prev_ext = prev.extended();
        let mut history = Vec::new();
        for it in 0..=self.max_iterations {
            let ext = st.extended();
            let r = self.residual(&ext, &st.p, &prev_ext, load);
            let rn = norm_inf(&r);
            history.push(rn);
            let scale = norm_inf(&ext).max(1.0) * 1e3 * f64::EPSILON * (o.mass.max_abs() * self.alpha + o.laplace.max_abs() * self.nu + 1.0);
            if rn <= self.atol.max(scale) {
                st.iterations = it;
                return Ok(st);
            }
            if it == self.max_iterations {
                break;
            }
            let dx = DenseLu::factor(&self.jacobian(&ext))?.solve(&r);
            for k in 0..o.nz {
                st.a[k] -= dx[k];
            }
            for q in 0..o.np {
                st.p[q] -= dx[o.nz + q];
            }
        }
        Err(Error::NonConvergence { what: "reduced Newton".into(), iterations: self.max_iterations, history })
    }

    /// Reduced adjoint: `J(ã)ᵀ [ξ; λ] = [rhs; 0]`.
    pub fn adjoint(&self, state: &ReducedState, rhs: &[f64]) -> Result<ReducedAdjoint> {
        let o = self.ops;
        let mut b = rhs.to_vec();
        b.resize(o.nz + o.np, 0.0);
        let j = self.jacobian(&state.extended());
        let lu = DenseLu::factor(&j)?;
        let mut y = lu.solve_transpose(&b);
        // one refinement step
        let r: Vec<f64> = b.iter().zip(j.matvec_transpose(&y)).map(|(a, c)| a - c).collect();
        let dy = lu.solve_transpose(&r);
        y.iter_mut().zip(dy).for_each(|(a, d)| *a += d);
        let lambda = y.split_off(o.nz);
        Ok(ReducedAdjoint { xi: y, lambda })
    }
}
