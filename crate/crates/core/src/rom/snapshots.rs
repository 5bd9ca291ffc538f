use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::archive::Archive;
use crate::coupling::{run_transient, CouplingMode, CouplingProblem, TransientSettings};
use crate::linalg::DenseMatrix;
use crate::solvers::{Discretisation, NewtonSettings, Parameter};
use crate::{Error, Result};

use super::lifting::unit_lifting;

/// Homogenised snapshot matrices with their `(parameter, step)` index.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub parameters: Vec<Parameter>,
    /// `u_i − Ū l_i` per subdomain, one column per `(μ, tₙ)`.
    pub velocity: [DenseMatrix; 2],
    pub pressure: [DenseMatrix; 2],
    pub control: DenseMatrix,
    /// Column `k` belongs to `(parameter index, step)`.
    pub index: Vec<(usize, usize)>,
    /// Functional value stored with each column.
    pub objective: Vec<f64>,
    lifting: [Vec<f64>; 2],
}

impl SnapshotSet {
    pub fn new(lifting: [Vec<f64>; 2], num_pressure: [usize; 2], num_control: usize) -> Self {
        Self {
            parameters: Vec::new(),
            velocity: [DenseMatrix::zeros(lifting[0].len(), 0), DenseMatrix::zeros(lifting[1].len(), 0)],
            pressure: [DenseMatrix::zeros(num_pressure[0], 0), DenseMatrix::zeros(num_pressure[1], 0)],
            control: DenseMatrix::zeros(num_control, 0),
            index: Vec::new(),
            objective: Vec::new(),
            lifting,
        }
    }

    pub fn lifting(&self, i: usize) -> &[f64] {
        &self.lifting[i]
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Registers a parameter and returns its index.
    pub fn add_parameter(&mut self, mu: Parameter) -> usize {
        self.parameters.push(mu);
        self.parameters.len() - 1
    }

    /// Appends one time step of a run at parameter `param`.
    pub fn push(
        &mut self,
        param: usize,
        step: usize,
        u: [&[f64]; 2],
        p: [&[f64]; 2],
        g: &[f64],
        objective: f64,
    ) -> Result<()> {
        let mu = *self
            .parameters
            .get(param)
            .ok_or_else(|| Error::Dimension(format!("unknown parameter index {param}")))?;
        for i in 0..2 {
            if u[i].len() != self.velocity[i].nrows() || p[i].len() != self.pressure[i].nrows() {
                return Err(Error::Dimension(format!("snapshot of subdomain {} has the wrong size", i + 1)));
            }
        }
        if g.len() != self.control.nrows() {
            return Err(Error::Dimension("control snapshot has the wrong size".into()));
        }
        for i in 0..2 {
            let h: Vec<f64> = u[i].iter().zip(&self.lifting[i]).map(|(a, l)| a - mu.u_bar * l).collect();
            self.velocity[i].push_column(&h);
            self.pressure[i].push_column(p[i]);
        }
        self.control.push_column(g);
        self.index.push((param, step));
        self.objective.push(objective);
        Ok(())
    }

    /// Column of `(param, step)`, if present.
    pub fn column(&self, param: usize, step: usize) -> Option<usize> {
        self.index.iter().position(|&k| k == (param, step))
    }

    /// Concatenates sets sharing the same liftings, renumbering parameters.
    pub fn merge(parts: Vec<SnapshotSet>) -> Result<SnapshotSet> {
        let mut it = parts.into_iter();
        let mut out = it.next().ok_or_else(|| Error::Config("no snapshot sets to merge".into()))?;
        for part in it {
            if part.lifting != out.lifting {
                return Err(Error::Dimension("snapshot sets use different liftings".into()));
            }
            let offset = out.parameters.len();
            out.parameters.extend(part.parameters);
            for i in 0..2 {
                for c in part.velocity[i].columns() {
                    out.velocity[i].push_column(c);
                }
                for c in part.pressure[i].columns() {
                    out.pressure[i].push_column(c);
                }
            }
            for c in part.control.columns() {
                out.control.push_column(c);
            }
            out.index.extend(part.index.into_iter().map(|(m, s)| (m + offset, s)));
            out.objective.extend(part.objective);
        }
        Ok(out)
    }

    /// True when every `(parameter, step)` pair appears exactly once.
    pub fn index_is_bijective(&self) -> bool {
        let mut seen = BTreeMap::new();
        self.index.iter().enumerate().all(|(c, k)| seen.insert(*k, c).is_none())
    }
}

const MAGIC: [u8; 8] = *b"DDROMSNP";

impl SnapshotSet {
    /// Empty set with the unit liftings of `disc`.
    pub fn for_discretisation(disc: &Discretisation) -> Result<Self> {
        let lifting = [unit_lifting(disc.subdomain(0))?, unit_lifting(disc.subdomain(1))?];
        Ok(Self::new(
            lifting,
            [disc.subdomain(0).num_pressure(), disc.subdomain(1).num_pressure()],
            disc.interface().dim(),
        ))
    }

    pub fn to_archive(&self, fingerprint: &str) -> Archive {
        let mut a = Archive::new(MAGIC, fingerprint);
        let params = DenseMatrix::from_fn(2, self.parameters.len(), |r, c| {
            if r == 0 {
                self.parameters[c].u_bar
            } else {
                self.parameters[c].nu
            }
        });
        a.push_matrix("parameters", params);
        let index = DenseMatrix::from_fn(2, self.index.len(), |r, c| {
            if r == 0 {
                self.index[c].0 as f64
            } else {
                self.index[c].1 as f64
            }
        });
        a.push_matrix("index", index);
        a.push_vector("objective", &self.objective);
        for i in 0..2 {
            a.push_vector(&format!("l{}", i + 1), &self.lifting[i]);
            a.push_matrix(&format!("u{}", i + 1), self.velocity[i].clone());
            a.push_matrix(&format!("p{}", i + 1), self.pressure[i].clone());
        }
        a.push_matrix("g", self.control.clone());
        a
    }

    pub fn from_archive(a: &Archive) -> Result<Self> {
        let params = a.matrix("parameters")?;
        let index = a.matrix("index")?;
        let set = Self {
            parameters: (0..params.ncols()).map(|c| Parameter::new(params[(0, c)], params[(1, c)])).collect(),
            velocity: [a.matrix("u1")?.clone(), a.matrix("u2")?.clone()],
            pressure: [a.matrix("p1")?.clone(), a.matrix("p2")?.clone()],
            control: a.matrix("g")?.clone(),
            index: (0..index.ncols()).map(|c| (index[(0, c)] as usize, index[(1, c)] as usize)).collect(),
            objective: a.vector("objective")?,
            lifting: [a.vector("l1")?, a.vector("l2")?],
        };
        let n = set.index.len();
        let consistent = set.objective.len() == n
            && set.control.ncols() == n
            && (0..2).all(|i| set.velocity[i].ncols() == n && set.pressure[i].ncols() == n)
            && set.index.iter().all(|&(m, _)| m < set.parameters.len());
        if !consistent {
            return Err(Error::Format("snapshot archive is inconsistent".into()));
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path, fingerprint: &str) -> Result<()> {
        fs::write(path, self.to_archive(fingerprint).to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path, fingerprint: &str) -> Result<Self> {
        let a = Archive::from_bytes(&fs::read(path)?, MAGIC)?;
        if a.fingerprint != fingerprint {
            return Err(Error::Fingerprint { expected: fingerprint.to_string(), found: a.fingerprint });
        }
        Self::from_archive(&a)
    }
}

/// Time grid and solver controls of the offline runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotSettings {
    pub dt: f64,
    pub transient: TransientSettings,
    pub newton: NewtonSettings,
}

/// Runs the full-order coupled optimisation at `mu` and records every step.
pub fn collect_parameter(disc: &Arc<Discretisation>, mu: Parameter, settings: &SnapshotSettings, empty: &SnapshotSet) -> Result<SnapshotSet> {
    let mut set = empty.clone();
    let param = set.add_parameter(mu);
    let mut problem = CouplingProblem::new(CouplingMode::Fff, disc.clone(), None, mu, settings.dt, settings.newton)?;
    let steps = run_transient(&mut problem, &settings.transient, |_| {}).into_result()?;
    for s in &steps {
        set.push(
            param,
            s.report.step,
            [&s.states.u[0], &s.states.u[1]],
            [&s.states.p[0], &s.states.p[1]],
            &s.control,
            s.report.j,
        )?;
    }
    Ok(set)
}

/// Snapshot set over a training set. Failed parameters are logged and
/// skipped; their count is returned alongside the set.
pub fn collect_snapshots(
    disc: &Arc<Discretisation>,
    training: &[Parameter],
    settings: &SnapshotSettings,
) -> Result<(SnapshotSet, usize)> {
    let empty = SnapshotSet::for_discretisation(disc)?;
    let mut parts = vec![empty.clone()];
    let mut failed = 0;
    for &mu in training {
        match collect_parameter(disc, mu, settings, &empty) {
            Ok(s) => parts.push(s),
            Err(e) => {
                log::warn!("snapshot run at Ū = {}, ν = {} failed: {e}", mu.u_bar, mu.nu);
                failed += 1;
            }
        }
    }
    Ok((SnapshotSet::merge(parts)?, failed))
}
