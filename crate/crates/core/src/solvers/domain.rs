use std::collections::BTreeMap;
use std::sync::Arc;

use crate::fem::{
    assemble_constant_ops, step_inlet, AssembledOperators, ConvectionAssembler, DirichletData, InterfaceSpace,
    SaddlePattern, TraceMap,
};
use crate::mesh::{decompose, generate_bfs_mesh, DofMap, Mesh};
use crate::{Error, Result};

/// Physical parameter μ = (Ū, ν).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameter {
    pub u_bar: f64,
    pub nu: f64,
}

impl Parameter {
    pub fn new(u_bar: f64, nu: f64) -> Self {
        Self { u_bar, nu }
    }
}

/// One flow domain (monolithic or a subdomain) with its discretisation.
#[derive(Debug)]
pub struct FlowDomain {
    mesh: Mesh,
    dofmap: DofMap,
    ops: AssembledOperators,
    convection: ConvectionAssembler,
    pattern: SaddlePattern,
    trace: Option<TraceMap>,
    unit_dirichlet: DirichletData,
    forcing: Vec<f64>,
}

impl FlowDomain {
    /// `unit_inlet` is the inflow profile for a unit parameter scale; wall
    /// DoFs are homogeneous.
    pub fn new(
        mesh: Mesh,
        dofmap: DofMap,
        unit_inlet: impl Fn([f64; 2]) -> [f64; 2],
        interface: Option<&InterfaceSpace>,
    ) -> Result<Self> {
        let ops = assemble_constant_ops(&dofmap, 1.0)?;
        let convection = ConvectionAssembler::new(&dofmap);
        let pattern = SaddlePattern::new(&dofmap, &dofmap.dirichlet_dofs())?;
        let trace = interface.map(|s| TraceMap::new(&dofmap, s)).transpose()?;
        let unit_dirichlet = DirichletData::with_inlet(&dofmap, unit_inlet);
        let forcing = vec![0.0; dofmap.num_velocity()];
        Ok(Self { mesh, dofmap, ops, convection, pattern, trace, unit_dirichlet, forcing })
    }

    /// Replaces the body-force load vector `(f, v)`.
    pub fn set_forcing(&mut self, forcing: Vec<f64>) -> Result<()> {
        if forcing.len() != self.dofmap.num_velocity() {
            return Err(Error::Dimension("forcing length differs from the velocity space".into()));
        }
        self.forcing = forcing;
        Ok(())
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    /// Operators assembled with ν = 1 (`stiffness == laplace`).
    pub fn ops(&self) -> &AssembledOperators {
        &self.ops
    }

    pub fn convection(&self) -> &ConvectionAssembler {
        &self.convection
    }

    pub fn pattern(&self) -> &SaddlePattern {
        &self.pattern
    }

    pub fn trace(&self) -> Result<&TraceMap> {
        self.trace.as_ref().ok_or_else(|| Error::Config("domain has no interface trace".into()))
    }

    pub fn forcing(&self) -> &[f64] {
        &self.forcing
    }

    pub fn num_velocity(&self) -> usize {
        self.dofmap.num_velocity()
    }

    pub fn num_pressure(&self) -> usize {
        self.dofmap.num_pressure()
    }

    pub fn num_state(&self) -> usize {
        self.dofmap.num_state()
    }

    pub fn unit_dirichlet(&self) -> &DirichletData {
        &self.unit_dirichlet
    }

    pub fn dirichlet(&self, mu: Parameter) -> DirichletData {
        self.unit_dirichlet.scaled(mu.u_bar)
    }

    /// Discrete divergence `‖B u‖∞`.
    pub fn divergence_norm(&self, u: &[f64]) -> f64 {
        crate::linalg::norm_inf(&self.ops.divergence.matvec(u))
    }

    /// L² norm of a velocity field.
    pub fn velocity_l2(&self, u: &[f64]) -> f64 {
        self.ops.mass.bilinear(u, u).max(0.0).sqrt()
    }

    /// L² norm of a pressure field.
    pub fn pressure_l2(&self, p: &[f64]) -> f64 {
        self.ops.pressure_mass.bilinear(p, p).max(0.0).sqrt()
    }
}

/// Index maps from a subdomain's velocity and pressure DoFs into the
/// monolithic ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    velocity: Vec<usize>,
    pressure: Vec<usize>,
}

impl Restriction {
    /// `side` is -1 for the subdomain left of the split line and +1 for the right one.
    pub fn new(sub: &DofMap, mono: &DofMap, side: i8) -> Result<Self> {
        let mut velocity = Vec::with_capacity(sub.num_velocity());
        for (k, key) in sub.node_keys().iter().enumerate() {
            let n = mono
                .node_of_key(*key)
                .ok_or_else(|| Error::InvalidMesh(format!("subdomain node {k} missing in monolithic mesh")))?;
            velocity.extend([2 * n, 2 * n + 1]);
        }
        let slots: BTreeMap<([i64; 2], i8), usize> = mono
            .pressure_keys()
            .iter()
            .zip(mono.pressure_side())
            .enumerate()
            .map(|(k, (&key, &s))| ((key, s), k))
            .collect();
        let mut pressure = Vec::with_capacity(sub.num_pressure());
        for key in sub.pressure_keys() {
            let k = slots
                .get(&(*key, side))
                .or_else(|| slots.get(&(*key, 0)))
                .ok_or_else(|| Error::InvalidMesh(format!("pressure node {key:?} missing in monolithic mesh")))?;
            pressure.push(*k);
        }
        Ok(Self { velocity, pressure })
    }

    pub fn velocity(&self, u: &[f64]) -> Vec<f64> {
        self.velocity.iter().map(|&k| u[k]).collect()
    }

    pub fn pressure(&self, p: &[f64]) -> Vec<f64> {
        self.pressure.iter().map(|&k| p[k]).collect()
    }

    pub fn velocity_map(&self) -> &[usize] {
        &self.velocity
    }

    pub fn pressure_map(&self) -> &[usize] {
        &self.pressure
    }
}

/// Backward-facing-step discretisation: the two subdomains, the interface
/// trace space and the monolithic reference on the same mesh.
#[derive(Debug)]
pub struct Discretisation {
    h: f64,
    x_gamma: f64,
    subdomains: [Arc<FlowDomain>; 2],
    monolithic: Arc<FlowDomain>,
    interface: Arc<InterfaceSpace>,
    restrictions: [Restriction; 2],
    split_pressure: bool,
    fingerprint: String,
}

impl Discretisation {
    /// With `split_pressure` the monolithic pressure carries one DoF per side on
    /// the interface line, which makes the decomposed problem an exact
    /// reformulation of the monolithic one.
    pub fn backward_facing_step(h: f64, x_gamma: f64, split_pressure: bool) -> Result<Self> {
        let mesh = generate_bfs_mesh(h, x_gamma)?;
        let (m1, m2, iface) = decompose(&mesh, x_gamma)?;
        let interface = Arc::new(InterfaceSpace::new(&iface)?);
        let mono_dofs = if split_pressure {
            DofMap::with_pressure_split(&mesh, x_gamma)
        } else {
            DofMap::new(&mesh)
        };
        let d1 = DofMap::new(&m1);
        let d2 = DofMap::new(&m2);
        let restrictions = [Restriction::new(&d1, &mono_dofs, -1)?, Restriction::new(&d2, &mono_dofs, 1)?];
        let fingerprint = mesh.fingerprint();
        let unit = step_inlet(1.0);
        let monolithic = Arc::new(FlowDomain::new(mesh, mono_dofs, &unit, Some(&interface))?);
        let s1 = Arc::new(FlowDomain::new(m1, d1, &unit, Some(&interface))?);
        let s2 = Arc::new(FlowDomain::new(m2, d2, &unit, Some(&interface))?);
        Ok(Self {
            h,
            x_gamma,
            subdomains: [s1, s2],
            monolithic,
            interface,
            restrictions,
            split_pressure,
            fingerprint,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x_gamma(&self) -> f64 {
        self.x_gamma
    }

    /// Subdomain `i ∈ {0, 1}` (Ω₁, Ω₂).
    pub fn subdomain(&self, i: usize) -> &Arc<FlowDomain> {
        &self.subdomains[i]
    }

    pub fn monolithic(&self) -> &Arc<FlowDomain> {
        &self.monolithic
    }

    pub fn interface(&self) -> &Arc<InterfaceSpace> {
        &self.interface
    }

    pub fn restriction(&self, i: usize) -> &Restriction {
        &self.restrictions[i]
    }

    pub fn split_pressure(&self) -> bool {
        self.split_pressure
    }

    /// Content hash of the monolithic mesh.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Interface load sign: +1 on Ω₁, −1 on Ω₂.
    pub fn sign(i: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            -1.0
        }
    }
}
