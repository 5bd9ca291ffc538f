use std::fs;
use std::path::{Path, PathBuf};

use crate::archive::Archive;
use crate::linalg::DenseMatrix;
use crate::solvers::{Discretisation, Parameter};
use crate::{Error, Result, ResultExt};

use super::pod::pod_basis;
use super::reduced::ReducedSubdomain;
use super::snapshots::SnapshotSet;
use super::supremizer::supremizer_enrich;

const MAGIC: [u8; 8] = *b"DDROMBAS";

/// Requested mode counts. Each subdomain also receives one supremizer per
/// pressure mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSizes {
    pub u1: usize,
    pub u2: usize,
    pub p1: usize,
    pub p2: usize,
    pub g: usize,
}

impl BasisSizes {
    pub fn velocity(&self, i: usize) -> usize {
        [self.u1, self.u2][i]
    }

    pub fn pressure(&self, i: usize) -> usize {
        [self.p1, self.p2][i]
    }
}

/// Bases and projected operators of one subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainBasis {
    /// `[POD modes | supremizers]`, orthonormal in H¹ (`M + K`).
    pub velocity: DenseMatrix,
    pub n_pod: usize,
    pub n_supremizer: usize,
    /// L²-orthonormal pressure modes.
    pub pressure: DenseMatrix,
    /// Unit lifting `l_unit` (zero without inflow).
    pub lifting: Vec<f64>,
    pub velocity_singular_values: Vec<f64>,
    pub pressure_singular_values: Vec<f64>,
    pub reduced: ReducedSubdomain,
}

/// Complete reduced-order model for the two-subdomain problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    pub fingerprint: String,
    pub subdomains: [SubdomainBasis; 2],
    /// L²(Γ₀)-orthonormal control modes.
    pub control: DenseMatrix,
    pub control_singular_values: Vec<f64>,
    pub seed: u64,
    pub training: Vec<Parameter>,
}

impl ReducedBasis {
    pub fn subdomain(&self, i: usize) -> &SubdomainBasis {
        &self.subdomains[i]
    }

    pub fn control_dim(&self) -> usize {
        self.control.ncols()
    }

    /// Builds all bases from a snapshot set.
    pub fn build(disc: &Discretisation, snapshots: &SnapshotSet, sizes: BasisSizes, seed: u64) -> Result<Self> {
        let space = disc.interface();
        let mut subs = Vec::with_capacity(2);
        for i in 0..2 {
            let domain = disc.subdomain(i);
            let x = domain.ops().h1_inner();
            let pu = pod_basis(&snapshots.velocity[i], sizes.velocity(i), &x)
                .context(|| format!("velocity POD on subdomain {}", i + 1))?;
            let pp = pod_basis(&snapshots.pressure[i], sizes.pressure(i), &domain.ops().pressure_mass)
                .context(|| format!("pressure POD on subdomain {}", i + 1))?;
            let (velocity, added) = supremizer_enrich(domain, &pp.modes, &pu.modes)?;
            let lifting = snapshots.lifting(i).to_vec();
            let reduced = ReducedSubdomain::build(domain, space, &velocity, &pp.modes, &lifting)?;
            subs.push(SubdomainBasis {
                velocity,
                n_pod: sizes.velocity(i),
                n_supremizer: added,
                pressure: pp.modes,
                lifting,
                velocity_singular_values: pu.singular_values,
                pressure_singular_values: pp.singular_values,
                reduced,
            });
        }
        let pg = pod_basis(&snapshots.control, sizes.g, space.mass()).context(|| "control POD")?;
        let s2 = subs.pop().expect("two subdomains");
        let s1 = subs.pop().expect("two subdomains");
        Ok(Self {
            fingerprint: disc.fingerprint().to_string(),
            subdomains: [s1, s2],
            control: pg.modes,
            control_singular_values: pg.singular_values,
            seed,
            training: snapshots.parameters.clone(),
        })
    }

    fn to_archive(&self) -> Archive {
        let mut a = Archive::new(MAGIC, self.fingerprint.clone());
        a.push_int("seed", self.seed);
        for (i, s) in self.subdomains.iter().enumerate() {
            let k = i + 1;
            a.push_int(&format!("u{k}.pod"), s.n_pod as u64);
            a.push_int(&format!("u{k}.supremizers"), s.n_supremizer as u64);
        }
        let training = DenseMatrix::from_fn(2, self.training.len(), |r, c| {
            if r == 0 {
                self.training[c].u_bar
            } else {
                self.training[c].nu
            }
        });
        a.push_matrix("training", training);
        for (i, s) in self.subdomains.iter().enumerate() {
            let k = i + 1;
            a.push_matrix(&format!("u{k}.modes"), s.velocity.clone());
            a.push_vector(&format!("u{k}.singular_values"), &s.velocity_singular_values);
            a.push_vector(&format!("u{k}.lifting"), &s.lifting);
            a.push_matrix(&format!("p{k}.modes"), s.pressure.clone());
            a.push_vector(&format!("p{k}.singular_values"), &s.pressure_singular_values);
            let r = &s.reduced;
            a.push_matrix(&format!("r{k}.mass"), r.mass.clone());
            a.push_matrix(&format!("r{k}.laplace"), r.laplace.clone());
            a.push_matrix(&format!("r{k}.divergence"), r.divergence.clone());
            a.push_vector(&format!("r{k}.tensor"), &r.tensor);
            a.push_matrix(&format!("r{k}.trace"), r.trace.clone());
            a.push_matrix(&format!("r{k}.load"), r.load.clone());
            a.push_vector(&format!("r{k}.forcing"), &r.forcing);
        }
        a.push_matrix("g.modes", self.control.clone());
        a.push_vector("g.singular_values", &self.control_singular_values);
        a
    }

    fn from_archive(a: &Archive) -> Result<Self> {
        let t = a.matrix("training")?;
        let training = (0..t.ncols()).map(|c| Parameter::new(t[(0, c)], t[(1, c)])).collect();
        let mut subs = Vec::with_capacity(2);
        for k in 1..=2 {
            let velocity = a.matrix(&format!("u{k}.modes"))?.clone();
            let pressure = a.matrix(&format!("p{k}.modes"))?.clone();
            let reduced = ReducedSubdomain {
                nz: velocity.ncols(),
                np: pressure.ncols(),
                mass: a.matrix(&format!("r{k}.mass"))?.clone(),
                laplace: a.matrix(&format!("r{k}.laplace"))?.clone(),
                divergence: a.matrix(&format!("r{k}.divergence"))?.clone(),
                tensor: a.vector(&format!("r{k}.tensor"))?,
                trace: a.matrix(&format!("r{k}.trace"))?.clone(),
                load: a.matrix(&format!("r{k}.load"))?.clone(),
                forcing: a.vector(&format!("r{k}.forcing"))?,
            };
            let nw = reduced.nz + 1;
            if reduced.tensor.len() != reduced.nz * nw * nw || reduced.mass.ncols() != nw {
                return Err(Error::Format(format!("reduced operators of subdomain {k} are inconsistent")));
            }
            subs.push(SubdomainBasis {
                velocity,
                n_pod: a.int(&format!("u{k}.pod"))? as usize,
                n_supremizer: a.int(&format!("u{k}.supremizers"))? as usize,
                pressure,
                lifting: a.vector(&format!("u{k}.lifting"))?,
                velocity_singular_values: a.vector(&format!("u{k}.singular_values"))?,
                pressure_singular_values: a.vector(&format!("p{k}.singular_values"))?,
                reduced,
            });
        }
        let s2 = subs.pop().expect("two subdomains");
        let s1 = subs.pop().expect("two subdomains");
        Ok(Self {
            fingerprint: a.fingerprint.clone(),
            subdomains: [s1, s2],
            control: a.matrix("g.modes")?.clone(),
            control_singular_values: a.vector("g.singular_values")?,
            seed: a.int("seed")?,
            training,
        })
    }

    /// Human-readable description of the container.
    pub fn manifest(&self) -> String {
        let a = self.to_archive();
        let mut s = String::new();
        s.push_str(&format!("format ddrom-basis {}\n", crate::archive::VERSION));
        s.push_str(&format!("fingerprint {}\n", self.fingerprint));
        s.push_str(&format!("payload_sha256 {}\n", a.checksum()));
        s.push_str(&format!("seed {}\n", self.seed));
        s.push_str(&format!("training_size {}\n", self.training.len()));
        for (i, b) in self.subdomains.iter().enumerate() {
            let k = i + 1;
            s.push_str(&format!(
                "field u{k} modes={} supremizers={} inner=H1 dofs={}\n",
                b.n_pod,
                b.n_supremizer,
                b.velocity.nrows()
            ));
        }
        for (i, b) in self.subdomains.iter().enumerate() {
            s.push_str(&format!("field p{} modes={} inner=L2 dofs={}\n", i + 1, b.pressure.ncols(), b.pressure.nrows()));
        }
        s.push_str(&format!("field g modes={} inner=L2(interface) dofs={}\n", self.control.ncols(), self.control.nrows()));
        s.push_str("order seed u1.pod u1.supremizers u2.pod u2.supremizers | training");
        for k in 1..=2 {
            s.push_str(&format!(
                " u{k}.modes u{k}.singular_values u{k}.lifting p{k}.modes p{k}.singular_values r{k}.mass r{k}.laplace r{k}.divergence r{k}.tensor r{k}.trace r{k}.load r{k}.forcing"
            ));
        }
        s.push_str(" g.modes g.singular_values\n");
        s
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".manifest");
    PathBuf::from(p)
}

/// Writes the basis container and its sidecar manifest.
pub fn save_basis(basis: &ReducedBasis, path: &Path) -> Result<()> {
    fs::write(path, basis.to_archive().to_bytes())?;
    fs::write(manifest_path(path), basis.manifest())?;
    Ok(())
}

/// Reads a basis container, refusing one built for a different mesh.
pub fn load_basis(path: &Path, expected_fingerprint: &str) -> Result<ReducedBasis> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(format!(
            "basis file {} not found; run the offline command first",
            path.display()
        )),
        _ => Error::Io(e),
    })?;
    let a = Archive::from_bytes(&bytes, MAGIC)?;
    if a.fingerprint != expected_fingerprint {
        return Err(Error::Fingerprint { expected: expected_fingerprint.to_string(), found: a.fingerprint });
    }
    ReducedBasis::from_archive(&a)
}
