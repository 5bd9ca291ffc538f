use crate::linalg::SparseMatrix;
use crate::mesh::{BoundaryTag, DofMap};
use crate::{Error, Result};

/// Prescribed values on constrained DoFs (sorted, unique).
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletData {
    dofs: Vec<usize>,
    values: Vec<f64>,
}

/// Backward-facing-step inflow `(Ū · 4/9 (y − 2)(5 − y), 0)`.
pub fn step_inlet(u_bar: f64) -> impl Fn([f64; 2]) -> [f64; 2] {
    move |p| [u_bar * 4.0 / 9.0 * (p[1] - 2.0) * (5.0 - p[1]), 0.0]
}

/// Channel inflow `(4 U y (L − y) / L², 0)`.
pub fn channel_inlet(u_max: f64, ly: f64) -> impl Fn([f64; 2]) -> [f64; 2] {
    move |p| [4.0 * u_max * p[1] * (ly - p[1]) / (ly * ly), 0.0]
}

impl DirichletData {
    pub fn new(dofs: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dofs.len() != values.len() {
            return Err(Error::Dimension("Dirichlet dofs and values differ in length".into()));
        }
        if !dofs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("Dirichlet dofs must be sorted and unique".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite Dirichlet value".into()));
        }
        Ok(Self { dofs, values })
    }

    /// Zero on every wall and inlet DoF.
    pub fn homogeneous(dofmap: &DofMap) -> Self {
        let dofs = dofmap.dirichlet_dofs();
        let values = vec![0.0; dofs.len()];
        Self { dofs, values }
    }

    /// Inlet profile on inlet nodes, zero on walls. Nodes shared by an inlet
    /// and a wall edge take the wall value.
    pub fn with_inlet(dofmap: &DofMap, inlet: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let walls = dofmap.boundary_nodes(BoundaryTag::Wall);
        let mut d = Self::homogeneous(dofmap);
        for &n in dofmap.boundary_nodes(BoundaryTag::Inlet) {
            if walls.binary_search(&n).is_ok() {
                continue;
            }
            let v = inlet(dofmap.nodes()[n]);
            for c in 0..2 {
                let k = d.dofs.binary_search(&(2 * n + c)).expect("inlet node is Dirichlet");
                d.values[k] = v[c];
            }
        }
        d
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dofs: self.dofs.clone(), values: self.values.iter().map(|v| s * v).collect() }
    }

    /// Writes the prescribed values into `u`.
    pub fn impose(&self, u: &mut [f64]) {
        for (&d, &v) in self.dofs.iter().zip(&self.values) {
            u[d] = v;
        }
    }

    /// Zeroes the constrained entries of `u`.
    pub fn zero(&self, u: &mut [f64]) {
        for &d in &self.dofs {
            u[d] = 0.0;
        }
    }

    /// Dense vector with the prescribed values and zeros elsewhere.
    pub fn to_vector(&self, n: usize) -> Vec<f64> {
        let mut u = vec![0.0; n];
        self.impose(&mut u);
        u
    }
}

/// Symmetric elimination: the data is lifted into the right-hand side, then the
/// constrained rows and columns are replaced by identity rows and columns.
pub fn apply_dirichlet(a: &SparseMatrix, rhs: &mut [f64], data: &DirichletData) -> Result<SparseMatrix> {
    let n = a.nrows();
    if a.ncols() != n || rhs.len() != n {
        return Err(Error::Dimension("apply_dirichlet needs a square system matching the rhs".into()));
    }
    if let Some(&bad) = data.dofs().iter().find(|&&d| d >= n) {
        return Err(Error::Dimension(format!("Dirichlet dof {bad} outside system of order {n}")));
    }
    let mut fixed = vec![None; n];
    for (&d, &v) in data.dofs().iter().zip(data.values()) {
        fixed[d] = Some(v);
    }
    let mut trip = Vec::with_capacity(a.nnz());
    for r in 0..n {
        if fixed[r].is_some() {
            continue;
        }
        for (c, v) in a.row(r) {
            match fixed[c] {
                Some(g) => rhs[r] -= v * g,
                None => trip.push((r, c, v)),
            }
        }
    }
    for (&d, &v) in data.dofs().iter().zip(data.values()) {
        trip.push((d, d, 1.0));
        rhs[d] = v;
    }
    Ok(SparseMatrix::from_triplets(n, n, &trip))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::lu_solve;
    use crate::mesh::{generate_bfs_mesh, generate_rect_mesh};

    #[test]
    fn inlet_profile_on_step_inlet() {
        let mesh = generate_bfs_mesh(0.5, 9.0).unwrap();
        let d = DofMap::new(&mesh);
        let data = DirichletData::with_inlet(&d, step_inlet(2.0));
        let u = data.to_vector(d.num_velocity());
        let mid = d.nodes().iter().position(|p| p == &[0.0, 3.5]).unwrap();
        assert!((u[2 * mid] - 2.0).abs() < 1e-15);
        let corner = d.nodes().iter().position(|p| p == &[0.0, 5.0]).unwrap();
        assert_eq!(u[2 * corner], 0.0);
    }

    #[test]
    fn elimination_is_symmetric_and_exact() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 2.0)],
        );
        let mut rhs = vec![1.0, 2.0, 3.0];
        let data = DirichletData::new(vec![2], vec![5.0]).unwrap();
        let a2 = apply_dirichlet(&a, &mut rhs, &data).unwrap();
        assert!(a2.is_symmetric(0.0));
        let x = lu_solve(&a2, &rhs).unwrap();
        assert_eq!(x[2], 5.0);
        // remaining rows satisfy the original equations
        let ax = a.matvec(&x);
        assert!((ax[0] - 1.0).abs() < 1e-12 && (ax[1] - 2.0).abs() < 1e-12);
        let bad = DirichletData::new(vec![7], vec![0.0]).unwrap();
        assert!(apply_dirichlet(&a, &mut rhs, &bad).is_err());
    }

    #[test]
    fn rectangle_walls_and_inlet() {
        let mesh = generate_rect_mesh(2.0, 1.0, 0.5).unwrap();
        let d = DofMap::new(&mesh);
        let data = DirichletData::with_inlet(&d, channel_inlet(1.0, 1.0));
        let u = data.to_vector(d.num_velocity());
        let n = d.nodes().iter().position(|p| p == &[0.0, 0.5]).unwrap();
        assert!((u[2 * n] - 1.0).abs() < 1e-15);
        assert!(data.dofs().iter().all(|&k| d.is_dirichlet_node(k / 2)));
    }
}
