//! Projection and lifting operators between full-order and reduced spaces.
//!
//! For subdomain `i` with H¹-orthonormal velocity modes `Z` and unit lifting
//! `l`:
//! - `Π(μ) u = Zᵀ X (u − Ū l)` and `Π(μ)ᵀ a = Ū l + Z a`;
//! - `Π₀ u = Zᵀ X u` and `Π₀ᵀ a = Z a`.
//!
//! For the control with `M_Γ`-orthonormal modes `Z_g`:
//! `Π_X g = Z_gᵀ M_Γ g` and `Π_Xᵀ c = Z_g c`.

use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::solvers::Parameter;
use crate::{Error, Result};

use super::basis::SubdomainBasis;

fn check(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension(format!("{what}: expected length {expected}, found {found}")));
    }
    Ok(())
}

/// Velocity projection of one subdomain.
#[derive(Debug, Clone, Copy)]
pub struct VelocityProjection<'a> {
    pub modes: &'a DenseMatrix,
    pub lifting: &'a [f64],
    /// Velocity inner-product matrix `X = M + K`.
    pub inner: &'a SparseMatrix,
}

impl<'a> VelocityProjection<'a> {
    pub fn new(basis: &'a SubdomainBasis, inner: &'a SparseMatrix) -> Self {
        Self { modes: &basis.velocity, lifting: &basis.lifting, inner }
    }

    pub fn pi0(&self, u: &[f64]) -> Result<Vec<f64>> {
        check("Π₀ argument", self.modes.nrows(), u.len())?;
        Ok(self.modes.matvec_transpose(&self.inner.matvec(u)))
    }

    pub fn pi0_t(&self, a: &[f64]) -> Result<Vec<f64>> {
        check("Π₀ᵀ argument", self.modes.ncols(), a.len())?;
        Ok(self.modes.matvec(a))
    }

    pub fn pi(&self, mu: Parameter, u: &[f64]) -> Result<Vec<f64>> {
        check("Π argument", self.modes.nrows(), u.len())?;
        let h: Vec<f64> = u.iter().zip(self.lifting).map(|(a, l)| a - mu.u_bar * l).collect();
        self.pi0(&h)
    }

    pub fn pi_t(&self, mu: Parameter, a: &[f64]) -> Result<Vec<f64>> {
        let mut u = self.pi0_t(a)?;
        u.iter_mut().zip(self.lifting).for_each(|(v, l)| *v += mu.u_bar * l);
        Ok(u)
    }
}

/// Control projection onto the reduced interface space.
#[derive(Debug, Clone, Copy)]
pub struct ControlProjection<'a> {
    pub modes: &'a DenseMatrix,
    pub mass: &'a DenseMatrix,
}

impl<'a> ControlProjection<'a> {
    pub fn new(modes: &'a DenseMatrix, mass: &'a DenseMatrix) -> Self {
        Self { modes, mass }
    }

    pub fn pi_x(&self, g: &[f64]) -> Result<Vec<f64>> {
        check("Π_X argument", self.modes.nrows(), g.len())?;
        Ok(self.modes.matvec_transpose(&self.mass.matvec(g)))
    }

    pub fn pi_x_t(&self, c: &[f64]) -> Result<Vec<f64>> {
        check("Π_Xᵀ argument", self.modes.ncols(), c.len())?;
        Ok(self.modes.matvec(c))
    }
}
