use num_complex::Complex64;

use super::{gmres_preconditioned, GmresConfig, Jacobi, LinearOperator};
use crate::error::{Error, Result};

/// `A − σI` without materializing anything.
struct Shifted<'a, A: ?Sized> {
    a: &'a mut A,
    sigma: f64,
}

impl<A: LinearOperator + ?Sized> LinearOperator for Shifted<'_, A> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&mut self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        self.a.apply(x, y)?;
        if self.sigma != 0.0 {
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi -= self.sigma * xi;
            }
        }
        Ok(())
    }
}

/// Spectral transformation `(A − σI)⁻¹`, applied by Jacobi-preconditioned
/// GMRES. Eigenvalues map as `λ = σ + 1/θ`.
#[derive(Debug, Clone)]
pub struct ShiftInvert {
    sigma: f64,
    precond: Jacobi,
    gmres: GmresConfig,
    /// Number of inner solves performed.
    pub solves: usize,
    /// Total inner GMRES iterations.
    pub inner_iterations: usize,
    /// Largest final relative residual among the inner solves.
    pub worst_residual: f64,
}

impl ShiftInvert {
    /// `diagonal` is (an approximation of) the diagonal of `A`.
    pub fn new(sigma: f64, diagonal: &[f64], gmres: GmresConfig) -> Result<Self> {
        if !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("shift must be finite, got {sigma}")));
        }
        gmres.validate()?;
        let shifted: Vec<f64> = diagonal.iter().map(|d| d - sigma).collect();
        Ok(Self {
            sigma,
            precond: Jacobi::new(&shifted),
            gmres,
            solves: 0,
            inner_iterations: 0,
            worst_residual: 0.0,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn to_eigenvalue(&self, theta: Complex64) -> Complex64 {
        Complex64::new(self.sigma, 0.0) + theta.inv()
    }

    /// `y = (A − σI)⁻¹ x`.
    pub fn apply<A: LinearOperator + ?Sized>(
        &mut self,
        a: &mut A,
        x: &[Complex64],
        y: &mut [Complex64],
    ) -> Result<()> {
        let mut shifted = Shifted { a, sigma: self.sigma };
        let (sol, stats) = gmres_preconditioned(&mut shifted, &self.precond, x, None, &self.gmres)?;
        self.solves += 1;
        self.inner_iterations += stats.iterations;
        self.worst_residual = self.worst_residual.max(stats.relative_residual);
        if !stats.converged {
            log::warn!(
                "inner GMRES stopped at relative residual {:.3e} after {} iterations",
                stats.relative_residual,
                stats.iterations
            );
        }
        y.copy_from_slice(&sol);
        Ok(())
    }
}
