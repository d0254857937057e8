//! Krylov solvers: restarted GMRES, block Krylov–Schur Arnoldi with
//! locking, shift-invert spectral transformation, and the dense complex
//! Hessenberg/QR kernels used for Ritz extraction.

mod arnoldi;
mod dense;
mod gmres;
mod kernels;
mod schur;
mod shift_invert;

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use arnoldi::{arnoldi_eigs, arnoldi_eigs_with, EigenResult, EigenSolverConfig, SpectralMode, Which};
pub use dense::DenseMatrix;
pub use gmres::{gmres, gmres_preconditioned, GmresConfig, GmresStats};
pub use schur::{schur_decompose, triangular_eigenvectors, Schur};
pub use shift_invert::ShiftInvert;

/// A deterministic linear map on complex vectors of fixed length.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&mut self, x: &[Complex64], y: &mut [Complex64]) -> Result<()>;
}

impl<T: LinearOperator + ?Sized> LinearOperator for &mut T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&mut self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        (**self).apply(x, y)
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&mut self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        if x.len() != self.cols() || y.len() != self.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                actual: x.len(),
            });
        }
        self.matvec(x, y);
        Ok(())
    }
}

/// Diagonal operator, mostly useful in tests and as a preconditioner.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagonal(pub Vec<Complex64>);

impl Diagonal {
    pub fn real(values: &[f64]) -> Self {
        Self(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }
}

impl LinearOperator for Diagonal {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&mut self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        if x.len() != self.0.len() || y.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                actual: x.len(),
            });
        }
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.0) {
            *yi = d * xi;
        }
        Ok(())
    }
}

/// Right preconditioner `z = M⁻¹ v`.
pub trait Preconditioner {
    fn solve(&self, v: &[Complex64], z: &mut [Complex64]);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn solve(&self, v: &[Complex64], z: &mut [Complex64]) {
        z.copy_from_slice(v);
    }
}

/// Inverse of a real diagonal; entries with tiny magnitude are left at 1.
#[derive(Debug, Clone)]
pub struct Jacobi {
    inverse: Vec<f64>,
}

impl Jacobi {
    pub fn new(diagonal: &[f64]) -> Self {
        let scale = diagonal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = scale * f64::EPSILON.sqrt();
        let inverse = diagonal
            .iter()
            .map(|&d| if d.abs() > floor && d != 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        Self { inverse }
    }
}

impl Preconditioner for Jacobi {
    fn solve(&self, v: &[Complex64], z: &mut [Complex64]) {
        for ((zi, vi), w) in z.iter_mut().zip(v).zip(&self.inverse) {
            *zi = vi * w;
        }
    }
}

pub(crate) fn dotc(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub(crate) fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += a x`
pub(crate) fn axpy(a: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        self.get(r, c)
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        self.get_mut(r, c)
    }
}
