use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{axpy, dotc, norm2, Identity, LinearOperator, Preconditioner};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmresConfig {
    pub rel_tolerance: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-10,
            restart: 30,
            max_iterations: 5000,
        }
    }
}

impl GmresConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "GMRES tolerance must be positive, got {}",
                self.rel_tolerance
            )));
        }
        if self.restart == 0 {
            return Err(Error::InvalidParameter("GMRES restart must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresStats {
    pub iterations: usize,
    /// True relative residual `‖b − Ax‖/‖b‖` of the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
    /// Estimated relative residual after every inner iteration.
    pub history: Vec<f64>,
    /// Iteration index at which each restart cycle began.
    pub cycle_starts: Vec<usize>,
}

impl GmresStats {
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::GmresNotConverged {
                residual: self.relative_residual,
                iterations: self.iterations,
            })
        }
    }
}

/// Unpreconditioned restarted GMRES from a zero initial guess.
pub fn gmres<A: LinearOperator + ?Sized>(
    a: &mut A,
    b: &[Complex64],
    cfg: &GmresConfig,
) -> Result<(Vec<Complex64>, GmresStats)> {
    gmres_preconditioned(a, &Identity, b, None, cfg)
}

/// Complex Givens rotation `(c, s)` with `[c s; −s̄ c]·(f, g)ᵀ = (r, 0)ᵀ`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    if g.norm() == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if f.norm() == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0));
    }
    let fa = f.norm();
    let r = fa.hypot(g.norm());
    (fa / r, (f / fa) * g.conj() / r)
}

/// Restarted GMRES with a right preconditioner.
///
/// Non-convergence is not an error here: the best iterate is returned with
/// `converged = false`, and the caller decides.
pub fn gmres_preconditioned<A: LinearOperator + ?Sized, M: Preconditioner + ?Sized>(
    a: &mut A,
    pre: &M,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    cfg: &GmresConfig,
) -> Result<(Vec<Complex64>, GmresStats)> {
    cfg.validate()?;
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x0.len(),
            })
        }
        None => vec![zero; n],
    };
    let mut stats = GmresStats {
        iterations: 0,
        relative_residual: 0.0,
        converged: true,
        history: Vec::new(),
        cycle_starts: Vec::new(),
    };
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = zero);
        return Ok((x, stats));
    }

    let m = cfg.restart.min(n.max(1));
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
    let mut z = vec![zero; n];
    let mut w = vec![zero; n];
    let mut r = vec![zero; n];
    let mut fresh = x0.is_none();

    loop {
        // true residual of the current iterate
        if fresh {
            r.copy_from_slice(b);
            fresh = false;
        } else {
            a.apply(&x, &mut w)?;
            for ((ri, bi), wi) in r.iter_mut().zip(b).zip(&w) {
                *ri = bi - wi;
            }
        }
        let beta = norm2(&r);
        stats.relative_residual = beta / bnorm;
        if stats.relative_residual <= cfg.rel_tolerance {
            stats.converged = true;
            return Ok((x, stats));
        }
        if stats.iterations >= cfg.max_iterations {
            stats.converged = false;
            return Ok((x, stats));
        }
        stats.cycle_starts.push(stats.iterations);

        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        let mut cs: Vec<(f64, Complex64)> = Vec::with_capacity(m);
        let mut g = vec![zero; m + 1];
        g[0] = Complex64::new(beta, 0.0);

        let mut steps = 0;
        while steps < m && stats.iterations < cfg.max_iterations {
            let j = steps;
            pre.solve(&basis[j], &mut z);
            a.apply(&z, &mut w)?;
            let wnorm0 = norm2(&w);
            let mut col = vec![zero; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dotc(v, &w);
                axpy(-hij, v, &mut w);
                col[i] = hij;
            }
            let hnext = norm2(&w);
            col[j + 1] = Complex64::new(hnext, 0.0);
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (a0, a1) = (col[i], col[i + 1]);
                col[i] = c * a0 + s * a1;
                col[i + 1] = -s.conj() * a0 + c * a1;
            }
            let (c, s) = givens(col[j], col[j + 1]);
            col[j] = c * col[j] + s * col[j + 1];
            col[j + 1] = zero;
            g[j + 1] = -s.conj() * g[j];
            g[j] *= c;
            cs.push((c, s));
            h.push(col);
            steps += 1;
            stats.iterations += 1;
            let estimate = g[j + 1].norm() / bnorm;
            stats.history.push(estimate);

            let breakdown = hnext <= 1e-14 * wnorm0.max(f64::MIN_POSITIVE);
            if estimate <= cfg.rel_tolerance || breakdown {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }

        // back substitution for the least-squares coefficients
        let mut y = vec![zero; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for k in i + 1..steps {
                acc -= h[k][i] * y[k];
            }
            y[i] = acc / h[i][i];
        }
        let mut update = vec![zero; n];
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut update);
        }
        pre.solve(&update, &mut z);
        axpy(Complex64::new(1.0, 0.0), &z, &mut x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{DenseMatrix, Diagonal, Jacobi};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_in_one_iteration() {
        let mut a = Diagonal::real(&[1.0; 5]);
        let b: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let (x, stats) = gmres(&mut a, &b, &GmresConfig::default()).unwrap();
        assert_eq!(stats.iterations, 1);
        assert!(stats.converged);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).norm() < 1e-15);
        }
    }

    #[test]
    fn two_by_two_diagonal() {
        let mut a = Diagonal::real(&[1.0, 2.0]);
        let (x, stats) = gmres(&mut a, &[c(1.0), c(1.0)], &GmresConfig::default()).unwrap();
        assert!(stats.converged);
        assert!((x[0] - c(1.0)).norm() < 1e-12);
        assert!((x[1] - c(0.5)).norm() < 1e-12);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut a = Diagonal::real(&[3.0, 4.0]);
        let (x, stats) = gmres(&mut a, &[c(0.0), c(0.0)], &GmresConfig::default()).unwrap();
        assert_eq!(x, vec![c(0.0), c(0.0)]);
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn jacobi_solves_diagonal_exactly() {
        let d: Vec<f64> = (1..=50).map(|i| i as f64 * 0.37).collect();
        let mut a = Diagonal::real(&d);
        let b: Vec<Complex64> = (0..50).map(|i| Complex64::new(1.0, i as f64)).collect();
        let (x, stats) =
            gmres_preconditioned(&mut a, &Jacobi::new(&d), &b, None, &GmresConfig::default())
                .unwrap();
        assert_eq!(stats.iterations, 1);
        for i in 0..50 {
            assert!((x[i] * d[i] - b[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let d: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        let mut a = Diagonal::real(&d);
        let b = vec![c(1.0); 40];
        let cfg = GmresConfig {
            rel_tolerance: 1e-14,
            restart: 2,
            max_iterations: 4,
        };
        let (_, stats) = gmres(&mut a, &b, &cfg).unwrap();
        assert!(!stats.converged);
        assert_eq!(stats.iterations, 4);
        assert!(stats.clone().into_result().is_err());
    }

    #[test]
    fn nonsymmetric_system() {
        let mut a = DenseMatrix::from_fn(4, 4, |r, col| {
            if r == col {
                Complex64::new(4.0, 1.0)
            } else {
                Complex64::new((r as f64 - col as f64) * 0.3, 0.2)
            }
        });
        let b = vec![Complex64::new(1.0, -2.0), c(0.5), c(-1.0), Complex64::new(0.0, 3.0)];
        let (x, stats) = gmres(&mut a, &b, &GmresConfig::default()).unwrap();
        assert!(stats.converged);
        let mut ax = vec![c(0.0); 4];
        a.matvec(&x, &mut ax);
        for (l, r) in ax.iter().zip(&b) {
            assert!((l - r).norm() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut a = Diagonal::real(&[1.0]);
        let cfg = GmresConfig {
            restart: 0,
            ..Default::default()
        };
        assert!(gmres(&mut a, &[c(1.0)], &cfg).is_err());
    }
}
