//! Matrix-free source and eigen operators in divergence-free coefficients.
//!
//! Both operators share one kernel, the ε⁻¹-weighted projection
//!
//! ```text
//! B b = Π_div · gather · FFT · (ε⁻¹ ·) · IFFT · scatter · expand(b)
//! ```
//!
//! where `expand` assembles full vector modes from the polarization frames
//! and `Π_div` projects back onto them. The source operator is
//! `C B C + κ` and the eigen operator is `C² B = diag(|q|²) B`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::basis::{curl_in_place, FrameTables};
use crate::error::{Error, Result};
use crate::lattice::IndexSet;
use crate::permittivity::PermittivityField;
use crate::solvers::{DenseMatrix, LinearOperator};
use crate::transforms::{FftNd, GridSpec, ModeMap};

/// Immutable operator data plus per-instance scratch buffers.
///
/// Cloning shares the index set, frames and permittivity grid; each clone
/// owns its own FFT scratch, so clones may be applied concurrently.
#[derive(Debug, Clone)]
pub struct OperatorPlan {
    set: Arc<IndexSet>,
    tables: Arc<FrameTables>,
    map: Arc<ModeMap>,
    /// `ε⁻¹` on the grid, pre-divided by the number of grid points so the
    /// unscaled forward FFT yields averaged coefficients.
    weight: Arc<Vec<f64>>,
    mean_inverse: f64,
    uniform: bool,
    shortcut: bool,
    kappa: f64,
    fft: FftNd,
    grid: Vec<Complex64>,
    work: Vec<Complex64>,
}

impl OperatorPlan {
    pub fn new(set: Arc<IndexSet>, eps: &PermittivityField, kappa: f64) -> Result<Self> {
        let tables = Arc::new(FrameTables::assemble(&set)?);
        Self::with_tables(set, tables, eps, kappa)
    }

    pub fn with_tables(
        set: Arc<IndexSet>,
        tables: Arc<FrameTables>,
        eps: &PermittivityField,
        kappa: f64,
    ) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!("kappa must be ≥ 0, got {kappa}")));
        }
        if tables.len() != set.len() {
            return Err(Error::DimensionMismatch {
                expected: set.len(),
                actual: tables.len(),
            });
        }
        let spec = GridSpec::new(set.lifted_dim(), eps.points_per_dim())?;
        if spec.points_per_dim() % set.truncation() != 0 {
            return Err(Error::InvalidParameter(format!(
                "permittivity grid of {} points is not a multiple of N = {}",
                spec.points_per_dim(),
                set.truncation()
            )));
        }
        let map = Arc::new(ModeMap::new(&set, spec)?);
        let total = spec.total_points() as f64;
        let weight = Arc::new(eps.inverse().iter().map(|v| v / total).collect());
        Ok(Self {
            tables,
            map,
            weight,
            mean_inverse: eps.mean_inverse(),
            uniform: eps.is_uniform(),
            shortcut: true,
            kappa,
            fft: FftNd::new(spec),
            grid: vec![Complex64::new(0.0, 0.0); spec.total_points()],
            work: vec![Complex64::new(0.0, 0.0); set.dof()],
            set,
        })
    }

    pub fn set(&self) -> &Arc<IndexSet> {
        &self.set
    }

    pub fn tables(&self) -> &Arc<FrameTables> {
        &self.tables
    }

    pub fn spec(&self) -> GridSpec {
        self.map.spec()
    }

    pub fn dof(&self) -> usize {
        self.set.dof()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Grid mean of `ε⁻¹`.
    pub fn mean_inverse(&self) -> f64 {
        self.mean_inverse
    }

    /// True when the permittivity grid is constant.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// For constant ε the FFT round trip reduces to a scaling; this is on
    /// by default. Turning it off forces the full grid pipeline.
    pub fn set_uniform_shortcut(&mut self, enabled: bool) {
        self.shortcut = enabled;
    }

    fn check(&self, x: &[Complex64], y: &[Complex64]) -> Result<()> {
        for len in [x.len(), y.len()] {
            if len != self.dof() {
                return Err(Error::DimensionMismatch {
                    expected: self.dof(),
                    actual: len,
                });
            }
        }
        Ok(())
    }

    /// `y = B x`: expand, multiply by `ε⁻¹` on the grid, project back.
    fn weighted_projection(&mut self, x: &[Complex64], y: &mut [Complex64]) {
        if self.uniform && self.shortcut {
            // expand/project is the identity on the frame
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = xi * self.mean_inverse;
            }
            return;
        }
        let l = self.set.len();
        let (x1, x2) = x.split_at(l);
        let zero = Complex64::new(0.0, 0.0);
        y.iter_mut().for_each(|v| *v = zero);
        let positions = self.map.positions();
        for c in 0..3 {
            self.grid.iter_mut().for_each(|v| *v = zero);
            for j in 0..l {
                let (d1, d2) = (self.tables.d1(j), self.tables.d2(j));
                self.grid[positions[j]] = x1[j] * d1[c] + x2[j] * d2[c];
            }
            self.fft.inverse(&mut self.grid);
            for (g, w) in self.grid.iter_mut().zip(self.weight.iter()) {
                *g *= *w;
            }
            self.fft.forward_unscaled(&mut self.grid);
            let (y1, y2) = y.split_at_mut(l);
            for j in 0..l {
                let v = self.grid[positions[j]];
                y1[j] += v * self.tables.d1(j)[c];
                y2[j] += v * self.tables.d2(j)[c];
            }
        }
    }

    /// Coefficients of `∇×(ε⁻¹∇×u) + κu`.
    pub fn apply_source(&mut self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        self.check(x, y)?;
        let mut curl = std::mem::take(&mut self.work);
        curl_in_place(self.tables.qnorms(), x, &mut curl);
        self.weighted_projection(&curl, y);
        curl.copy_from_slice(y);
        curl_in_place(self.tables.qnorms(), &curl, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += self.kappa * xi;
        }
        self.work = curl;
        Ok(())
    }

    /// Coefficients of `∇×∇×(ε⁻¹u)`.
    pub fn apply_eigen(&mut self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        self.check(x, y)?;
        self.weighted_projection(x, y);
        let l = self.set.len();
        let qn = self.tables.qnorms();
        for (i, yi) in y.iter_mut().enumerate() {
            let q = qn[i % l];
            *yi *= q * q;
        }
        Ok(())
    }

    /// Exact diagonal of the source operator, `|q|²⟨ε⁻¹⟩ + κ`.
    pub fn source_diagonal(&self) -> Vec<f64> {
        self.stacked(|q| q * q * self.mean_inverse + self.kappa)
    }

    /// Exact diagonal of the eigen operator, `|q|²⟨ε⁻¹⟩`.
    pub fn eigen_diagonal(&self) -> Vec<f64> {
        self.stacked(|q| q * q * self.mean_inverse)
    }

    /// `1/|q|²` per coefficient; the eigen operator is self-adjoint in the
    /// inner product weighted by these values.
    pub fn eigen_inner_product_weights(&self) -> Vec<f64> {
        self.stacked(|q| 1.0 / (q * q))
    }

    fn stacked(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let half: Vec<f64> = self.tables.qnorms().iter().map(|&q| f(q)).collect();
        [half.as_slice(), half.as_slice()].concat()
    }
}

/// [`OperatorPlan::apply_source`] as a linear operator.
#[derive(Debug, Clone)]
pub struct SourceOperator(pub OperatorPlan);

impl LinearOperator for SourceOperator {
    fn dim(&self) -> usize {
        self.0.dof()
    }

    fn apply(&mut self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        self.0.apply_source(x, y)
    }
}

/// [`OperatorPlan::apply_eigen`] as a linear operator.
#[derive(Debug, Clone)]
pub struct EigenOperator(pub OperatorPlan);

impl LinearOperator for EigenOperator {
    fn dim(&self) -> usize {
        self.0.dof()
    }

    fn apply(&mut self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        self.0.apply_eigen(x, y)
    }
}

/// Which operator the dense oracle assembles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleForm {
    Source { kappa: f64 },
    Eigen,
}

/// Largest DOF the dense oracle accepts.
pub const ORACLE_DOF_LIMIT: usize = 600;

/// Explicit matrix of the source or eigen operator on a small index set.
///
/// The Fourier coefficients of `ε⁻¹` come from a direct (non-FFT) DFT on a
/// grid with `resolution` points per dimension, folded onto the operator's
/// `grid_points`-periodic lattice to reproduce pseudo-spectral aliasing. The
/// entries are assembled by explicit convolution, independent of the
/// scatter/FFT/gather path.
pub fn dense_oracle(
    set: &IndexSet,
    eps_inverse: &dyn Fn(&[f64]) -> f64,
    grid_points: usize,
    resolution: usize,
    form: OracleForm,
) -> Result<DenseMatrix> {
    let dof = set.dof();
    if dof > ORACLE_DOF_LIMIT {
        return Err(Error::OracleTooLarge {
            dof,
            limit: ORACLE_DOF_LIMIT,
        });
    }
    if set.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    if resolution % grid_points != 0 {
        return Err(Error::InvalidParameter(format!(
            "oracle resolution {resolution} must be a multiple of the grid size {grid_points}"
        )));
    }
    let n = set.lifted_dim();
    let hi = GridSpec::new(n, resolution)?;
    let total = hi.total_points();

    let samples: Vec<f64> = (0..total)
        .map(|idx| {
            let x: Vec<f64> = point_of(idx, n, resolution);
            eps_inverse(&x)
        })
        .collect();

    // folded[m mod G] = Σ_j ĉ_{m + jG}
    let lo = GridSpec::new(n, grid_points)?;
    let mut folded = vec![Complex64::new(0.0, 0.0); lo.total_points()];
    for m_idx in 0..total {
        let m = hi.mode_at(m_idx);
        let mut coeff = Complex64::new(0.0, 0.0);
        for (idx, &s) in samples.iter().enumerate() {
            let x = point_of(idx, n, resolution);
            let phase: f64 = x.iter().zip(&m).map(|(xi, &mi)| xi * mi as f64).sum();
            coeff += s * Complex64::from_polar(1.0, -phase);
        }
        folded[lo.fft_index(&m)] += coeff / total as f64;
    }

    let tables = FrameTables::assemble(set)?;
    let l = set.len();
    let mut b = DenseMatrix::zeros(dof, dof);
    for qi in 0..l {
        for pi in 0..l {
            let diff: Vec<i32> = set.k(qi).iter().zip(set.k(pi)).map(|(a, c)| a - c).collect();
            let c = folded[lo.fft_index(&diff)];
            let out_frames = [tables.d1(qi), tables.d2(qi)];
            let in_frames = [tables.d1(pi), tables.d2(pi)];
            for (a, da) in out_frames.iter().enumerate() {
                for (lpol, dl) in in_frames.iter().enumerate() {
                    let overlap: f64 = (0..3).map(|t| da[t] * dl[t]).sum();
                    b[(a * l + qi, lpol * l + pi)] = c * overlap;
                }
            }
        }
    }

    let qn = tables.qnorms();
    let mut out = DenseMatrix::zeros(dof, dof);
    match form {
        OracleForm::Eigen => {
            for r in 0..dof {
                let q = qn[r % l];
                for col in 0..dof {
                    out[(r, col)] = q * q * b[(r, col)];
                }
            }
        }
        OracleForm::Source { kappa } => {
            // per-mode curl matrix: row (1,j) = −i|q| e_(2,j), row (2,j) = i|q| e_(1,j)
            let curl = |m: &DenseMatrix, left: bool| -> DenseMatrix {
                let mut r = DenseMatrix::zeros(dof, dof);
                for i in 0..dof {
                    for j in 0..dof {
                        r[(i, j)] = if left {
                            let mode = i % l;
                            let t = Complex64::new(0.0, qn[mode]);
                            if i < l {
                                -t * m[(i + l, j)]
                            } else {
                                t * m[(i - l, j)]
                            }
                        } else {
                            let mode = j % l;
                            let t = Complex64::new(0.0, qn[mode]);
                            if j < l {
                                t * m[(i, j + l)]
                            } else {
                                -t * m[(i, j - l)]
                            }
                        };
                    }
                }
                r
            };
            out = curl(&curl(&b, false), true);
            for i in 0..dof {
                out[(i, i)] += kappa;
            }
        }
    }
    Ok(out)
}

fn point_of(mut idx: usize, n: usize, points: usize) -> Vec<f64> {
    let h = 2.0 * std::f64::consts::PI / points as f64;
    (0..n)
        .map(|_| {
            let m = idx % points;
            idx /= points;
            m as f64 * h
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ProjectionMatrix;
    use crate::permittivity::{parse_expression, PermittivityField};

    fn tiny() -> (Arc<IndexSet>, PermittivityField) {
        let p = ProjectionMatrix::new(3, 4, vec![
            1.0, 0.0, 0.0, 2f64.sqrt(),
            0.0, 1.0, 0.0, 0.5,
            0.0, 0.0, 1.0, 3f64.sqrt(),
        ])
        .unwrap();
        let set = Arc::new(IndexSet::full(&p, 2).unwrap());
        let e = parse_expression("1+0.5*cos(x1)", 4).unwrap();
        (set, PermittivityField::sample(&e, 2).unwrap())
    }

    #[test]
    fn vacuum_is_diagonal() {
        let p = ProjectionMatrix::stacked_identity(2f64.sqrt()).unwrap();
        let set = Arc::new(IndexSet::full(&p, 2).unwrap());
        let eps = PermittivityField::sample(&parse_expression("1", 6).unwrap(), 2).unwrap();
        let mut plan = OperatorPlan::new(set.clone(), &eps, 3.0).unwrap();
        plan.set_uniform_shortcut(false);
        let dof = plan.dof();
        let j = 17;
        let mut x = vec![Complex64::new(0.0, 0.0); dof];
        x[j] = Complex64::new(0.5, -1.0);
        x[j + set.len()] = Complex64::new(2.0, 0.0);
        let mut y = vec![Complex64::new(0.0, 0.0); dof];
        plan.apply_source(&x, &mut y).unwrap();
        let q2 = set.qnorms()[j].powi(2);
        for i in 0..dof {
            assert!((y[i] - (q2 + 3.0) * x[i]).norm() < 1e-13);
        }
        plan.apply_eigen(&x, &mut y).unwrap();
        for i in 0..dof {
            assert!((y[i] - q2 * x[i]).norm() < 1e-13);
        }
        let zero = vec![Complex64::new(0.0, 0.0); dof];
        plan.apply_source(&zero, &mut y).unwrap();
        assert!(y.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn length_mismatch() {
        let (set, eps) = tiny();
        let mut plan = OperatorPlan::new(set, &eps, 1.0).unwrap();
        let x = vec![Complex64::new(0.0, 0.0); 3];
        let mut y = vec![Complex64::new(0.0, 0.0); 3];
        assert!(plan.apply_source(&x, &mut y).is_err());
        assert!(OperatorPlan::new(plan.set().clone(), &eps, -1.0).is_err());
    }

    #[test]
    fn oracle_refuses_large_sets() {
        let p = ProjectionMatrix::stacked_identity(2f64.sqrt()).unwrap();
        let set = IndexSet::full(&p, 4).unwrap();
        assert!(matches!(
            dense_oracle(&set, &|_| 1.0, 4, 4, OracleForm::Eigen),
            Err(Error::OracleTooLarge { .. })
        ));
    }
}
