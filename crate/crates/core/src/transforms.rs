//! n-dimensional FFT bridge between mode coefficients and torus grids.
//!
//! Grids carry `G` points per dimension (`G = oversample · N`) with spacing
//! `h = 2π/G`, stored column-major. Coefficient arrays use standard FFT
//! order: mode `k` sits at `Σ (k_i mod G) Gⁱ`. The forward transform is the
//! grid average `ĝ_k = G⁻ⁿ Σ_x g(x) e^{−i⟨k,x⟩}`; the inverse is the plain
//! sum `g(x) = Σ_k ĝ_k e^{i⟨k,x⟩}`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::basis::VectorModeCoeffs;
use crate::error::{Error, Result};
use crate::lattice::IndexSet;

/// Uniform torus grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n: usize,
    points: usize,
    total: usize,
}

impl GridSpec {
    pub fn new(n: usize, points: usize) -> Result<Self> {
        if n == 0 || points == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid needs n ≥ 1 and points ≥ 1, got n = {n}, points = {points}"
            )));
        }
        let total = u32::try_from(n)
            .ok()
            .and_then(|e| points.checked_pow(e))
            .ok_or_else(|| Error::InvalidParameter(format!("grid {points}^{n} is too large")))?;
        Ok(Self { n, points, total })
    }

    /// Grid matching an index set, enlarged by an integer oversampling
    /// factor.
    pub fn for_set(set: &IndexSet, oversample: usize) -> Result<Self> {
        if oversample == 0 {
            return Err(Error::InvalidParameter("oversample must be ≥ 1".into()));
        }
        Self::new(set.lifted_dim(), set.truncation() * oversample)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points_per_dim(&self) -> usize {
        self.points
    }

    pub fn total_points(&self) -> usize {
        self.total
    }

    pub fn h(&self) -> f64 {
        2.0 * PI / self.points as f64
    }

    /// FFT-order position of mode `k`.
    pub fn fft_index(&self, k: &[i32]) -> usize {
        let g = self.points as i64;
        k.iter()
            .rev()
            .fold(0usize, |acc, &ki| acc * self.points + (ki as i64).rem_euclid(g) as usize)
    }

    /// The mode `k ∈ {−G/2, …, G/2−1}ⁿ` stored at FFT position `idx`.
    pub fn mode_at(&self, mut idx: usize) -> Vec<i32> {
        let half = self.points / 2;
        (0..self.n)
            .map(|_| {
                let m = idx % self.points;
                idx /= self.points;
                if m >= self.points - half {
                    m as i32 - self.points as i32
                } else {
                    m as i32
                }
            })
            .collect()
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.total {
            return Err(Error::DimensionMismatch {
                expected: self.total,
                actual: len,
            });
        }
        Ok(())
    }
}

/// One or three complex arrays sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub components: Vec<Vec<Complex64>>,
}

impl GridField {
    pub fn scalar(values: Vec<Complex64>) -> Self {
        Self {
            components: vec![values],
        }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::scalar(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }
}

/// Reusable n-dimensional complex FFT for one grid size.
///
/// Each axis pass runs batched 1-D transforms over the contiguous first
/// axis and then rotates the axes with a transpose, so after `n` passes the
/// layout is back in column-major order.
pub struct FftNd {
    spec: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    spare: Vec<Complex64>,
}

impl Clone for FftNd {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec,
            forward: Arc::clone(&self.forward),
            inverse: Arc::clone(&self.inverse),
            scratch: self.scratch.clone(),
            spare: self.spare.clone(),
        }
    }
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("spec", &self.spec).finish()
    }
}

impl FftNd {
    pub fn new(spec: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(spec.points);
        let inverse = planner.plan_fft_inverse(spec.points);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            spec,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            spare: vec![Complex64::new(0.0, 0.0); spec.total],
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    /// Unnormalized forward transform in place (`Σ_x g(x) e^{−i⟨k,x⟩}`).
    pub fn forward_unscaled(&mut self, data: &mut Vec<Complex64>) {
        let fft = Arc::clone(&self.forward);
        self.run(data, fft.as_ref());
    }

    /// Inverse transform in place (`Σ_k ĝ_k e^{i⟨k,x⟩}`).
    pub fn inverse(&mut self, data: &mut Vec<Complex64>) {
        let fft = Arc::clone(&self.inverse);
        self.run(data, fft.as_ref());
    }

    /// Forward transform with the `G⁻ⁿ` averaging normalization.
    pub fn forward(&mut self, data: &mut Vec<Complex64>) {
        self.forward_unscaled(data);
        let scale = 1.0 / self.spec.total as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn run(&mut self, data: &mut Vec<Complex64>, fft: &dyn Fft<f64>) {
        assert_eq!(data.len(), self.spec.total, "grid size mismatch");
        let len = self.spec.points;
        let rest = self.spec.total / len;
        for _ in 0..self.spec.n {
            if len > 1 {
                fft.process_with_scratch(data, &mut self.scratch);
            }
            if rest > 1 {
                transpose(data, &mut self.spare, len, rest);
                std::mem::swap(data, &mut self.spare);
            }
        }
    }
}

/// Column-major `rows × cols` → `cols × rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for c in 0..cols {
        let column = &src[c * rows..(c + 1) * rows];
        for (r, v) in column.iter().enumerate() {
            dst[c + cols * r] = *v;
        }
    }
}

/// Forward transform of every component with the averaging normalization.
pub fn forward_fft(spec: &GridSpec, g: &GridField) -> Result<GridField> {
    let mut plan = FftNd::new(*spec);
    let mut out = Vec::with_capacity(g.components.len());
    for comp in &g.components {
        spec.check(comp.len())?;
        let mut data = comp.clone();
        plan.forward(&mut data);
        out.push(data);
    }
    Ok(GridField { components: out })
}

/// Exact inverse of [`forward_fft`].
pub fn inverse_fft(spec: &GridSpec, coeffs: &GridField) -> Result<GridField> {
    let mut plan = FftNd::new(*spec);
    let mut out = Vec::with_capacity(coeffs.components.len());
    for comp in &coeffs.components {
        spec.check(comp.len())?;
        let mut data = comp.clone();
        plan.inverse(&mut data);
        out.push(data);
    }
    Ok(GridField { components: out })
}

/// FFT-order positions of the tracked modes of an index set.
#[derive(Debug, Clone)]
pub struct ModeMap {
    spec: GridSpec,
    positions: Vec<usize>,
}

impl ModeMap {
    pub fn new(set: &IndexSet, spec: GridSpec) -> Result<Self> {
        if set.lifted_dim() != spec.n() {
            return Err(Error::DimensionMismatch {
                expected: spec.n(),
                actual: set.lifted_dim(),
            });
        }
        if spec.points_per_dim() < set.truncation() {
            return Err(Error::InvalidParameter(format!(
                "grid with {} points per dimension cannot hold truncation {}",
                spec.points_per_dim(),
                set.truncation()
            )));
        }
        let positions = (0..set.len()).map(|j| spec.fft_index(set.k(j))).collect();
        Ok(Self { spec, positions })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Embeds tracked vector modes into three full coefficient boxes (zero
/// elsewhere, including `k = 0`).
pub fn scatter_modes(map: &ModeMap, v: &VectorModeCoeffs) -> Result<GridField> {
    if v.len() != map.len() {
        return Err(Error::DimensionMismatch {
            expected: map.len(),
            actual: v.len(),
        });
    }
    let total = map.spec.total_points();
    let mut components = vec![vec![Complex64::new(0.0, 0.0); total]; 3];
    for (row, &pos) in v.0.iter().zip(&map.positions) {
        for c in 0..3 {
            components[c][pos] = row[c];
        }
    }
    Ok(GridField { components })
}

/// Restricts three coefficient boxes to the tracked modes.
pub fn gather_modes(map: &ModeMap, boxes: &GridField) -> Result<VectorModeCoeffs> {
    if boxes.components.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            actual: boxes.components.len(),
        });
    }
    for comp in &boxes.components {
        map.spec.check(comp.len())?;
    }
    let mut v = VectorModeCoeffs::zeros(map.len());
    for (row, &pos) in v.0.iter_mut().zip(&map.positions) {
        for c in 0..3 {
            row[c] = boxes.components[c][pos];
        }
    }
    Ok(v)
}
