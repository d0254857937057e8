//! Projection matrices and truncated mode index sets.
//!
//! A quasiperiodic field on R^d is the restriction of a periodic parent on the
//! n-torus along `x = Pᵀz`. Fourier modes of the parent are integer vectors
//! `k ∈ Zⁿ`; the physical wavevector of mode `k` is `q = Pk`.
//!
//! Index sets truncate `k` to the half-open box `{-N/2, …, N/2-1}ⁿ`, drop the
//! zero mode, and optionally keep only modes with `‖Pk‖∞ ≤ M`. Modes are
//! stored in column-major order over the box (first component fastest).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack applied to the `‖Pk‖∞ ≤ M` filter so that modes sitting exactly on
/// the boundary do not flip with rounding.
pub const REDUCED_FILTER_SLACK: f64 = 1e-12;

const ABSENT: u32 = u32::MAX;

/// The d×n matrix mapping lattice modes to physical wavevectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMatrix {
    rows: usize,
    cols: usize,
    /// Row-major entries.
    entries: Vec<f64>,
}

impl ProjectionMatrix {
    /// Builds a projection matrix from row-major entries.
    ///
    /// Rational independence of the columns is not checked.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::InvalidProjection("matrix has no rows".into()));
        }
        if cols < rows {
            return Err(Error::InvalidProjection(format!(
                "lifted dimension {cols} is smaller than physical dimension {rows}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: entries.len(),
            });
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidProjection(format!("non-finite entry {v}")));
        }
        for c in 0..cols {
            if (0..rows).all(|r| entries[r * cols + c] == 0.0) {
                return Err(Error::InvalidProjection(format!("column {c} is zero")));
            }
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        Self::new(d, n, rows.concat())
    }

    /// `[I₃ | s·I₃]`, the 3×6 lift used for two superposed cubic lattices
    /// with length ratio `s`.
    pub fn stacked_identity(scale: f64) -> Result<Self> {
        let mut entries = vec![0.0; 18];
        for r in 0..3 {
            entries[r * 6 + r] = 1.0;
            entries[r * 6 + 3 + r] = scale;
        }
        Self::new(3, 6, entries)
    }

    pub fn identity(d: usize) -> Result<Self> {
        let mut entries = vec![0.0; d * d];
        for r in 0..d {
            entries[r * d + r] = 1.0;
        }
        Self::new(d, d, entries)
    }

    /// Physical dimension d.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Lifted dimension n.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `q = Pk`.
    pub fn phi(&self, k: &[i32]) -> Result<Vec<f64>> {
        if k.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: k.len(),
            });
        }
        let mut q = vec![0.0; self.rows];
        self.phi_into(k, &mut q);
        Ok(q)
    }

    fn phi_into(&self, k: &[i32], q: &mut [f64]) {
        for (r, qr) in q.iter_mut().enumerate() {
            let row = &self.entries[r * self.cols..(r + 1) * self.cols];
            *qr = row.iter().zip(k).map(|(p, &ki)| p * ki as f64).sum();
        }
    }

    /// `Pᵀz`: the torus point whose parent value equals the quasiperiodic
    /// value at physical point `z`.
    pub fn lift_point(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                actual: z.len(),
            });
        }
        Ok((0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.entry(r, c) * z[r]).sum())
            .collect())
    }
}

/// A borrowed view of one tracked mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeIndex<'a> {
    pub k: &'a [i32],
    pub q: &'a [f64],
    pub qnorm: f64,
}

/// Ordered collection of nonzero lattice modes with their wavevectors.
#[derive(Debug, Clone)]
pub struct IndexSet {
    n: usize,
    d: usize,
    truncation: usize,
    reduced_bound: Option<f64>,
    /// Flat `k` vectors, stride n.
    ks: Vec<i32>,
    /// Flat `q` vectors, stride d.
    qs: Vec<f64>,
    qnorms: Vec<f64>,
    /// Box linear index of every mode.
    box_index: Vec<usize>,
    /// Box linear index -> position in `ks`, `ABSENT` when not tracked.
    lookup: Vec<u32>,
}

fn check_truncation(truncation: usize) -> Result<()> {
    if truncation < 2 || truncation % 2 != 0 {
        return Err(Error::InvalidTruncation(truncation));
    }
    Ok(())
}

fn box_len(n: usize, truncation: usize) -> Result<usize> {
    u32::try_from(n)
        .ok()
        .and_then(|e| truncation.checked_pow(e))
        .filter(|&len| len < ABSENT as usize)
        .ok_or_else(|| {
            Error::InvalidParameter(format!("mode box {truncation}^{n} is too large"))
        })
}

impl IndexSet {
    /// All nonzero modes of the half-open box `{-N/2, …, N/2-1}ⁿ`.
    pub fn full(projection: &ProjectionMatrix, truncation: usize) -> Result<Self> {
        Self::build(projection, truncation, None)
    }

    /// Modes of the full set with `‖Pk‖∞ ≤ M`.
    pub fn reduced(projection: &ProjectionMatrix, truncation: usize, bound: f64) -> Result<Self> {
        if bound.is_nan() || bound <= 0.0 {
            return Err(Error::InvalidReducedBound(bound));
        }
        Self::build(projection, truncation, Some(bound))
    }

    fn build(projection: &ProjectionMatrix, truncation: usize, bound: Option<f64>) -> Result<Self> {
        check_truncation(truncation)?;
        let n = projection.cols();
        let d = projection.rows();
        let total = box_len(n, truncation)?;
        let half = (truncation / 2) as i32;
        let limit = bound.map(|m| m + REDUCED_FILTER_SLACK);

        let mut ks = Vec::new();
        let mut qs = Vec::new();
        let mut qnorms = Vec::new();
        let mut box_index = Vec::new();
        let mut lookup = vec![ABSENT; total];

        let mut k = vec![-half; n];
        let mut q = vec![0.0; d];
        for (b, slot) in lookup.iter_mut().enumerate() {
            if b > 0 {
                // odometer increment, first component fastest
                for ki in k.iter_mut() {
                    *ki += 1;
                    if *ki < half {
                        break;
                    }
                    *ki = -half;
                }
            }
            if k.iter().all(|&ki| ki == 0) {
                continue;
            }
            projection.phi_into(&k, &mut q);
            if let Some(limit) = limit {
                if q.iter().any(|v| v.abs() > limit) {
                    continue;
                }
            }
            *slot = qnorms.len() as u32;
            ks.extend_from_slice(&k);
            qs.extend_from_slice(&q);
            qnorms.push(q.iter().map(|v| v * v).sum::<f64>().sqrt());
            box_index.push(b);
        }

        Ok(Self {
            n,
            d,
            truncation,
            reduced_bound: bound,
            ks,
            qs,
            qnorms,
            box_index,
            lookup,
        })
    }

    /// Number of tracked (nonzero) modes.
    pub fn len(&self) -> usize {
        self.qnorms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qnorms.is_empty()
    }

    /// Length of a divergence-free coefficient vector over this set.
    pub fn dof(&self) -> usize {
        2 * self.len()
    }

    /// Size of the integer box, zero mode included.
    pub fn box_len(&self) -> usize {
        self.lookup.len()
    }

    pub fn lifted_dim(&self) -> usize {
        self.n
    }

    pub fn physical_dim(&self) -> usize {
        self.d
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn reduced_bound(&self) -> Option<f64> {
        self.reduced_bound
    }

    pub fn mode(&self, j: usize) -> ModeIndex<'_> {
        ModeIndex {
            k: self.k(j),
            q: self.q(j),
            qnorm: self.qnorms[j],
        }
    }

    pub fn k(&self, j: usize) -> &[i32] {
        &self.ks[j * self.n..(j + 1) * self.n]
    }

    pub fn q(&self, j: usize) -> &[f64] {
        &self.qs[j * self.d..(j + 1) * self.d]
    }

    pub fn qnorms(&self) -> &[f64] {
        &self.qnorms
    }

    pub fn modes(&self) -> impl Iterator<Item = ModeIndex<'_>> + '_ {
        (0..self.len()).map(move |j| self.mode(j))
    }

    /// Column-major box index of mode `j`, with each component shifted by N/2.
    pub fn box_index(&self, j: usize) -> usize {
        self.box_index[j]
    }

    /// Box index of an arbitrary `k`, or `None` when outside the box.
    pub fn box_index_of(&self, k: &[i32]) -> Option<usize> {
        if k.len() != self.n {
            return None;
        }
        let half = (self.truncation / 2) as i32;
        let mut b = 0usize;
        for &ki in k.iter().rev() {
            if ki < -half || ki >= half {
                return None;
            }
            b = b * self.truncation + (ki + half) as usize;
        }
        Some(b)
    }

    /// Position of `k` in the mode list, `None` if excluded or out of range.
    pub fn linear_index(&self, k: &[i32]) -> Option<usize> {
        let b = self.box_index_of(k)?;
        match self.lookup[b] {
            ABSENT => None,
            pos => Some(pos as usize),
        }
    }

    /// Position of the mode `-k`, if tracked.
    pub fn partner(&self, j: usize) -> Option<usize> {
        let neg: Vec<i32> = self.k(j).iter().map(|v| -v).collect();
        self.linear_index(&neg)
    }

    /// True when some component of `k` sits at `-N/2`, so `-k` is outside
    /// the half-open box.
    pub fn is_unpaired(&self, j: usize) -> bool {
        let half = (self.truncation / 2) as i32;
        self.k(j).iter().any(|&v| v == -half)
    }

    /// True when every mode of `self` is also tracked by `other`.
    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.n == other.n
            && self.truncation == other.truncation
            && (0..self.len()).all(|j| other.linear_index(self.k(j)).is_some())
    }
}

/// Divergence-free degrees of freedom of the full set: `2(Nⁿ − 1)`.
pub fn full_dof(n: usize, truncation: usize) -> Result<usize> {
    check_truncation(truncation)?;
    Ok(2 * (box_len(n, truncation)? - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p_sqrt5() -> ProjectionMatrix {
        ProjectionMatrix::stacked_identity(5f64.sqrt()).unwrap()
    }

    #[test]
    fn phi_products() {
        let p = ProjectionMatrix::new(1, 2, vec![1.0, 2f64.sqrt()]).unwrap();
        let q = p.phi(&[1, 1]).unwrap();
        assert!((q[0] - 2.414_213_562_4).abs() < 1e-10);
        assert_eq!(p.phi(&[0, 0]).unwrap(), vec![0.0]);

        let q = p_sqrt5().phi(&[1, 0, 0, 1, 0, 0]).unwrap();
        assert!((q[0] - (1.0 + 5f64.sqrt())).abs() < 1e-15);
        assert_eq!(&q[1..], &[0.0, 0.0]);
        assert!(matches!(
            p.phi(&[1]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_validation() {
        assert!(ProjectionMatrix::new(2, 1, vec![1.0, 1.0]).is_err());
        assert!(ProjectionMatrix::new(1, 2, vec![1.0, 0.0]).is_err());
        assert!(ProjectionMatrix::new(1, 2, vec![1.0]).is_err());
        assert!(ProjectionMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn tiny_full_set() {
        let p = ProjectionMatrix::new(1, 2, vec![1.0, 2f64.sqrt()]).unwrap();
        let set = IndexSet::full(&p, 2).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.dof(), 6);
        assert_eq!(set.k(0), &[-1, -1]);
        assert_eq!(set.k(1), &[0, -1]);
        assert_eq!(set.k(2), &[-1, 0]);
        assert_eq!(set.linear_index(&[0, 0]), None);
        assert_eq!(set.linear_index(&[-1, -1]), Some(0));
        assert_eq!(set.linear_index(&[1, 0]), None);
    }

    #[test]
    fn bad_truncation() {
        let p = p_sqrt5();
        assert_eq!(IndexSet::full(&p, 3).unwrap_err(), Error::InvalidTruncation(3));
        assert_eq!(IndexSet::full(&p, 0).unwrap_err(), Error::InvalidTruncation(0));
        assert!(IndexSet::reduced(&p, 4, 0.0).is_err());
        assert!(full_dof(6, 7).is_err());
    }

    #[test]
    fn full_dof_formula() {
        assert_eq!(full_dof(6, 8).unwrap(), 524_286);
        assert_eq!(full_dof(6, 6).unwrap(), 93_310);
        assert_eq!(full_dof(2, 2).unwrap(), 6);
    }

    #[test]
    fn round_trip_positions() {
        let p = ProjectionMatrix::new(2, 3, vec![1.0, 0.0, 0.5, 0.0, 1.0, 3f64.sqrt()]).unwrap();
        let set = IndexSet::full(&p, 4).unwrap();
        assert_eq!(set.len(), 63);
        for j in 0..set.len() {
            assert_eq!(set.linear_index(set.k(j)), Some(j));
            assert_eq!(set.box_index_of(set.k(j)), Some(set.box_index(j)));
        }
    }

    #[test]
    fn tiny_reduced_bound_is_empty() {
        let p = p_sqrt5();
        let set = IndexSet::reduced(&p, 4, 0.1).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn partners_and_boundary() {
        let p = p_sqrt5();
        let set = IndexSet::full(&p, 4).unwrap();
        for j in 0..set.len() {
            match set.partner(j) {
                Some(m) => {
                    assert!(!set.is_unpaired(j));
                    let sum: Vec<i32> =
                        set.k(j).iter().zip(set.k(m)).map(|(a, b)| a + b).collect();
                    assert!(sum.iter().all(|&v| v == 0));
                }
                None => assert!(set.is_unpaired(j)),
            }
        }
    }
}
