//! Divergence-free polarization frames and per-mode curl action.
//!
//! Every tracked mode carries an orthonormal pair `d₁(q), d₂(q)` spanning the
//! plane orthogonal to `q`, chosen right-handed (`d₁ × d₂ = q/|q|`). A field
//! with coefficients `(û¹, û²)` on a mode is the plane wave
//! `(û¹ d₁ + û² d₂) e^{i⟨q,z⟩}`, which is pointwise divergence-free.
//!
//! With this handedness the curl acts per mode as
//! `(û¹, û²) ↦ (−i|q| û², i|q| û¹)`, so applying it twice multiplies by `|q|²`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::IndexSet;

pub type Vec3 = [f64; 3];

pub(crate) fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Orthonormal polarization pair attached to one wavevector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationFrame {
    pub d1: Vec3,
    pub d2: Vec3,
}

/// Deterministic frame for `q ≠ 0`.
///
/// `d₁` is `q × e_a` normalized, where `a` is the axis along which `|q_a|` is
/// smallest (lowest index on ties), and `d₂ = q × d₁ / |q|`. Flipping `q`
/// flips `d₁` and keeps `d₂`.
pub fn polarization_frame(q: &Vec3) -> Result<PolarizationFrame> {
    let qn = norm(q);
    if qn == 0.0 || !qn.is_finite() {
        return Err(Error::ZeroMode);
    }
    let mut axis = 0;
    for a in 1..3 {
        if q[a].abs() < q[axis].abs() {
            axis = a;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let c = cross(q, &e);
    let cn = norm(&c);
    let d1 = [c[0] / cn, c[1] / cn, c[2] / cn];
    let c2 = cross(q, &d1);
    let d2 = [c2[0] / qn, c2[1] / qn, c2[2] / qn];
    Ok(PolarizationFrame { d1, d2 })
}

/// Embeds a physical wavevector with d ≤ 3 components into R³; fields of
/// lower-dimensional problems are constant along the missing axes.
pub fn pad3(q: &[f64]) -> Vec3 {
    let mut out = [0.0; 3];
    out[..q.len()].copy_from_slice(q);
    out
}

/// Precomputed frames (`R`, `S`) and curl magnitudes (`T = i|q|`) for every
/// mode of an index set, in set order.
#[derive(Debug, Clone)]
pub struct FrameTables {
    r: Vec<Vec3>,
    s: Vec<Vec3>,
    qnorm: Vec<f64>,
}

impl FrameTables {
    pub fn assemble(set: &IndexSet) -> Result<Self> {
        if set.physical_dim() > 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                actual: set.physical_dim(),
            });
        }
        let mut r = Vec::with_capacity(set.len());
        let mut s = Vec::with_capacity(set.len());
        for mode in set.modes() {
            let frame = polarization_frame(&pad3(mode.q))?;
            r.push(frame.d1);
            s.push(frame.d2);
        }
        Ok(Self {
            r,
            s,
            qnorm: set.qnorms().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.qnorm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qnorm.is_empty()
    }

    pub fn dof(&self) -> usize {
        2 * self.len()
    }

    /// Row `j` of `R`: `d₁(Pk_j)`.
    pub fn d1(&self, j: usize) -> &Vec3 {
        &self.r[j]
    }

    /// Row `j` of `S`: `d₂(Pk_j)`.
    pub fn d2(&self, j: usize) -> &Vec3 {
        &self.s[j]
    }

    /// Diagonal entry `T_j = i|Pk_j|`.
    pub fn t(&self, j: usize) -> Complex64 {
        Complex64::new(0.0, self.qnorm[j])
    }

    pub fn qnorms(&self) -> &[f64] {
        &self.qnorm
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                actual: len,
            });
        }
        Ok(())
    }
}

/// Stacked polarization coefficients: all `û¹` in mode order, then all `û²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivFreeCoeffs(pub Vec<Complex64>);

impl DivFreeCoeffs {
    pub fn zeros(dof: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); dof])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.0.len() / 2
    }

    /// `(û¹_j, û²_j)`.
    pub fn pair(&self, j: usize) -> (Complex64, Complex64) {
        let l = self.modes();
        (self.0[j], self.0[l + j])
    }

    pub fn set_pair(&mut self, j: usize, u1: Complex64, u2: Complex64) {
        let l = self.modes();
        self.0[j] = u1;
        self.0[l + j] = u2;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Zeroes the modes whose partner `-k` lies outside the box, leaving a
    /// coefficient vector that can represent a real field.
    pub fn zero_unpaired(&mut self, set: &IndexSet) {
        let zero = Complex64::new(0.0, 0.0);
        for j in 0..set.len() {
            if set.is_unpaired(j) {
                self.set_pair(j, zero, zero);
            }
        }
    }

    /// Largest violation of the real-field pairing
    /// `û¹_{−k} = −conj(û¹_k)`, `û²_{−k} = conj(û²_k)` over paired modes.
    pub fn reality_defect(&self, set: &IndexSet) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..set.len() {
            if let Some(m) = set.partner(j) {
                let (a1, a2) = self.pair(j);
                let (b1, b2) = self.pair(m);
                worst = worst.max((b1 + a1.conj()).norm()).max((b2 - a2.conj()).norm());
            }
        }
        worst
    }

    /// Embeds coefficients from `sub` into the layout of `sup` (zeros
    /// elsewhere). `sub` must be a subset of `sup`.
    pub fn embed(&self, sub: &IndexSet, sup: &IndexSet) -> Result<Self> {
        if self.len() != sub.dof() {
            return Err(Error::DimensionMismatch {
                expected: sub.dof(),
                actual: self.len(),
            });
        }
        let mut out = Self::zeros(sup.dof());
        for j in 0..sub.len() {
            let m = sup.linear_index(sub.k(j)).ok_or_else(|| {
                Error::InvalidParameter(format!("mode {:?} missing from target set", sub.k(j)))
            })?;
            let (u1, u2) = self.pair(j);
            out.set_pair(m, u1, u2);
        }
        Ok(out)
    }
}

/// Full 3-vector Fourier coefficient of every tracked mode.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorModeCoeffs(pub Vec<[Complex64; 3]>);

impl VectorModeCoeffs {
    pub fn zeros(modes: usize) -> Self {
        Self(vec![[Complex64::new(0.0, 0.0); 3]; modes])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-mode curl in polarization coordinates.
pub fn curl_coeff_apply(tables: &FrameTables, b: &DivFreeCoeffs) -> Result<DivFreeCoeffs> {
    tables.check(b.len())?;
    let mut out = DivFreeCoeffs::zeros(b.len());
    curl_in_place(tables.qnorms(), &b.0, &mut out.0);
    Ok(out)
}

pub(crate) fn curl_in_place(qnorm: &[f64], b: &[Complex64], out: &mut [Complex64]) {
    let l = qnorm.len();
    let (b1, b2) = b.split_at(l);
    let (o1, o2) = out.split_at_mut(l);
    for j in 0..l {
        let t = Complex64::new(0.0, qnorm[j]);
        o1[j] = -t * b2[j];
        o2[j] = t * b1[j];
    }
}

/// `V_j = û¹_j d₁ + û²_j d₂`.
pub fn divfree_to_vector(tables: &FrameTables, b: &DivFreeCoeffs) -> Result<VectorModeCoeffs> {
    tables.check(b.len())?;
    let mut v = VectorModeCoeffs::zeros(tables.len());
    for (j, row) in v.0.iter_mut().enumerate() {
        let (u1, u2) = b.pair(j);
        let (d1, d2) = (tables.d1(j), tables.d2(j));
        for c in 0..3 {
            row[c] = u1 * d1[c] + u2 * d2[c];
        }
    }
    Ok(v)
}

/// Orthogonal projection of full vector modes onto the polarization pair:
/// `û¹_j = ⟨V_j, d₁⟩`, `û²_j = ⟨V_j, d₂⟩`.
pub fn vector_to_divfree(tables: &FrameTables, v: &VectorModeCoeffs) -> Result<DivFreeCoeffs> {
    if v.len() != tables.len() {
        return Err(Error::DimensionMismatch {
            expected: tables.len(),
            actual: v.len(),
        });
    }
    let mut b = DivFreeCoeffs::zeros(tables.dof());
    for (j, row) in v.0.iter().enumerate() {
        let (d1, d2) = (tables.d1(j), tables.d2(j));
        let u1 = row[0] * d1[0] + row[1] * d1[1] + row[2] * d1[2];
        let u2 = row[0] * d2[0] + row[1] * d2[1] + row[2] * d2[2];
        b.set_pair(j, u1, u2);
    }
    Ok(b)
}
