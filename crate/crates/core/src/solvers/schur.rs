use num_complex::Complex64;

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Complex Schur form `A = Z T Zᴴ` with `T` upper triangular, `Z` unitary.
#[derive(Debug, Clone)]
pub struct Schur {
    pub t: DenseMatrix,
    pub z: DenseMatrix,
}

impl Schur {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        (0..self.t.rows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Eigenvectors of `A` as unit-norm columns of `Z·Y`.
    pub fn eigenvectors(&self) -> DenseMatrix {
        let y = triangular_eigenvectors(&self.t);
        let mut v = self.z.matmul(&y);
        for c in 0..v.cols() {
            let col = v.column_mut(c);
            let n = col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if n > 0.0 {
                col.iter_mut().for_each(|x| *x /= n);
            }
        }
        v
    }
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `(c, s)` with `[c s; −s̄ c]·(f, g)ᵀ = (r, 0)ᵀ`.
pub(crate) fn rotation(f: Complex64, g: Complex64) -> (f64, Complex64) {
    if g == ZERO {
        return (1.0, ZERO);
    }
    if f == ZERO {
        return (0.0, g.conj() / g.norm());
    }
    let fa = f.norm();
    let r = fa.hypot(g.norm());
    (fa / r, (f / fa) * g.conj() / r)
}

fn rotate_rows(m: &mut DenseMatrix, r: usize, cols: std::ops::Range<usize>, c: f64, s: Complex64) {
    for k in cols {
        let (a, b) = (m[(r, k)], m[(r + 1, k)]);
        m[(r, k)] = c * a + s * b;
        m[(r + 1, k)] = c * b - s.conj() * a;
    }
}

/// Right-multiplies columns `k, k+1` by the adjoint rotation.
fn rotate_cols(m: &mut DenseMatrix, k: usize, rows: std::ops::Range<usize>, c: f64, s: Complex64) {
    for r in rows {
        let (a, b) = (m[(r, k)], m[(r, k + 1)]);
        m[(r, k)] = c * a + s.conj() * b;
        m[(r, k + 1)] = c * b - s * a;
    }
}

/// Householder reduction to upper Hessenberg form: `A = Q H Qᴴ`.
pub fn hessenberg(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let n = a.rows();
    let mut h = a.clone();
    let mut q = DenseMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<Complex64> = (k + 1..n).map(|r| h[(r, k)]).collect();
        let xnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if v[0] == ZERO { Complex64::new(1.0, 0.0) } else { v[0] / v[0].norm() };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);
        // H ← (I − 2vvᴴ) H
        for c in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * h[(k + 1 + i, c)]).sum();
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, c)] -= 2.0 * vi * dot;
            }
        }
        // H ← H (I − 2vvᴴ), Q ← Q (I − 2vvᴴ)
        for m in [&mut h, &mut q] {
            for r in 0..n {
                let dot: Complex64 = v.iter().enumerate().map(|(i, vi)| m[(r, k + 1 + i)] * vi).sum();
                for (i, vi) in v.iter().enumerate() {
                    m[(r, k + 1 + i)] -= 2.0 * dot * vi.conj();
                }
            }
        }
        h[(k + 1, k)] = alpha;
        for r in k + 2..n {
            h[(r, k)] = ZERO;
        }
    }
    (h, q)
}

/// Wilkinson shift: eigenvalue of the trailing 2×2 block closest to `d`.
fn wilkinson(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m1 = (a + d) * 0.5 + disc;
    let m2 = (a + d) * 0.5 - disc;
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// Complex Schur decomposition by Hessenberg reduction and single-shift QR.
pub fn schur_decompose(a: &DenseMatrix) -> Result<Schur> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: a.cols(),
        });
    }
    let (mut h, mut z) = hessenberg(a);
    if n < 2 {
        return Ok(Schur { t: h, z });
    }
    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut its = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        // find the start of the unreduced block ending at `hi`
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let mut diag = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if diag == 0.0 {
                diag = scale;
            }
            if sub <= eps * diag {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            its = 0;
            continue;
        }
        its += 1;
        total += 1;
        if total > 100 * n {
            return Err(Error::QrNotConverged(n));
        }
        let mu = if its % 10 == 0 {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        let mut x = h[(l, l)] - mu;
        let mut y = h[(l + 1, l)];
        for k in l..hi {
            let (c, s) = rotation(x, y);
            let first = if k > l { k - 1 } else { l };
            rotate_rows(&mut h, k, first..n, c, s);
            if k > l {
                h[(k + 1, k - 1)] = ZERO;
            }
            let last = (k + 2).min(hi);
            rotate_cols(&mut h, k, 0..last + 1, c, s);
            rotate_cols(&mut z, k, 0..n, c, s);
            if k + 1 < hi {
                x = h[(k + 1, k)];
                y = h[(k + 2, k)];
            }
        }
    }
    for c in 0..n {
        for r in c + 1..n {
            h[(r, c)] = ZERO;
        }
    }
    Ok(Schur { t: h, z })
}

/// Eigenvectors of an upper triangular matrix by back substitution, as
/// unit-norm columns. Near-zero pivots (repeated eigenvalues) are perturbed
/// to a small multiple of machine precision.
pub fn triangular_eigenvectors(t: &DenseMatrix) -> DenseMatrix {
    let n = t.rows();
    let mut y = DenseMatrix::zeros(n, n);
    let tnorm = t.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let lambda = t[(k, k)];
        let smin = (f64::EPSILON * lambda.norm()).max(f64::EPSILON * tnorm * 1e-3).max(f64::MIN_POSITIVE);
        let mut x = vec![ZERO; k + 1];
        x[k] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = ZERO;
            for m in j + 1..=k {
                s += t[(j, m)] * x[m];
            }
            let mut d = t[(j, j)] - lambda;
            if d.norm() < smin {
                d = Complex64::new(smin, 0.0);
            }
            x[j] = -s / d;
            // rescale to avoid overflow in long chains of tiny pivots
            let big = x.iter().fold(0.0f64, |m, v| m.max(v.norm()));
            if big > 1e100 {
                x.iter_mut().for_each(|v| *v /= big);
            }
        }
        let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for (r, v) in x.iter().enumerate() {
            y[(r, k)] = v / norm;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> DenseMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = DenseMatrix::zeros(n, n);
        for c in 0..n {
            for r in 0..n {
                m[(r, c)] = Complex64::new(next(), next());
            }
        }
        m
    }

    fn reconstruct(s: &Schur) -> DenseMatrix {
        s.z.matmul(&s.t).matmul(&s.z.adjoint())
    }

    fn diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..a.cols() {
            for r in 0..a.rows() {
                worst = worst.max((a[(r, c)] - b[(r, c)]).norm());
            }
        }
        worst
    }

    #[test]
    fn hessenberg_is_similar() {
        let a = sample(7, 3);
        let (h, q) = hessenberg(&a);
        for c in 0..7 {
            for r in c + 2..7 {
                assert_eq!(h[(r, c)], ZERO);
            }
        }
        assert!(diff(&q.matmul(&h).matmul(&q.adjoint()), &a) < 1e-13);
    }

    #[test]
    fn schur_of_random_matrices() {
        for (n, seed) in [(1, 1), (2, 2), (5, 3), (12, 4), (30, 5)] {
            let a = sample(n, seed);
            let s = schur_decompose(&a).unwrap();
            assert!(diff(&reconstruct(&s), &a) < 1e-12, "n = {n}");
            assert!(diff(&s.z.adjoint().matmul(&s.z), &DenseMatrix::identity(n)) < 1e-12);
            let v = s.eigenvectors();
            let av = a.matmul(&v);
            for (k, lam) in s.eigenvalues().iter().enumerate() {
                for r in 0..n {
                    assert!((av[(r, k)] - lam * v[(r, k)]).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn hermitian_spectrum_is_real() {
        let b = sample(10, 9);
        let a = DenseMatrix::from_fn(10, 10, |r, c| b[(r, c)] + b[(c, r)].conj());
        let s = schur_decompose(&a).unwrap();
        for l in s.eigenvalues() {
            assert!(l.im.abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_eigenvalues() {
        let a = DenseMatrix::from_fn(4, 4, |r, c| {
            if r == c {
                Complex64::new(if r < 3 { 2.0 } else { 5.0 }, 0.0)
            } else {
                ZERO
            }
        });
        let s = schur_decompose(&a).unwrap();
        let mut ev: Vec<f64> = s.eigenvalues().iter().map(|l| l.re).collect();
        ev.sort_by(f64::total_cmp);
        assert_eq!(ev, vec![2.0, 2.0, 2.0, 5.0]);
        let v = s.eigenvectors();
        for k in 0..4 {
            let lam = s.t[(k, k)];
            let col = v.column(k);
            for r in 0..4 {
                assert!((a[(r, r)] * col[r] - lam * col[r]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_annihilates() {
        let f = Complex64::new(0.3, -1.2);
        let g = Complex64::new(-2.0, 0.7);
        let (c, s) = rotation(f, g);
        assert!((-s.conj() * f + c * g).norm() < 1e-15);
        assert!((c * c + s.norm_sqr() - 1.0).abs() < 1e-15);
    }
}
