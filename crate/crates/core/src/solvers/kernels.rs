//! Cache-blocked multi-vector kernels. Vectors are long (10⁵–10⁶ entries)
//! and a Krylov basis does not fit in cache, so each routine walks the rows
//! in short chunks and reuses every loaded chunk against all vectors of the
//! other operand.

use num_complex::Complex64;

use super::DenseMatrix;

type C = Complex64;

const CHUNK: usize = 512;

/// `out[(i, j)] = Σ_r conj(a_i[r]) w[r] b_j[r]`.
pub(crate) fn gram(a: &[&[C]], b: &[&[C]], w: &[f64]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(a.len(), b.len());
    if a.is_empty() || b.is_empty() {
        return out;
    }
    let n = w.len();
    let mut wb = vec![C::new(0.0, 0.0); CHUNK * b.len()];
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let len = end - start;
        let ws = &w[start..end];
        for (j, bj) in b.iter().enumerate() {
            let dst = &mut wb[j * CHUNK..j * CHUNK + len];
            for ((d, x), s) in dst.iter_mut().zip(&bj[start..end]).zip(ws) {
                *d = x * s;
            }
        }
        for (i, ai) in a.iter().enumerate() {
            let ac = &ai[start..end];
            for j in 0..b.len() {
                out[(i, j)] += cdot(ac, &wb[j * CHUNK..j * CHUNK + len]);
            }
        }
        start = end;
    }
    out
}

/// `Σ conj(x) y` with split accumulators.
#[inline]
fn cdot(x: &[C], y: &[C]) -> C {
    let (mut re0, mut im0, mut re1, mut im1) = (0.0, 0.0, 0.0, 0.0);
    let mut xs = x.chunks_exact(2);
    let mut ys = y.chunks_exact(2);
    for (a, b) in (&mut xs).zip(&mut ys) {
        re0 += a[0].re * b[0].re + a[0].im * b[0].im;
        im0 += a[0].re * b[0].im - a[0].im * b[0].re;
        re1 += a[1].re * b[1].re + a[1].im * b[1].im;
        im1 += a[1].re * b[1].im - a[1].im * b[1].re;
    }
    for (a, b) in xs.remainder().iter().zip(ys.remainder()) {
        re0 += a.re * b.re + a.im * b.im;
        im0 += a.re * b.im - a.im * b.re;
    }
    C::new(re0 + re1, im0 + im1)
}

/// `x_j += sign · Σ_i basis_i c[(i, j)]`.
pub(crate) fn accumulate(x: &mut [Vec<C>], basis: &[&[C]], c: &DenseMatrix, sign: f64) {
    debug_assert_eq!(c.rows(), basis.len());
    debug_assert_eq!(c.cols(), x.len());
    if x.is_empty() || basis.is_empty() {
        return;
    }
    let n = x[0].len();
    let zero = C::new(0.0, 0.0);
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        for (i, bi) in basis.iter().enumerate() {
            let bc = &bi[start..end];
            for (j, xj) in x.iter_mut().enumerate() {
                let f = c[(i, j)] * sign;
                if f == zero {
                    continue;
                }
                for (o, v) in xj[start..end].iter_mut().zip(bc) {
                    *o += f * v;
                }
            }
        }
        start = end;
    }
}

/// Columns `Σ_i basis_i c[(i, j)]` for every column `j` of `c`.
pub(crate) fn combine(basis: &[&[C]], c: &DenseMatrix, n: usize) -> Vec<Vec<C>> {
    let mut out = vec![vec![C::new(0.0, 0.0); n]; c.cols()];
    accumulate(&mut out, basis, c, 1.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecs(seed: u64, count: usize, n: usize) -> Vec<Vec<C>> {
        (0..count)
            .map(|k| {
                (0..n)
                    .map(|r| {
                        let t = (seed * 131 + k as u64 * 17 + r as u64) as f64;
                        C::new((t * 0.37).sin(), (t * 0.11).cos())
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn gram_matches_naive() {
        let n = 1300; // spans several chunks with a remainder
        let a = vecs(1, 3, n);
        let b = vecs(2, 4, n);
        let w: Vec<f64> = (0..n).map(|r| 1.0 + (r % 5) as f64).collect();
        let ar: Vec<&[C]> = a.iter().map(Vec::as_slice).collect();
        let br: Vec<&[C]> = b.iter().map(Vec::as_slice).collect();
        let g = gram(&ar, &br, &w);
        for i in 0..3 {
            for j in 0..4 {
                let naive: C = (0..n).map(|r| a[i][r].conj() * w[r] * b[j][r]).sum();
                assert!((g[(i, j)] - naive).norm() < 1e-9 * naive.norm().max(1.0));
            }
        }
    }

    #[test]
    fn combine_and_accumulate() {
        let n = 700;
        let basis = vecs(3, 3, n);
        let br: Vec<&[C]> = basis.iter().map(Vec::as_slice).collect();
        let c = DenseMatrix::from_fn(3, 2, |i, j| C::new(i as f64 + 1.0, j as f64));
        let out = combine(&br, &c, n);
        for j in 0..2 {
            for r in [0, 511, 512, 699] {
                let naive: C = (0..3).map(|i| basis[i][r] * c[(i, j)]).sum();
                assert!((out[j][r] - naive).norm() < 1e-12);
            }
        }
        let mut x = out.clone();
        accumulate(&mut x, &br, &c, -1.0);
        assert!(x.iter().flatten().all(|v| v.norm() < 1e-12));
    }
}
