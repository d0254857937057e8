//! Block Krylov–Schur eigensolver with locking.
//!
//! The Krylov basis is kept orthonormal in a (diagonally) weighted inner
//! product so that operators which are self-adjoint only in that product,
//! such as `∇×∇×(ε⁻¹·)` on `1/|q|²`-weighted coefficients, yield a Hermitian
//! Rayleigh quotient. Each restart extracts Ritz pairs from the projected
//! matrix by Hessenberg reduction and shifted QR, verifies promising pairs
//! with a fresh apply of the original operator, locks the ones meeting the
//! residual tolerance, keeps the best unconverged Ritz vectors, and
//! continues the block recurrence from the residual block of the kept
//! space.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{kernels, schur_decompose, DenseMatrix, GmresConfig, LinearOperator, ShiftInvert};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    SmallestMagnitude,
    LargestMagnitude,
    SmallestReal,
    LargestReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SpectralMode {
    Direct,
    /// Iterate with `(A − σI)⁻¹`; finds eigenvalues nearest `sigma`
    /// regardless of [`Which`].
    ShiftInvert { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenSolverConfig {
    /// Maximum basis size.
    pub krylov_dim: usize,
    pub n_eigenvalues: usize,
    pub which: Which,
    pub mode: SpectralMode,
    /// Bound on `‖Av − λv‖/‖v‖` for a pair to be accepted.
    pub residual_tolerance: f64,
    pub max_restarts: usize,
    pub block_size: usize,
    /// Restarts without a new candidate required after `n_eigenvalues`
    /// pairs are locked.
    pub confirm_cycles: usize,
    pub seed: u64,
    /// Inner solver for shift-invert.
    pub inner: GmresConfig,
}

impl Default for EigenSolverConfig {
    fn default() -> Self {
        Self {
            krylov_dim: 40,
            n_eigenvalues: 6,
            which: Which::SmallestMagnitude,
            mode: SpectralMode::ShiftInvert { sigma: 0.0 },
            residual_tolerance: 1e-9,
            max_restarts: 300,
            block_size: 4,
            confirm_cycles: 2,
            seed: 0,
            inner: GmresConfig {
                rel_tolerance: 1e-12,
                restart: 40,
                max_iterations: 4000,
            },
        }
    }
}

impl EigenSolverConfig {
    fn frontier(&self) -> usize {
        self.block_size
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_eigenvalues == 0 {
            return bad("n_eigenvalues must be ≥ 1".into());
        }
        if self.n_eigenvalues > self.krylov_dim {
            return bad(format!(
                "n_eigenvalues ({}) exceeds krylov_dim ({})",
                self.n_eigenvalues, self.krylov_dim
            ));
        }
        if self.n_eigenvalues > dim {
            return bad(format!("n_eigenvalues ({}) exceeds the dimension {dim}", self.n_eigenvalues));
        }
        if self.block_size == 0 {
            return bad("block_size must be ≥ 1".into());
        }
        if self.krylov_dim < 2 * self.frontier() + 1 {
            return bad(format!(
                "krylov_dim ({}) must be at least 2·block_size + 1 = {}",
                self.krylov_dim,
                2 * self.frontier() + 1
            ));
        }
        if !(self.residual_tolerance > 0.0) {
            return bad("residual_tolerance must be positive".into());
        }
        if let SpectralMode::ShiftInvert { sigma } = self.mode {
            if !sigma.is_finite() {
                return bad("shift must be finite".into());
            }
            self.inner.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `‖Av − λv‖/‖v‖` from a fresh apply.
    pub residual_norms: Vec<f64>,
    /// Unit Euclidean norm.
    pub eigenvectors: Vec<Vec<Complex64>>,
    /// Restart cycles.
    pub iterations: usize,
    /// Applications of the iteration operator (inner solves in shift-invert).
    pub operator_applies: usize,
    pub inner_iterations: usize,
    /// `max |Im λ| / max(1, |Re λ|)` before the imaginary parts were dropped.
    pub max_relative_imag: f64,
    /// False when `max_restarts` ran out; the result then holds what was
    /// locked so far.
    pub converged: bool,
}

impl EigenResult {
    pub fn into_result(self, requested: usize) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::EigenNotConverged {
                converged: self.eigenvalues.len(),
                requested,
                restarts: self.iterations,
            })
        }
    }
}

/// Score below which a pair cannot enter the wanted set, once `nev` pairs
/// are locked: the `nev`-th best locked score less a relative band that
/// keeps members of a degenerate cluster.
fn wanted_cutoff(locked: &[Locked], nev: usize) -> Option<f64> {
    if locked.len() < nev {
        return None;
    }
    let mut scores: Vec<f64> = locked.iter().map(|l| l.score).collect();
    scores.sort_by(|x, y| y.total_cmp(x));
    let threshold = scores[nev - 1];
    Some(threshold - 1e-3 * threshold.abs().max(f64::MIN_POSITIVE))
}

/// Eigenpairs of `a` in the Euclidean inner product.
pub fn arnoldi_eigs<A: LinearOperator + ?Sized>(a: &mut A, cfg: &EigenSolverConfig) -> Result<EigenResult> {
    arnoldi_eigs_with(a, None, None, cfg)
}

struct Locked {
    x: Vec<Complex64>,
    lambda: Complex64,
    residual: f64,
    score: f64,
}

struct Solver<'w> {
    w: &'w [f64],
    rng: ChaCha8Rng,
    dim: usize,
}

impl Solver<'_> {
    fn dot(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        x.iter().zip(y).zip(self.w).map(|((a, b), w)| a.conj() * b * w).sum()
    }

    fn norm(&self, x: &[Complex64]) -> f64 {
        x.iter().zip(self.w).map(|(a, w)| a.norm_sqr() * w).sum::<f64>().sqrt()
    }

    fn random(&mut self) -> Vec<Complex64> {
        (0..self.dim)
            .map(|_| Complex64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0)))
            .collect()
    }

    /// Block classical Gram–Schmidt of `xs` against `basis`, repeated for
    /// the columns that lost more than half their norm in the last pass
    /// (at most three passes). Returns the final norms.
    fn project(&self, xs: &mut Vec<Vec<Complex64>>, basis: &[&[Complex64]]) -> Vec<f64> {
        let mut norms: Vec<f64> = xs.iter().map(|x| self.norm(x)).collect();
        if basis.is_empty() {
            return norms;
        }
        let mut active: Vec<usize> = (0..xs.len()).filter(|&j| norms[j] > 0.0).collect();
        for _ in 0..3 {
            if active.is_empty() {
                break;
            }
            let mut work: Vec<Vec<Complex64>> = active.iter().map(|&j| std::mem::take(&mut xs[j])).collect();
            let refs: Vec<&[Complex64]> = work.iter().map(Vec::as_slice).collect();
            let c = kernels::gram(basis, &refs, self.w);
            kernels::accumulate(&mut work, basis, &c, -1.0);
            let mut next = Vec::new();
            for (&j, x) in active.iter().zip(work) {
                let after = self.norm(&x);
                if after < 0.5 * norms[j] && after > 0.0 {
                    next.push(j);
                }
                norms[j] = after;
                xs[j] = x;
            }
            active = next;
        }
        norms
    }

    /// Orthonormalizes the block `xs` against `basis` and within itself.
    /// Numerically dependent columns are replaced by random directions; the
    /// result can only be shorter than `xs` if no independent direction is
    /// left.
    fn admit_block(&mut self, mut xs: Vec<Vec<Complex64>>, basis: &[&[Complex64]]) -> Vec<Vec<Complex64>> {
        let before: Vec<f64> = xs.iter().map(|x| self.norm(x)).collect();
        self.project(&mut xs, basis);
        let mut accepted: Vec<Vec<Complex64>> = Vec::with_capacity(xs.len());
        for (x, b0) in xs.into_iter().zip(before) {
            if let Some(v) = self.finish(x, b0, basis, &accepted) {
                accepted.push(v);
                continue;
            }
            for _ in 0..3 {
                let r = self.random();
                let b0 = self.norm(&r);
                let mut single = vec![r];
                self.project(&mut single, basis);
                if let Some(v) = self.finish(single.pop().unwrap(), b0, basis, &accepted) {
                    accepted.push(v);
                    break;
                }
            }
        }
        accepted
    }

    /// In-block step of [`Self::admit_block`] for one column already
    /// orthogonal to `basis`.
    fn finish(
        &self,
        x: Vec<Complex64>,
        before: f64,
        basis: &[&[Complex64]],
        accepted: &[Vec<Complex64>],
    ) -> Option<Vec<Complex64>> {
        if before == 0.0 {
            return None;
        }
        let n1 = self.norm(&x);
        let mut single = vec![x];
        let acc: Vec<&[Complex64]> = accepted.iter().map(Vec::as_slice).collect();
        let mut n2 = self.project(&mut single, &acc)[0];
        if n2 < 0.5 * n1 && !basis.is_empty() {
            // lost most of its norm in-block: orthogonality against the
            // basis has degraded by the same factor
            let all: Vec<&[Complex64]> = basis.iter().copied().chain(acc.iter().copied()).collect();
            n2 = self.project(&mut single, &all)[0];
        }
        if n2 <= 1e-14 * before || n2 == 0.0 {
            return None;
        }
        let mut x = single.pop().unwrap();
        x.iter_mut().for_each(|v| *v /= n2);
        Some(x)
    }
}

fn score(which: Which, mode: SpectralMode, theta: Complex64) -> f64 {
    match mode {
        SpectralMode::ShiftInvert { .. } => theta.norm(),
        SpectralMode::Direct => match which {
            Which::SmallestMagnitude => -theta.norm(),
            Which::LargestMagnitude => theta.norm(),
            Which::SmallestReal => -theta.re,
            Which::LargestReal => theta.re,
        },
    }
}

fn refs(v: &[Vec<Complex64>]) -> Vec<&[Complex64]> {
    v.iter().map(Vec::as_slice).collect()
}

fn basis_with_locked<'a>(locked: &'a [Locked], v: &'a [Vec<Complex64>]) -> Vec<&'a [Complex64]> {
    locked.iter().map(|l| l.x.as_slice()).chain(v.iter().map(Vec::as_slice)).collect()
}

/// Eigenpairs of `a` with the basis orthonormal in the inner product
/// weighted by `weights` (Euclidean when `None`). `diagonal` feeds the Jacobi
/// preconditioner of the shift-invert inner solves.
///
/// Locking assumes `a` is normal in the weighted product (self-adjoint in
/// all uses here); for strongly non-normal operators locked vectors are
/// Schur vectors and later pairs may fail verification.
pub fn arnoldi_eigs_with<A: LinearOperator + ?Sized>(
    a: &mut A,
    weights: Option<&[f64]>,
    diagonal: Option<&[f64]>,
    cfg: &EigenSolverConfig,
) -> Result<EigenResult> {
    let n = a.dim();
    cfg.validate(n)?;
    let ones;
    let w = match weights {
        Some(w) if w.len() == n => {
            if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidParameter("inner-product weights must be positive".into()));
            }
            w
        }
        Some(w) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: w.len(),
            })
        }
        None => {
            ones = vec![1.0; n];
            &ones
        }
    };
    let mut transform = match cfg.mode {
        SpectralMode::Direct => None,
        SpectralMode::ShiftInvert { sigma } => {
            let zeros;
            let d = match diagonal {
                Some(d) if d.len() == n => d,
                Some(d) => {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: d.len(),
                    })
                }
                None => {
                    zeros = vec![0.0; n];
                    &zeros
                }
            };
            Some(ShiftInvert::new(sigma, d, cfg.inner)?)
        }
    };

    let mut s = Solver {
        w,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        dim: n,
    };
    let m = cfg.krylov_dim.min(n);
    let fs = cfg.frontier();
    let nev = cfg.n_eigenvalues;
    let zero = Complex64::new(0.0, 0.0);

    let mut locked: Vec<Locked> = Vec::new();
    let mut av: Vec<Vec<Complex64>> = Vec::new();
    let mut g = DenseMatrix::zeros(m, m);
    let mut m2 = DenseMatrix::zeros(m, m);
    let mut applies = 0usize;
    let mut restarts = 0usize;
    let mut quiet = 0usize;
    let mut converged = false;
    let mut y = vec![zero; n];

    // starting block
    let start_block: Vec<Vec<Complex64>> = (0..fs.min(m)).map(|_| s.random()).collect();
    let mut v = s.admit_block(start_block, &[]);

    loop {
        // ---- expansion: each block is the orthonormalized image of the
        // previous one
        let mut exhausted = false;
        let mut tail: Vec<Vec<Complex64>> = Vec::new();
        loop {
            let start = av.len();
            let end = v.len();
            for j in start..end {
                let mut out = vec![zero; n];
                match transform.as_mut() {
                    Some(si) => si.apply(a, &v[j], &mut out)?,
                    None => a.apply(&v[j], &mut out)?,
                }
                applies += 1;
                av.push(out);
            }
            if end > start {
                let (vr, avr) = (refs(&v[..end]), refs(&av[..end]));
                let col = kernels::gram(&vr, &avr[start..end], w);
                let row = kernels::gram(&vr[start..end], &avr[..start], w);
                let sq = kernels::gram(&avr, &avr[start..end], w);
                for (jj, j) in (start..end).enumerate() {
                    for i in 0..end {
                        g[(i, j)] = col[(i, jj)];
                    }
                    for i in 0..start {
                        g[(j, i)] = row[(jj, i)];
                    }
                    for i in 0..=j {
                        m2[(i, j)] = sq[(i, jj)];
                        m2[(j, i)] = sq[(i, jj)].conj();
                    }
                }
            }
            if end == start {
                exhausted = true;
                break;
            }
            let images = av[start..end].to_vec();
            let fresh = {
                let basis = basis_with_locked(&locked, &v);
                s.admit_block(images, &basis)
            };
            if fresh.is_empty() {
                exhausted = true;
                break;
            }
            if v.len() + fresh.len() > m {
                // the next block is the residual block of the whole space
                tail = fresh;
                break;
            }
            v.extend(fresh);
        }

        // ---- Rayleigh–Ritz
        let p = av.len();
        let gp = g.block(0, 0, p, p);
        let schur = schur_decompose(&gp)?;
        let thetas = schur.eigenvalues();
        // for a Hermitian projection the Schur vectors are orthonormal
        // eigenvectors, also inside degenerate clusters
        let hermitian = gp.hermitian_defect() <= 1e-10 * gp.max_abs();
        let svecs = if hermitian { schur.z.clone() } else { schur.eigenvectors() };
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| {
            score(cfg.which, cfg.mode, thetas[j])
                .total_cmp(&score(cfg.which, cfg.mode, thetas[i]))
                .then(i.cmp(&j))
        });

        let remaining = nev.saturating_sub(locked.len());
        let window = (remaining + cfg.block_size).min(p);
        // once nev pairs are locked, only pairs that would displace one of
        // them are worth verifying
        let cutoff = wanted_cutoff(&locked, nev);
        let mut candidates: Vec<usize> = Vec::new();
        for &i in &order[..window] {
            if let Some(c) = cutoff {
                if score(cfg.which, cfg.mode, thetas[i]) < c {
                    continue;
                }
            }
            let sv = svecs.column(i);
            // ‖AVs − θVs‖² = sᴴ M₂ s − |θ|² for a Ritz pair
            let mut quad = 0.0;
            for c in 0..p {
                let mut acc = zero;
                for r in 0..p {
                    acc += m2[(r, c)] * sv[r];
                }
                quad += (sv[c].conj() * acc).re;
            }
            let rho = (quad - thetas[i].norm_sqr()).max(0.0).sqrt();
            if rho <= 1e-6 * thetas[i].norm().max(f64::MIN_POSITIVE) {
                candidates.push(i);
            }
        }
        let mut locked_now: Vec<usize> = Vec::new();
        let mut best_residual = f64::INFINITY;
        if !candidates.is_empty() {
            let coeffs = DenseMatrix::from_fn(p, candidates.len(), |r, c| svecs.column(candidates[c])[r]);
            let xs = kernels::combine(&refs(&v[..p]), &coeffs, n);
            for (&i, mut x) in candidates.iter().zip(xs) {
                a.apply(&x, &mut y)?;
                let xx = s.dot(&x, &x);
                let lambda = s.dot(&x, &y) / xx;
                let xnorm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                let res = y
                    .iter()
                    .zip(&x)
                    .map(|(yi, xi)| (yi - lambda * xi).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
                    / xnorm;
                best_residual = best_residual.min(res);
                if res > cfg.residual_tolerance {
                    continue;
                }
                let prior: Vec<&[Complex64]> = locked.iter().map(|l| l.x.as_slice()).collect();
                let b0 = s.norm(&x);
                let mut single = vec![x];
                let after = s.project(&mut single, &prior)[0];
                if after <= 1e-8 * b0 {
                    continue;
                }
                x = single.pop().unwrap();
                x.iter_mut().for_each(|c| *c /= after);
                let sc = match &transform {
                    Some(si) => score(cfg.which, cfg.mode, (lambda - si.sigma()).inv()),
                    None => score(cfg.which, cfg.mode, lambda),
                };
                if cutoff.is_some_and(|c| sc < c) {
                    continue;
                }
                locked.push(Locked {
                    x,
                    lambda,
                    residual: res,
                    score: sc,
                });
                locked_now.push(i);
            }
        }
        restarts += 1;
        log::debug!(
            "restart {restarts}: basis {p}, locked {} (+{}), best candidate residual {best_residual:.3e}, applies {applies}",
            locked.len(),
            locked_now.len()
        );

        // ---- completeness
        if let Some(c) = wanted_cutoff(&locked, nev) {
            let best_open = order
                .iter()
                .filter(|i| !locked_now.contains(i))
                .map(|&i| score(cfg.which, cfg.mode, thetas[i]))
                .fold(f64::NEG_INFINITY, f64::max);
            if locked_now.is_empty() && best_open < c {
                quiet += 1;
            } else if locked_now.is_empty() {
                quiet = 0;
            }
            if quiet >= cfg.confirm_cycles || exhausted {
                converged = true;
                break;
            }
        } else if exhausted && locked_now.is_empty() && p + locked.len() >= n {
            // the whole space has been searched
            break;
        }
        if restarts >= cfg.max_restarts {
            break;
        }

        // ---- restart: keep the best unlocked Ritz vectors
        let keep = (nev.saturating_sub(locked.len()) + cfg.block_size)
            .min(m - 2 * fs)
            .max(1);
        let mut coords: Vec<Vec<Complex64>> = Vec::new();
        let mut locked_coords: Vec<Vec<Complex64>> = Vec::new();
        for &i in &locked_now {
            let mut c = svecs.column(i).to_vec();
            if euclid_orthonormalize(&mut c, &locked_coords) {
                locked_coords.push(c);
            }
        }
        for &i in order.iter().filter(|i| !locked_now.contains(i)) {
            if coords.len() >= keep {
                break;
            }
            let mut c = svecs.column(i).to_vec();
            if euclid_orthonormalize(&mut c, &locked_coords) && euclid_orthonormalize(&mut c, &coords) {
                coords.push(c);
            }
        }
        let kp = coords.len();
        let zq = DenseMatrix::from_fn(p, kp, |r, c| coords[c][r]);
        let zh = zq.adjoint();
        let gk = zh.matmul(&gp).matmul(&zq);
        let mk = zh.matmul(&m2.block(0, 0, p, p)).matmul(&zq);
        v = kernels::combine(&refs(&v[..p]), &zq, n);
        av = kernels::combine(&refs(&av[..p]), &zq, n);
        g = DenseMatrix::zeros(m, m);
        m2 = DenseMatrix::zeros(m, m);
        for c in 0..kp {
            for r in 0..kp {
                g[(r, c)] = gk[(r, c)];
                m2[(r, c)] = mk[(r, c)];
            }
        }

        // Continue from the residual block: AV' lies in span(V', tail), so
        // expanding the tail keeps the space a block Krylov space. Random
        // directions only fill in for a rank-deficient tail.
        let mut frontier = std::mem::take(&mut tail);
        while frontier.len() < fs {
            frontier.push(s.random());
        }
        let fresh = {
            let basis = basis_with_locked(&locked, &v);
            s.admit_block(frontier, &basis)
        };
        v.extend(fresh);
    }

    // ---- assemble
    locked.sort_by(|x, y| y.score.total_cmp(&x.score));
    locked.truncate(nev);
    let mut out: Vec<(Complex64, f64, Vec<Complex64>)> = locked
        .into_iter()
        .map(|l| {
            let norm = l.x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            (l.lambda, l.residual, l.x.into_iter().map(|c| c / norm).collect())
        })
        .collect();
    out.sort_by(|x, y| {
        x.0.re
            .total_cmp(&y.0.re)
            .then_with(|| dominant_index(&x.2).cmp(&dominant_index(&y.2)))
    });
    let max_relative_imag = out
        .iter()
        .map(|(l, _, _)| l.im.abs() / l.re.abs().max(1.0))
        .fold(0.0, f64::max);
    let inner_iterations = transform.as_ref().map_or(0, |t| t.inner_iterations);
    Ok(EigenResult {
        eigenvalues: out.iter().map(|o| o.0.re).collect(),
        residual_norms: out.iter().map(|o| o.1).collect(),
        eigenvectors: out.into_iter().map(|o| o.2).collect(),
        iterations: restarts,
        operator_applies: applies,
        inner_iterations,
        max_relative_imag,
        converged,
    })
}

/// Index of the first coefficient of maximal magnitude (deterministic
/// tie-breaking for degenerate eigenvalues).
fn dominant_index(x: &[Complex64]) -> usize {
    let mut best = 0;
    let mut bm = -1.0;
    for (i, c) in x.iter().enumerate() {
        if c.norm() > bm * (1.0 + 1e-9) {
            bm = c.norm();
            best = i;
        }
    }
    best
}

/// Euclidean Gram–Schmidt (twice) in coefficient space.
fn euclid_orthonormalize(c: &mut [Complex64], against: &[Vec<Complex64>]) -> bool {
    let before = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    for _ in 0..2 {
        for a in against {
            let d: Complex64 = a.iter().zip(c.iter()).map(|(x, y)| x.conj() * y).sum();
            for (ci, ai) in c.iter_mut().zip(a) {
                *ci -= d * ai;
            }
        }
    }
    let after = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if after <= 1e-8 * before || after == 0.0 {
        return false;
    }
    c.iter_mut().for_each(|x| *x /= after);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::Diagonal;

    fn cfg(nev: usize, which: Which, mode: SpectralMode) -> EigenSolverConfig {
        EigenSolverConfig {
            krylov_dim: 20,
            n_eigenvalues: nev,
            which,
            mode,
            block_size: 2,
            ..Default::default()
        }
    }

    #[test]
    fn largest_of_three() {
        let mut a = Diagonal::real(&[1.0, 2.0, 3.0]);
        let c = EigenSolverConfig {
            krylov_dim: 3,
            block_size: 1,
            ..cfg(1, Which::LargestMagnitude, SpectralMode::Direct)
        };
        let r = arnoldi_eigs(&mut a, &c).unwrap();
        assert!(r.converged);
        assert_eq!(r.eigenvalues.len(), 1);
        assert!((r.eigenvalues[0] - 3.0).abs() < 1e-12);
        assert!(r.residual_norms[0] < 1e-12);
    }

    #[test]
    fn degenerate_clusters_with_small_blocks() {
        // multiplicities 5, 4, then a tail
        let mut d = vec![1.0; 5];
        d.extend([2.0; 4]);
        d.extend((0..200).map(|i| 5.0 + i as f64 * 0.1));
        let mut a = Diagonal::real(&d);
        let c = EigenSolverConfig {
            krylov_dim: 30,
            ..cfg(9, Which::SmallestMagnitude, SpectralMode::ShiftInvert { sigma: 0.0 })
        };
        let r = arnoldi_eigs_with(&mut a, None, Some(&d), &c).unwrap();
        assert!(r.converged);
        let expect = [1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0];
        assert_eq!(r.eigenvalues.len(), 9);
        for (l, e) in r.eigenvalues.iter().zip(expect) {
            assert!((l - e).abs() < 1e-12, "{:?}", r.eigenvalues);
        }
        assert!(r.residual_norms.iter().all(|&x| x <= 1e-9));
    }

    #[test]
    fn direct_and_shift_invert_agree() {
        let d: Vec<f64> = (1..=60).map(|i| (i as f64).sqrt()).collect();
        let mut a = Diagonal::real(&d);
        let si = arnoldi_eigs_with(
            &mut a,
            None,
            Some(&d),
            &cfg(4, Which::SmallestMagnitude, SpectralMode::ShiftInvert { sigma: 0.0 }),
        )
        .unwrap();
        let dir = arnoldi_eigs(&mut a, &EigenSolverConfig {
            krylov_dim: 40,
            max_restarts: 2000,
            ..cfg(4, Which::SmallestReal, SpectralMode::Direct)
        })
        .unwrap();
        assert!(si.converged && dir.converged);
        for (x, y) in si.eigenvalues.iter().zip(&dir.eigenvalues) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn weighted_self_adjoint_operator() {
        // A = D·S with S Hermitian positive and D positive diagonal is
        // self-adjoint in the D⁻¹-weighted product.
        let n = 40;
        let dvals: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let a = DenseMatrix::from_fn(n, n, |r, c| {
            let s = if r == c {
                Complex64::new(3.0, 0.0)
            } else if r.abs_diff(c) == 1 {
                Complex64::new(0.5, if r < c { 0.2 } else { -0.2 })
            } else {
                Complex64::new(0.0, 0.0)
            };
            s * dvals[r]
        });
        let w: Vec<f64> = dvals.iter().map(|d| 1.0 / d).collect();
        let mut op = a.clone();
        let r = arnoldi_eigs_with(
            &mut op,
            Some(&w),
            None,
            &cfg(3, Which::SmallestMagnitude, SpectralMode::ShiftInvert { sigma: 0.0 }),
        )
        .unwrap();
        assert!(r.converged);
        assert!(r.max_relative_imag < 1e-8);
        let dense = crate::solvers::schur_decompose(&a).unwrap();
        let mut ev: Vec<f64> = dense.eigenvalues().iter().map(|l| l.re).collect();
        ev.sort_by(f64::total_cmp);
        for (x, y) in r.eigenvalues.iter().zip(&ev) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let d: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let mut a = Diagonal::real(&d);
        let c = cfg(3, Which::SmallestMagnitude, SpectralMode::ShiftInvert { sigma: 0.0 });
        let r1 = arnoldi_eigs_with(&mut a, None, Some(&d), &c).unwrap();
        let r2 = arnoldi_eigs_with(&mut a, None, Some(&d), &c).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn stagnation_is_flagged() {
        let d: Vec<f64> = (1..=400).map(|i| 1.0 + i as f64 * 1e-3).collect();
        let mut a = Diagonal::real(&d);
        let c = EigenSolverConfig {
            max_restarts: 2,
            ..cfg(3, Which::SmallestReal, SpectralMode::Direct)
        };
        let r = arnoldi_eigs(&mut a, &c).unwrap();
        assert!(!r.converged);
        assert!(r.clone().into_result(3).is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut a = Diagonal::real(&[1.0; 10]);
        for c in [
            EigenSolverConfig { n_eigenvalues: 0, ..Default::default() },
            EigenSolverConfig { n_eigenvalues: 50, krylov_dim: 40, ..Default::default() },
            EigenSolverConfig { krylov_dim: 8, n_eigenvalues: 2, ..Default::default() },
            EigenSolverConfig { n_eigenvalues: 11, krylov_dim: 40, ..Default::default() },
        ] {
            assert!(arnoldi_eigs(&mut a, &c).is_err());
        }
    }
}
