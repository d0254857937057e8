//! End-to-end drivers: source and eigen solves, manufactured solutions,
//! physical-space evaluation, error norms and coefficient decay profiles.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{pad3, vector_to_divfree, DivFreeCoeffs, FrameTables, VectorModeCoeffs};
use crate::error::{Error, Result};
use crate::lattice::{IndexSet, ProjectionMatrix};
use crate::operators::{EigenOperator, OperatorPlan};
use crate::permittivity::{sample_scalar, Expression, PermittivityField};
use crate::solvers::{
    arnoldi_eigs_with, gmres_preconditioned, EigenResult, EigenSolverConfig, GmresConfig, GmresStats, Jacobi,
};
use crate::transforms::{FftNd, GridSpec, ModeMap};

/// Right-hand side of a source problem.
#[derive(Debug, Clone)]
pub enum SourceRhs {
    /// `g = ∇×(ε⁻¹∇×u) + κu` for the manufactured solution `u = ∇×w`,
    /// with `w` given by parent expressions on the torus.
    Curl { w: [Expression; 3] },
    /// As `Curl`, with `g` evaluated on a finer full set with `reference`
    /// modes per axis (see [`manufactured_rhs_analytic`]).
    CurlAnalytic { w: [Expression; 3], reference: usize },
    /// `g = ∇×w` itself; the solution is not known in closed form.
    CurlOf { w: [Expression; 3] },
    Coefficients(DivFreeCoeffs),
}

#[derive(Debug, Clone)]
pub struct SourceProblem {
    pub projection: ProjectionMatrix,
    pub truncation: usize,
    pub kappa: f64,
    pub epsilon: Expression,
    pub rhs: SourceRhs,
    /// Grid refinement factor for the ε product (1 = N points per axis).
    pub oversample: usize,
    pub gmres: GmresConfig,
}

#[derive(Debug, Clone)]
pub struct SourceSolution {
    pub set: Arc<IndexSet>,
    pub coeffs: DivFreeCoeffs,
    pub stats: GmresStats,
    /// Coefficients of the manufactured solution, for [`SourceRhs::Curl`].
    pub exact: Option<DivFreeCoeffs>,
}

#[derive(Debug, Clone)]
pub struct EigenProblem {
    pub projection: ProjectionMatrix,
    pub truncation: usize,
    /// Reduced bound `M` on `‖Pk‖∞`.
    pub bound: f64,
    pub epsilon: Expression,
    pub solver: EigenSolverConfig,
    pub oversample: usize,
}

#[derive(Debug, Clone)]
pub struct EigenSolution {
    /// Reduced index set; eigenvectors use its layout.
    pub set: Arc<IndexSet>,
    pub result: EigenResult,
}

impl EigenSolution {
    pub fn eigenvector(&self, i: usize) -> DivFreeCoeffs {
        DivFreeCoeffs(self.result.eigenvectors[i].clone())
    }
}

/// Axis-aligned sampling box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl SampleBox {
    pub fn cube(half_width: f64) -> Self {
        Self {
            lo: [-half_width; 3],
            hi: [half_width; 3],
        }
    }
}

impl Default for SampleBox {
    fn default() -> Self {
        Self::cube(10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub l2: f64,
    pub linf: f64,
    pub n_samples: usize,
    #[serde(rename = "box")]
    pub sample_box: SampleBox,
}

fn check_oversample(oversample: usize) -> Result<()> {
    if oversample == 0 {
        return Err(Error::InvalidParameter("oversample must be ≥ 1".into()));
    }
    Ok(())
}

fn check_vars(e: &Expression, n: usize) -> Result<()> {
    if e.num_vars() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: e.num_vars(),
        });
    }
    Ok(())
}

/// Operator plan on `set` with ε sampled on an `oversample·N` grid.
pub fn build_plan(set: Arc<IndexSet>, epsilon: &Expression, kappa: f64, oversample: usize) -> Result<OperatorPlan> {
    check_oversample(oversample)?;
    check_vars(epsilon, set.lifted_dim())?;
    let spec = GridSpec::for_set(&set, oversample)?;
    let eps = PermittivityField::sample(epsilon, spec.points_per_dim())?;
    OperatorPlan::new(set, &eps, kappa)
}

/// Coefficients of `u = ∇×w` on the plan's index set, and `g = A u` for
/// the plan's source operator.
///
/// The parents of `w` are sampled on the plan grid, transformed, and the
/// curl `i q × ŵ` is taken per mode. Modes without a `−k` partner in the
/// box are dropped so that `u` stays real.
pub fn manufactured_rhs(w: &[Expression; 3], plan: &mut OperatorPlan) -> Result<(DivFreeCoeffs, DivFreeCoeffs)> {
    let set = plan.set().clone();
    let u = curl_coefficients(w, &set, plan.tables(), plan.spec())?;
    let mut g = vec![Complex64::new(0.0, 0.0); set.dof()];
    plan.apply_source(&u.0, &mut g)?;
    Ok((DivFreeCoeffs(g), u))
}

/// Same as [`manufactured_rhs`], but `g` is evaluated on a finer full set
/// with `reference_truncation` modes per axis and restricted to `plan`'s
/// modes, so it carries the continuous rather than the discrete operator.
pub fn manufactured_rhs_analytic(
    w: &[Expression; 3],
    epsilon: &Expression,
    plan: &OperatorPlan,
    reference_truncation: usize,
) -> Result<(DivFreeCoeffs, DivFreeCoeffs)> {
    let set = plan.set().clone();
    if reference_truncation < set.truncation() {
        return Err(Error::InvalidParameter(format!(
            "reference truncation {reference_truncation} is below N = {}",
            set.truncation()
        )));
    }
    let projection = projection_of(&set)?;
    let fine = Arc::new(IndexSet::full(&projection, reference_truncation)?);
    let mut fine_plan = build_plan(fine.clone(), epsilon, plan.kappa(), 1)?;
    let (g_fine, _) = manufactured_rhs(w, &mut fine_plan)?;
    let u = curl_coefficients(w, &set, plan.tables(), plan.spec())?;
    let mut g = DivFreeCoeffs::zeros(set.dof());
    for j in 0..set.len() {
        if set.is_unpaired(j) {
            continue;
        }
        let m = fine.linear_index(set.k(j)).ok_or_else(|| {
            Error::InvalidParameter(format!("mode {:?} missing from the reference set", set.k(j)))
        })?;
        let (a, b) = g_fine.pair(m);
        g.set_pair(j, a, b);
    }
    Ok((g, u))
}

/// Recovers `P` from the wavevectors of the unit modes of a full or reduced
/// set (needed when only the set is at hand).
fn projection_of(set: &IndexSet) -> Result<ProjectionMatrix> {
    let (n, d) = (set.lifted_dim(), set.physical_dim());
    let mut entries = vec![0.0; d * n];
    for c in 0..n {
        let mut k = vec![0i32; n];
        k[c] = 1;
        let j = set.linear_index(&k).ok_or_else(|| {
            Error::InvalidParameter("unit modes must be present to recover the projection".into())
        })?;
        for r in 0..d {
            entries[r * n + c] = set.q(j)[r];
        }
    }
    ProjectionMatrix::new(d, n, entries)
}

fn curl_coefficients(
    w: &[Expression; 3],
    set: &IndexSet,
    tables: &FrameTables,
    spec: GridSpec,
) -> Result<DivFreeCoeffs> {
    let n = set.lifted_dim();
    let map = ModeMap::new(set, spec)?;
    let mut fft = FftNd::new(spec);
    let zero = Complex64::new(0.0, 0.0);
    let mut hat = VectorModeCoeffs::zeros(set.len());
    for (c, e) in w.iter().enumerate() {
        check_vars(e, n)?;
        if e.as_constant().is_some() {
            continue; // a constant has no nonzero modes
        }
        let samples = sample_scalar(e, spec.points_per_dim())?;
        let mut grid: Vec<Complex64> = samples.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut grid);
        for (j, &pos) in map.positions().iter().enumerate() {
            hat.0[j][c] = grid[pos];
        }
    }
    let i = Complex64::new(0.0, 1.0);
    let mut curl = VectorModeCoeffs::zeros(set.len());
    for j in 0..set.len() {
        if set.is_unpaired(j) {
            curl.0[j] = [zero; 3];
            continue;
        }
        let q = pad3(set.q(j));
        let a = hat.0[j];
        curl.0[j] = [
            i * (q[1] * a[2] - q[2] * a[1]),
            i * (q[2] * a[0] - q[0] * a[2]),
            i * (q[0] * a[1] - q[1] * a[0]),
        ];
    }
    vector_to_divfree(tables, &curl)
}

/// Solves the source problem on the full index set.
pub fn solve_source(prob: &SourceProblem) -> Result<SourceSolution> {
    if !(prob.kappa > 0.0) || !prob.kappa.is_finite() {
        return Err(Error::InvalidParameter(format!("kappa must be > 0, got {}", prob.kappa)));
    }
    let set = Arc::new(IndexSet::full(&prob.projection, prob.truncation)?);
    let mut plan = build_plan(set.clone(), &prob.epsilon, prob.kappa, prob.oversample)?;
    let (g, exact) = match &prob.rhs {
        SourceRhs::Curl { w } => {
            let (g, u) = manufactured_rhs(w, &mut plan)?;
            (g, Some(u))
        }
        SourceRhs::CurlAnalytic { w, reference } => {
            let (g, u) = manufactured_rhs_analytic(w, &prob.epsilon, &plan, *reference)?;
            (g, Some(u))
        }
        SourceRhs::CurlOf { w } => (curl_coefficients(w, &set, plan.tables(), plan.spec())?, None),
        SourceRhs::Coefficients(g) => {
            if g.len() != set.dof() {
                return Err(Error::DimensionMismatch {
                    expected: set.dof(),
                    actual: g.len(),
                });
            }
            (g.clone(), None)
        }
    };
    let precond = Jacobi::new(&plan.source_diagonal());
    let mut op = crate::operators::SourceOperator(plan);
    let (x, stats) = gmres_preconditioned(&mut op, &precond, &g.0, None, &prob.gmres)?;
    let stats = stats.into_result()?;
    log::info!(
        "source solve: DOF {}, {} GMRES iterations, relative residual {:.3e}",
        set.dof(),
        stats.iterations,
        stats.relative_residual
    );
    Ok(SourceSolution {
        set,
        coeffs: DivFreeCoeffs(x),
        stats,
        exact,
    })
}

/// Smallest eigenpairs of `∇×∇×(ε⁻¹u) = λu` on the reduced index set.
///
/// Non-convergence is reported through `result.converged`, not as an error.
pub fn solve_eigen(prob: &EigenProblem) -> Result<EigenSolution> {
    let set = Arc::new(IndexSet::reduced(&prob.projection, prob.truncation, prob.bound)?);
    if set.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    let plan = build_plan(set.clone(), &prob.epsilon, 0.0, prob.oversample)?;
    let weights = plan.eigen_inner_product_weights();
    let diagonal = plan.eigen_diagonal();
    let mut op = EigenOperator(plan);
    let result = arnoldi_eigs_with(&mut op, Some(&weights), Some(&diagonal), &prob.solver)?;
    log::info!(
        "eigen solve: DOF {}, {} restarts, {} operator applies, {} inner iterations",
        set.dof(),
        result.iterations,
        result.operator_applies,
        result.inner_iterations
    );
    Ok(EigenSolution { set, result })
}

/// Samples `u(z) = Σ (û¹d₁ + û²d₂) e^{i⟨Pk, z⟩}` at each point.
///
/// The sum runs over the mode box as a tensor contraction: with
/// `x = Pᵀz`, `e^{i⟨Pk,z⟩} = Πᵢ e^{i kᵢ xᵢ}`, contracted one axis at a time.
pub fn evaluate_field(
    projection: &ProjectionMatrix,
    set: &IndexSet,
    coeffs: &DivFreeCoeffs,
    points: &[[f64; 3]],
) -> Result<Vec<[Complex64; 3]>> {
    if coeffs.len() != set.dof() {
        return Err(Error::DimensionMismatch {
            expected: set.dof(),
            actual: coeffs.len(),
        });
    }
    if projection.cols() != set.lifted_dim() || projection.rows() != set.physical_dim() {
        return Err(Error::InvalidProjection("projection does not match the index set".into()));
    }
    let tables = FrameTables::assemble(set)?;
    let n = set.lifted_dim();
    let nt = set.truncation();
    let half = (nt / 2) as i32;
    let zero = Complex64::new(0.0, 0.0);
    // box-ordered vector coefficients, component-major
    let blen = set.box_len();
    let mut boxed = vec![zero; 3 * blen];
    for j in 0..set.len() {
        let (a, b) = coeffs.pair(j);
        if a == zero && b == zero {
            continue;
        }
        let (d1, d2) = (tables.d1(j), tables.d2(j));
        let bi = set.box_index(j);
        for c in 0..3 {
            boxed[c * blen + bi] = a * d1[c] + b * d2[c];
        }
    }
    let d = projection.rows();
    let mut out = Vec::with_capacity(points.len());
    let mut buf = vec![zero; blen];
    let mut next = vec![zero; blen / nt.max(1)];
    let mut phases = vec![zero; nt];
    for z in points {
        let x = projection.lift_point(&z[..d])?;
        let mut value = [zero; 3];
        for c in 0..3 {
            buf.copy_from_slice(&boxed[c * blen..(c + 1) * blen]);
            let mut len = blen;
            for xi in x.iter().take(n) {
                for (m, p) in phases.iter_mut().enumerate() {
                    *p = Complex64::from_polar(1.0, (m as i32 - half) as f64 * xi);
                }
                let outer = len / nt;
                for o in 0..outer {
                    let row = &buf[o * nt..(o + 1) * nt];
                    next[o] = row.iter().zip(&phases).map(|(a, p)| a * p).sum();
                }
                buf[..outer].copy_from_slice(&next[..outer]);
                len = outer;
            }
            value[c] = buf[0];
        }
        out.push(value);
    }
    Ok(out)
}

/// `∇×w` evaluated pointwise from the parent expressions of `w`.
pub struct AnalyticCurl {
    projection: ProjectionMatrix,
    /// `grad[j][i] = ∂wⱼ/∂xᵢ`
    grad: Vec<Vec<Expression>>,
}

impl AnalyticCurl {
    pub fn new(projection: &ProjectionMatrix, w: &[Expression; 3]) -> Result<Self> {
        let n = projection.cols();
        let mut grad = Vec::with_capacity(3);
        for e in w {
            check_vars(e, n)?;
            grad.push((0..n).map(|i| e.derivative(i)).collect());
        }
        Ok(Self {
            projection: projection.clone(),
            grad,
        })
    }

    pub fn evaluate(&self, z: &[f64; 3]) -> Result<[f64; 3]> {
        let d = self.projection.rows();
        let n = self.projection.cols();
        let x = self.projection.lift_point(&z[..d])?;
        // J[j][a] = ∂wⱼ/∂z_a = Σᵢ P[a,i] ∂ᵢWⱼ
        let mut jac = [[0.0; 3]; 3];
        for (j, row) in self.grad.iter().enumerate() {
            for (i, e) in row.iter().enumerate().take(n) {
                let v = e.evaluate(&x)?;
                if v == 0.0 {
                    continue;
                }
                for (a, ja) in jac[j].iter_mut().enumerate().take(d) {
                    *ja += self.projection.entry(a, i) * v;
                }
            }
        }
        Ok([
            jac[2][1] - jac[1][2],
            jac[0][2] - jac[2][0],
            jac[1][0] - jac[0][1],
        ])
    }
}

/// Deterministic uniform points in `b`.
pub fn sample_points(b: &SampleBox, n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut p = [0.0; 3];
            for (a, pa) in p.iter_mut().enumerate() {
                *pa = if b.hi[a] > b.lo[a] { rng.gen_range(b.lo[a]..b.hi[a]) } else { b.lo[a] };
            }
            p
        })
        .collect()
}

/// Discrete L² (root mean square) and L∞ norms of the pointwise vector
/// difference between two fields on `n_samples` seeded points.
pub fn error_norms<F, G>(
    numeric: F,
    reference: G,
    sample_box: &SampleBox,
    n_samples: usize,
    seed: u64,
) -> Result<ErrorReport>
where
    F: FnOnce(&[[f64; 3]]) -> Result<Vec<[Complex64; 3]>>,
    G: FnOnce(&[[f64; 3]]) -> Result<Vec<[Complex64; 3]>>,
{
    if n_samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let points = sample_points(sample_box, n_samples, seed);
    let a = numeric(&points)?;
    let b = reference(&points)?;
    if a.len() != points.len() || b.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            actual: a.len().min(b.len()),
        });
    }
    let mut sum = 0.0;
    let mut linf: f64 = 0.0;
    for (u, v) in a.iter().zip(&b) {
        let d2: f64 = (0..3).map(|c| (u[c] - v[c]).norm_sqr()).sum();
        sum += d2;
        linf = linf.max(d2.sqrt());
    }
    Ok(ErrorReport {
        l2: (sum / n_samples as f64).sqrt(),
        linf,
        n_samples,
        sample_box: *sample_box,
    })
}

/// Real vectors as complex, for feeding analytic fields to [`error_norms`].
pub fn complexify(v: Vec<[f64; 3]>) -> Vec<[Complex64; 3]> {
    v.into_iter()
        .map(|p| p.map(|x| Complex64::new(x, 0.0)))
        .collect()
}

/// Binned envelope of `max(|û¹|, |û²|)` against `|q|`: `n_bins` equal-width
/// bins spanning the set's `|q|` range, as `(bin centre, max)` pairs.
pub fn coefficient_decay_profile(set: &IndexSet, coeffs: &DivFreeCoeffs, n_bins: usize) -> Result<Vec<(f64, f64)>> {
    if coeffs.len() != set.dof() {
        return Err(Error::DimensionMismatch {
            expected: set.dof(),
            actual: coeffs.len(),
        });
    }
    if n_bins == 0 {
        return Err(Error::InvalidParameter("need at least one bin".into()));
    }
    let qn = set.qnorms();
    let lo = qn.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = qn.iter().copied().fold(0.0, f64::max);
    let width = ((hi - lo) / n_bins as f64).max(f64::MIN_POSITIVE);
    let mut env = vec![0.0f64; n_bins];
    for (j, &q) in qn.iter().enumerate() {
        let b = (((q - lo) / width) as usize).min(n_bins - 1);
        let (a, c) = coeffs.pair(j);
        env[b] = env[b].max(a.norm()).max(c.norm());
    }
    Ok(env
        .into_iter()
        .enumerate()
        .map(|(b, m)| (lo + (b as f64 + 0.5) * width, m))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permittivity::parse_expression;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn exprs(w: [&str; 3], n: usize) -> [Expression; 3] {
        w.map(|s| parse_expression(s, n).unwrap())
    }

    #[test]
    fn single_mode_source_solve() {
        let p = ProjectionMatrix::identity(3).unwrap();
        let set = IndexSet::full(&p, 4).unwrap();
        let k = [1, 0, 0];
        let j = set.linear_index(&k).unwrap();
        let kappa = 2.0;
        let mut g = DivFreeCoeffs::zeros(set.dof());
        g.set_pair(j, c(set.qnorms()[j].powi(2) + kappa), c(0.0));
        let prob = SourceProblem {
            projection: p,
            truncation: 4,
            kappa,
            epsilon: parse_expression("1", 3).unwrap(),
            rhs: SourceRhs::Coefficients(g),
            oversample: 1,
            gmres: GmresConfig::default(),
        };
        let sol = solve_source(&prob).unwrap();
        for i in 0..set.dof() {
            let expect = if i == j { c(1.0) } else { c(0.0) };
            assert!((sol.coeffs.0[i] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let p = ProjectionMatrix::identity(3).unwrap();
        let prob = SourceProblem {
            projection: p,
            truncation: 4,
            kappa: 1.0,
            epsilon: parse_expression("2+cos(x1)", 3).unwrap(),
            rhs: SourceRhs::Curl {
                w: exprs(["0", "0", "0"], 3),
            },
            oversample: 1,
            gmres: GmresConfig::default(),
        };
        let sol = solve_source(&prob).unwrap();
        assert_eq!(sol.coeffs.norm(), 0.0);
        assert_eq!(sol.exact.unwrap().norm(), 0.0);
    }

    #[test]
    fn rejects_nonpositive_kappa() {
        let prob = SourceProblem {
            projection: ProjectionMatrix::identity(3).unwrap(),
            truncation: 4,
            kappa: 0.0,
            epsilon: parse_expression("1", 3).unwrap(),
            rhs: SourceRhs::Curl {
                w: exprs(["0", "0", "0"], 3),
            },
            oversample: 1,
            gmres: GmresConfig::default(),
        };
        assert!(solve_source(&prob).is_err());
    }

    #[test]
    fn curl_of_sine_sits_on_unit_modes() {
        let p = ProjectionMatrix::identity(3).unwrap();
        let set = Arc::new(IndexSet::full(&p, 4).unwrap());
        let mut plan = build_plan(set.clone(), &parse_expression("1", 3).unwrap(), 1.0, 1).unwrap();
        let (_, u) = manufactured_rhs(&exprs(["0", "0", "sin(x1)"], 3), &mut plan).unwrap();
        let plus = set.linear_index(&[1, 0, 0]).unwrap();
        let minus = set.linear_index(&[-1, 0, 0]).unwrap();
        for j in 0..set.len() {
            let (a, b) = u.pair(j);
            let mag = a.norm() + b.norm();
            if j == plus || j == minus {
                assert!(mag > 0.1);
            } else {
                assert!(mag < 1e-14, "mode {:?}", set.k(j));
            }
        }
        assert!(u.reality_defect(&set) < 1e-14);
        // u = ∇×(0,0,sin x) = (0, −cos x, 0)
        let pts = [[0.3, 1.0, -2.0], [1.7, 0.0, 0.4]];
        let vals = evaluate_field(&p, &set, &u, &pts).unwrap();
        for (v, z) in vals.iter().zip(pts) {
            assert!(v[0].norm() < 1e-14 && v[2].norm() < 1e-14);
            assert!((v[1] - c(-z[0].cos())).norm() < 1e-13);
        }
    }

    #[test]
    fn field_at_origin_is_frame_vector() {
        let p = ProjectionMatrix::stacked_identity(2f64.sqrt()).unwrap();
        let set = IndexSet::full(&p, 2).unwrap();
        let tables = FrameTables::assemble(&set).unwrap();
        let j = 5;
        let mut u = DivFreeCoeffs::zeros(set.dof());
        u.set_pair(j, c(1.0), c(0.0));
        let v = evaluate_field(&p, &set, &u, &[[0.0; 3]]).unwrap();
        for a in 0..3 {
            assert!((v[0][a] - c(tables.d1(j)[a])).norm() < 1e-15);
        }
        // plane wave phase at a general point
        let z = [0.4, -2.5, 7.0];
        let phase: f64 = set.q(j).iter().zip(z).map(|(q, x)| q * x).sum();
        let v = evaluate_field(&p, &set, &u, &[z]).unwrap();
        for a in 0..3 {
            let expect = Complex64::from_polar(1.0, phase) * tables.d1(j)[a];
            assert!((v[0][a] - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn analytic_curl_matches_spectral_curl() {
        let p = ProjectionMatrix::identity(3).unwrap();
        let w = exprs(["cos(x2)", "sin(x3)*2", "cos(x1)+sin(x2)"], 3);
        let set = Arc::new(IndexSet::full(&p, 4).unwrap());
        let mut plan = build_plan(set.clone(), &parse_expression("1", 3).unwrap(), 1.0, 1).unwrap();
        let (_, u) = manufactured_rhs(&w, &mut plan).unwrap();
        let curl = AnalyticCurl::new(&p, &w).unwrap();
        let report = error_norms(
            |pts| evaluate_field(&p, &set, &u, pts),
            |pts| Ok(complexify(pts.iter().map(|z| curl.evaluate(z).unwrap()).collect())),
            &SampleBox::cube(3.0),
            50,
            1,
        )
        .unwrap();
        assert!(report.linf < 1e-13, "{report:?}");
    }

    #[test]
    fn error_norm_of_constant_offset() {
        let delta = 0.25;
        let r = error_norms(
            |pts| Ok(vec![[c(1.0), c(0.0), c(0.0)]; pts.len()]),
            |pts| Ok(vec![[c(1.0 + delta), c(0.0), c(0.0)]; pts.len()]),
            &SampleBox::default(),
            64,
            3,
        )
        .unwrap();
        assert!((r.l2 - delta).abs() < 1e-15 && (r.linf - delta).abs() < 1e-15);
        let same = error_norms(
            |pts| Ok(vec![[c(1.0); 3]; pts.len()]),
            |pts| Ok(vec![[c(1.0); 3]; pts.len()]),
            &SampleBox::default(),
            8,
            3,
        )
        .unwrap();
        assert_eq!((same.l2, same.linf), (0.0, 0.0));
    }

    #[test]
    fn points_are_seeded_and_inside() {
        let b = SampleBox::default();
        let a = sample_points(&b, 100, 7);
        assert_eq!(a, sample_points(&b, 100, 7));
        assert_ne!(a, sample_points(&b, 100, 8));
        assert!(a.iter().flatten().all(|v| (-10.0..10.0).contains(v)));
    }

    #[test]
    fn single_mode_profile_has_one_bin() {
        let p = ProjectionMatrix::identity(3).unwrap();
        let set = IndexSet::full(&p, 4).unwrap();
        let mut u = DivFreeCoeffs::zeros(set.dof());
        u.set_pair(3, c(0.5), c(0.0));
        let prof = coefficient_decay_profile(&set, &u, 5).unwrap();
        assert_eq!(prof.len(), 5);
        assert_eq!(prof.iter().filter(|(_, m)| *m > 0.0).count(), 1);
    }

    #[test]
    fn integer_lattice_spectrum() {
        // P = I₃, ε = 1: eigenvalues |k|² with multiplicity 2·#{k}
        let prob = EigenProblem {
            projection: ProjectionMatrix::identity(3).unwrap(),
            truncation: 4,
            bound: 10.0,
            epsilon: parse_expression("1", 3).unwrap(),
            solver: EigenSolverConfig {
                n_eigenvalues: 18,
                krylov_dim: 40,
                block_size: 4,
                ..Default::default()
            },
            oversample: 1,
        };
        let sol = solve_eigen(&prob).unwrap();
        assert!(sol.result.converged);
        // |k|² = 1 has 6 modes, |k|² = 2 has 12 → first 12 are 1, next 6 are 2
        for (i, l) in sol.result.eigenvalues.iter().enumerate() {
            let expect = if i < 12 { 1.0 } else { 2.0 };
            assert!((l - expect).abs() < 1e-10, "{i}: {l}");
        }
    }
}
