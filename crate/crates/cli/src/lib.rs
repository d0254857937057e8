//! Command-line front end: configuration, subcommand dispatch and CSV
//! output. The binary is a thin wrapper around [`run`].

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use qpmaxwell::lattice::{full_dof, IndexSet};
use qpmaxwell::problems::{
    error_norms, evaluate_field, solve_eigen, solve_source, AnalyticCurl, EigenProblem, EigenSolution,
    SourceProblem, SourceRhs, SourceSolution,
};
use qpmaxwell::verification::{acceptance_fixtures, quick_fixtures, run_suite};

use crate::config::{ConfigError, FieldConfig, ProblemKind, Reference, RhsKind, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
/// `verify` ran but at least one fixture failed.
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    NotConverged(String),
    #[error(transparent)]
    Solver(qpmaxwell::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0} fixture(s) failed")]
    VerifyFailed(usize),
}

impl From<qpmaxwell::Error> for CliError {
    fn from(e: qpmaxwell::Error) -> Self {
        if e.is_convergence_failure() {
            CliError::NotConverged(e.to_string())
        } else {
            CliError::Solver(e)
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::VerifyFailed(_) => EXIT_VERIFY_FAILED,
            _ => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qpmaxwell", version, about = "Spectral solvers for quasiperiodic Maxwell problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve ∇×(ε⁻¹∇×u) + κu = g for a manufactured u = ∇×w.
    SolveSource(Common),
    /// Smallest eigenpairs of ∇×∇×(ε⁻¹u) = λu on the reduced set.
    SolveEigen(Common),
    /// Errors over a list of (N, M) pairs against a reference.
    Convergence(Common),
    /// Degrees of freedom of the full or reduced set.
    DofCount(Common),
    /// Sample a solution on a lattice of physical points.
    EvalField(Common),
    /// Run the built-in verification fixtures.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "M")]
    pub m: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Output CSV (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub oversample: Option<usize>,
    /// Solver statistics on standard error.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// `quick` (seconds) or `acceptance` (long).
    #[arg(long, default_value = "quick")]
    pub suite: String,
    /// Only fixtures whose name contains this string.
    #[arg(long)]
    pub filter: Option<String>,
    /// Plain-text report (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JUnit-style XML report.
    #[arg(long)]
    pub junit: Option<PathBuf>,
    #[arg(long)]
    pub verbose: bool,
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(level: log::LevelFilter) {
    // a second init (tests running in one process) is harmless
    let _ = env_logger::Builder::new().filter_level(level).target(env_logger::Target::Stderr).try_init();
}

/// Loads the config and applies command-line overrides.
pub fn resolve(args: &Common) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(n) = args.n {
        cfg.truncation = n;
    }
    if args.m.is_some() {
        cfg.bound = args.m;
    }
    if let Some(k) = args.kappa {
        cfg.kappa = k;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.oversample {
        cfg.oversample = o;
    }
    if args.out.is_some() {
        cfg.output.path = args.out.clone();
    }
    if args.verbose {
        cfg.verbosity = "debug".into();
    }
    let located = |e: ConfigError| ConfigError {
        path: Some(args.config.clone()),
        ..e
    };
    cfg.validate().map_err(located)?;
    init_logging(cfg.level().map_err(located)?);
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::SolveSource(a) => {
            let cfg = resolve(&a)?;
            cmd_solve_source(&cfg)
        }
        Command::SolveEigen(a) => {
            let cfg = resolve(&a)?;
            cmd_solve_eigen(&cfg)
        }
        // `output.path` names the solve table; the other commands print
        // unless `--out` is given (eval-field falls back to `output.field_path`)
        Command::Convergence(a) => {
            let mut cfg = resolve(&a)?;
            cfg.output.path = a.out.clone();
            cmd_convergence(&cfg)
        }
        Command::DofCount(a) => {
            let mut cfg = resolve(&a)?;
            cfg.output.path = a.out.clone();
            cmd_dof_count(&cfg)
        }
        Command::EvalField(a) => {
            let mut cfg = resolve(&a)?;
            cfg.output.path = a.out.clone().or_else(|| cfg.output.field_path.clone());
            cmd_eval_field(&cfg)
        }
        Command::Verify(a) => cmd_verify(&a),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn source_problem(cfg: &RunConfig, truncation: usize) -> Result<SourceProblem, CliError> {
    let projection = cfg.projection()?;
    let n = projection.cols();
    let w = cfg
        .w_exprs(n)?
        .ok_or_else(|| ConfigError::new("source problems need a manufactured potential (w1, w2, w3)"))?;
    Ok(SourceProblem {
        projection,
        truncation,
        kappa: cfg.kappa,
        epsilon: cfg.epsilon_expr(n)?,
        rhs: match (cfg.rhs, cfg.analytic_g) {
            (RhsKind::Curl, _) => SourceRhs::CurlOf { w },
            (RhsKind::Manufactured, None) => SourceRhs::Curl { w },
            (RhsKind::Manufactured, Some(reference)) => SourceRhs::CurlAnalytic { w, reference },
        },
        oversample: cfg.oversample,
        gmres: cfg.gmres,
    })
}

fn source_solve(cfg: &RunConfig, truncation: usize) -> Result<SourceSolution, CliError> {
    Ok(solve_source(&source_problem(cfg, truncation)?)?)
}

/// The top-level seed drives the eigensolver start block.
fn eigen_problem(cfg: &RunConfig, truncation: usize, bound: Option<f64>) -> Result<EigenProblem, CliError> {
    let projection = cfg.projection()?;
    let n = projection.cols();
    let mut solver = cfg.eigen.clone();
    solver.seed = cfg.seed;
    Ok(EigenProblem {
        epsilon: cfg.epsilon_expr(n)?,
        projection,
        truncation,
        // an infinite bound keeps the full set
        bound: bound.unwrap_or(f64::MAX),
        solver,
        oversample: cfg.oversample,
    })
}

/// Non-convergence is left in `result.converged` so that callers can write
/// the partial table first.
fn eigen_solve(cfg: &RunConfig, truncation: usize, bound: Option<f64>) -> Result<EigenSolution, CliError> {
    let prob = eigen_problem(cfg, truncation, bound)?;
    Ok(solve_eigen(&prob)?)
}

fn check_converged(sol: &EigenSolution, requested: usize) -> Result<(), CliError> {
    sol.result.clone().into_result(requested).map(|_| ()).map_err(CliError::from)
}

fn sample_errors(cfg: &RunConfig, sol: &SourceSolution) -> Result<(f64, f64), CliError> {
    let projection = cfg.projection()?;
    let w = cfg.w_exprs(projection.cols())?.expect("checked by source_problem");
    let analytic = AnalyticCurl::new(&projection, &w)?;
    let (samples, sample_box) = match &cfg.convergence {
        Some(c) => (c.samples, c.sample_box),
        None => (4096, Default::default()),
    };
    let report = error_norms(
        |pts| evaluate_field(&projection, &sol.set, &sol.coeffs, pts),
        |pts| {
            pts.iter()
                .map(|z| analytic.evaluate(z).map(|v| v.map(|x| Complex64::new(x, 0.0))))
                .collect()
        },
        &sample_box,
        samples,
        cfg.seed,
    )?;
    Ok((report.l2, report.linf))
}

/// One summary row; the error columns stay empty without an exact solution.
fn cmd_solve_source(cfg: &RunConfig) -> Result<(), CliError> {
    let sol = source_solve(cfg, cfg.truncation)?;
    let errors = match sol.exact {
        Some(_) => {
            let (l2, linf) = sample_errors(cfg, &sol)?;
            format!("{},{}", output::sig17(l2), output::sig17(linf))
        }
        None => ",".into(),
    };
    let text = format!(
        "N,DOF,iterations,relative_residual,l2,linf\n{},{},{},{},{errors}\n",
        cfg.truncation,
        sol.set.dof(),
        sol.stats.iterations,
        output::sig17(sol.stats.relative_residual),
    );
    write_out(cfg.output.path.as_deref(), &text)?;
    if let (Some(path), Some(field)) = (&cfg.output.field_path, &cfg.field) {
        dump_field(cfg, field, &sol.set, &sol.coeffs.0, false, Some(path))?;
    }
    Ok(())
}

fn cmd_solve_eigen(cfg: &RunConfig) -> Result<(), CliError> {
    let sol = eigen_solve(cfg, cfg.truncation, cfg.bound)?;
    write_out(cfg.output.path.as_deref(), &output::eigen_csv(&sol.result))?;
    if let (Some(path), Some(field)) = (&cfg.output.field_path, &cfg.field) {
        if let Some(v) = sol.result.eigenvectors.get(field.mode) {
            dump_field(cfg, field, &sol.set, v, true, Some(path))?;
        }
    }
    check_converged(&sol, cfg.eigen.n_eigenvalues)
}

fn cmd_dof_count(cfg: &RunConfig) -> Result<(), CliError> {
    let projection = cfg.projection()?;
    let dof = match cfg.bound {
        None => full_dof(projection.cols(), cfg.truncation)?,
        Some(m) => IndexSet::reduced(&projection, cfg.truncation, m)?.dof(),
    };
    write_out(cfg.output.path.as_deref(), &output::dof_csv(&[(cfg.truncation, cfg.bound, dof)]))
}

fn cmd_convergence(cfg: &RunConfig) -> Result<(), CliError> {
    let study = cfg
        .convergence
        .as_ref()
        .ok_or_else(|| ConfigError::new("convergence needs a `convergence` block"))?;
    let mut text = String::new();
    match cfg.target() {
        ProblemKind::Source => {
            text.push_str("N,M,DOF,l2,linf\n");
            let reference = match study.reference {
                Reference::Analytic => None,
                Reference::Run { truncation, .. } => Some(source_solve(cfg, truncation)?),
            };
            let projection = cfg.projection()?;
            for &(n, _) in &study.pairs {
                let sol = source_solve(cfg, n)?;
                let (l2, linf) = match &reference {
                    None => sample_errors(cfg, &sol)?,
                    Some(r) => {
                        let report = error_norms(
                            |pts| evaluate_field(&projection, &sol.set, &sol.coeffs, pts),
                            |pts| evaluate_field(&projection, &r.set, &r.coeffs, pts),
                            &study.sample_box,
                            study.samples,
                            cfg.seed,
                        )?;
                        (report.l2, report.linf)
                    }
                };
                text.push_str(&format!(
                    "{n},,{},{},{}\n",
                    sol.set.dof(),
                    output::sig17(l2),
                    output::sig17(linf)
                ));
            }
        }
        ProblemKind::Eigen => {
            let Reference::Run { truncation, bound } = study.reference else {
                return Err(ConfigError::new("eigen convergence needs a `run` reference").into());
            };
            let k = study.compare.max(1);
            let reference = eigen_solve(cfg, truncation, bound)?;
            check_converged(&reference, cfg.eigen.n_eigenvalues)?;
            if reference.result.eigenvalues.len() < k {
                return Err(ConfigError::new("convergence.compare exceeds eigen.n_eigenvalues").into());
            }
            text.push_str("N,M,DOF");
            for i in 1..=k {
                text.push_str(&format!(",lambda_{i},error_{i}"));
            }
            text.push('\n');
            for &(n, m) in &study.pairs {
                let sol = eigen_solve(cfg, n, m)?;
                check_converged(&sol, cfg.eigen.n_eigenvalues)?;
                let m = m.map(|m| format!("{m}")).unwrap_or_default();
                text.push_str(&format!("{n},{m},{}", sol.set.dof()));
                for i in 0..k {
                    let l = sol.result.eigenvalues[i];
                    let e = (l - reference.result.eigenvalues[i]).abs();
                    text.push_str(&format!(",{},{}", output::sig17(l), output::sig17(e)));
                }
                text.push('\n');
            }
        }
        other => {
            return Err(ConfigError::new(format!("convergence studies need problem source or eigen, got {other:?}")).into())
        }
    }
    write_out(cfg.output.path.as_deref(), &text)
}

fn cmd_eval_field(cfg: &RunConfig) -> Result<(), CliError> {
    let field = cfg
        .field
        .as_ref()
        .ok_or_else(|| ConfigError::new("eval-field needs a `field` block"))?;
    match cfg.target() {
        ProblemKind::Source => {
            let sol = source_solve(cfg, cfg.truncation)?;
            dump_field(cfg, field, &sol.set, &sol.coeffs.0, false, cfg.output.path.as_deref())
        }
        ProblemKind::Eigen => {
            let sol = eigen_solve(cfg, cfg.truncation, cfg.bound)?;
            check_converged(&sol, cfg.eigen.n_eigenvalues)?;
            let v = sol.result.eigenvectors.get(field.mode).ok_or_else(|| {
                ConfigError::new(format!("field.mode {} exceeds the computed eigenpairs", field.mode))
            })?;
            dump_field(cfg, field, &sol.set, v, true, cfg.output.path.as_deref())
        }
        other => Err(ConfigError::new(format!("eval-field needs problem source or eigen, got {other:?}")).into()),
    }
}

/// Lattice points `lo + i·(hi − lo)/(points − 1)`, first axis fastest.
pub fn lattice_points(f: &FieldConfig) -> Vec<[f64; 3]> {
    let coord = |a: usize, i: usize| {
        if f.points[a] <= 1 {
            f.lo[a]
        } else {
            f.lo[a] + (f.hi[a] - f.lo[a]) * i as f64 / (f.points[a] - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(f.points.iter().product());
    for k in 0..f.points[2] {
        for j in 0..f.points[1] {
            for i in 0..f.points[0] {
                out.push([coord(0, i), coord(1, j), coord(2, k)]);
            }
        }
    }
    out
}

/// An eigenvector carries an arbitrary phase; rotating so that `Σ u·u`
/// (no conjugate) is real and positive makes a real eigenfunction real.
fn dephase(values: &mut [[Complex64; 3]]) {
    let s: Complex64 = values.iter().flat_map(|u| u.iter().map(|c| c * c)).sum();
    if s.norm() > 0.0 {
        let rot = (s / s.norm()).sqrt().conj();
        values.iter_mut().flatten().for_each(|c| *c *= rot);
    }
}

fn dump_field(
    cfg: &RunConfig,
    field: &FieldConfig,
    set: &Arc<IndexSet>,
    coeffs: &[Complex64],
    eigen: bool,
    path: Option<&Path>,
) -> Result<(), CliError> {
    let projection = cfg.projection()?;
    let points = lattice_points(field);
    let coeffs = qpmaxwell::basis::DivFreeCoeffs(coeffs.to_vec());
    let mut values = evaluate_field(&projection, set, &coeffs, &points)?;
    if eigen {
        dephase(&mut values);
    }
    write_out(path, &output::field_csv(&points, &values))
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), CliError> {
    init_logging(if a.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn });
    let fixtures = match a.suite.as_str() {
        "quick" => quick_fixtures(),
        "acceptance" => acceptance_fixtures(),
        other => return Err(ConfigError::new(format!("unknown suite {other:?} (quick | acceptance)")).into()),
    };
    let report = run_suite(&fixtures, a.filter.as_deref());
    write_out(a.out.as_deref(), &report.to_text())?;
    if let Some(p) = &a.junit {
        write_out(Some(p), &report.to_junit_xml())?;
    }
    let failed = report.outcomes.iter().filter(|o| !o.passed()).count();
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_is_first_axis_fastest() {
        let f = FieldConfig {
            lo: [0.0, -1.0, 2.0],
            hi: [1.0, 1.0, 2.0],
            points: [2, 3, 1],
            mode: 0,
        };
        let pts = lattice_points(&f);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], [0.0, -1.0, 2.0]);
        assert_eq!(pts[1], [1.0, -1.0, 2.0]);
        assert_eq!(pts[2], [0.0, 0.0, 2.0]);
        assert_eq!(pts[5], [1.0, 1.0, 2.0]);
    }

    #[test]
    fn dephasing_recovers_a_real_field() {
        let phase = Complex64::from_polar(1.0, 0.7);
        let mut v = vec![
            [phase * 1.0, phase * -2.0, phase * 0.5],
            [phase * 0.25, Complex64::new(0.0, 0.0), phase * 3.0],
        ];
        dephase(&mut v);
        for u in &v {
            for c in u {
                assert!(c.im.abs() < 1e-14);
            }
        }
        assert!((v[1][2].re.abs() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(CliError::from(ConfigError::new("x")).exit_code(), EXIT_CONFIG);
        let e = qpmaxwell::Error::EigenNotConverged {
            converged: 1,
            requested: 2,
            restarts: 3,
        };
        assert_eq!(CliError::from(e).exit_code(), EXIT_NOT_CONVERGED);
        assert_eq!(CliError::from(qpmaxwell::Error::EmptyIndexSet).exit_code(), EXIT_CONFIG);
    }
}
