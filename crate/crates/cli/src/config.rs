//! JSON run configuration. One file fully determines a run; command-line
//! flags override individual fields.

use std::fmt;
use std::path::{Path, PathBuf};

use qpmaxwell::lattice::ProjectionMatrix;
use qpmaxwell::permittivity::{parse_expression, Expression};
use qpmaxwell::problems::SampleBox;
use qpmaxwell::solvers::{EigenSolverConfig, GmresConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Source,
    Eigen,
    Convergence,
    DofCount,
    EvalField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Problem solved by `convergence` and `eval-field`; the other kinds
    /// defer to [`RunConfig::target`].
    #[serde(default = "default_problem")]
    pub problem: ProblemKind,
    /// Row-major entries of the d×n projection matrix, as constant
    /// expressions ("sqrt(5)") or numbers.
    pub projection_matrix: Vec<Vec<Entry>>,
    #[serde(rename = "N")]
    pub truncation: usize,
    /// Reduced bound on `‖Pk‖∞`; absent means the full set.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: String,
    /// Manufactured-solution potential `w`, `u = ∇×w`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w3: Option<String>,
    #[serde(default)]
    pub rhs: RhsKind,
    /// Evaluate the right-hand side on a finer full set with this many
    /// modes per axis instead of through the discrete operator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_g: Option<usize>,
    #[serde(default)]
    pub gmres: GmresConfig,
    #[serde(default)]
    pub eigen: EigenSolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default = "default_verbosity")]
    pub verbosity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldConfig>,
}

/// How `w` defines a source problem.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhsKind {
    /// `u = ∇×w` is the exact solution and `g` follows from it.
    #[default]
    Manufactured,
    /// `g = ∇×w`; errors need a high-resolution reference run.
    Curl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Expression(String),
}

impl Entry {
    fn value(&self) -> Result<f64, String> {
        match self {
            Entry::Number(v) => Ok(*v),
            Entry::Expression(s) => {
                let e = parse_expression(s, 0).map_err(|e| format!("projection entry {s:?}: {e}"))?;
                e.evaluate(&[]).map_err(|e| format!("projection entry {s:?}: {e}"))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Main CSV; standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Optional field dump after a solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// `(N, M)` pairs; `M = null` means the full set.
    pub pairs: Vec<(usize, Option<f64>)>,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, rename = "box")]
    pub sample_box: SampleBox,
    /// Eigenvalues compared per row (eigen studies).
    #[serde(default = "default_compare")]
    pub compare: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum Reference {
    /// The manufactured solution `∇×w` (source problems).
    #[default]
    Analytic,
    /// A high-resolution run of the same problem.
    Run {
        #[serde(rename = "N")]
        truncation: usize,
        #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    /// Lattice points per axis (1 pins the axis at `lo`).
    pub points: [usize; 3],
    /// Eigenvector index (eigen problems), zero-based.
    #[serde(default)]
    pub mode: usize,
}

fn default_problem() -> ProblemKind {
    ProblemKind::Eigen
}
fn default_kappa() -> f64 {
    1.0
}
fn default_epsilon() -> String {
    "1".into()
}
fn default_oversample() -> usize {
    1
}
fn default_verbosity() -> String {
    "warn".into()
}
fn default_samples() -> usize {
    4096
}
fn default_compare() -> usize {
    1
}

/// A configuration problem, with the file it came from and, for syntax
/// errors, the position.
#[derive(Debug)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<(usize, usize)>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            path: None,
            line: None,
            message: message.into(),
        }
    }

    fn at(mut self, path: &Path) -> Self {
        self.path.get_or_insert_with(|| path.to_path_buf());
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}", p.display())?;
            if let Some((l, c)) = self.line {
                write!(f, ":{l}:{c}")?;
            }
            write!(f, ": ")?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            path: None,
            line: Some((e.line(), e.column())),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read config: {e}")).at(path))?;
        let cfg = Self::from_json(&text).map_err(|e| e.at(path))?;
        cfg.validate().map_err(|e| e.at(path))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that can be checked without solving: N even,
    /// expressions parse with the right variable count, solver settings.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = self.projection()?;
        if self.truncation < 2 || self.truncation % 2 != 0 {
            return Err(ConfigError::new(format!("N must be even and ≥ 2, got {}", self.truncation)));
        }
        if let Some(m) = self.bound {
            if !(m > 0.0) {
                return Err(ConfigError::new(format!("M must be positive, got {m}")));
            }
        }
        if self.oversample == 0 {
            return Err(ConfigError::new("oversample must be ≥ 1"));
        }
        self.epsilon_expr(p.cols())?;
        self.w_exprs(p.cols())?;
        self.gmres.validate().map_err(|e| ConfigError::new(format!("gmres: {e}")))?;
        if self.rhs == RhsKind::Curl && self.analytic_g.is_some() {
            return Err(ConfigError::new("analytic_g applies to manufactured right-hand sides only"));
        }
        if let Some(c) = &self.convergence {
            if self.rhs == RhsKind::Curl && self.target() == ProblemKind::Source && c.reference == Reference::Analytic {
                return Err(ConfigError::new("rhs \"curl\" has no analytic solution; use a `run` reference"));
            }
            if c.pairs.is_empty() {
                return Err(ConfigError::new("convergence.pairs is empty"));
            }
            if let Some((n, _)) = c.pairs.iter().find(|(n, _)| *n < 2 || n % 2 != 0) {
                return Err(ConfigError::new(format!("convergence.pairs: N must be even, got {n}")));
            }
        }
        if let Some(f) = &self.field {
            if f.points.iter().any(|&k| k == 0) {
                return Err(ConfigError::new("field.points must be ≥ 1 per axis"));
            }
        }
        Ok(())
    }

    /// Source or eigen: the explicit `problem`, else source exactly when a
    /// potential `w` is given.
    pub fn target(&self) -> ProblemKind {
        match self.problem {
            ProblemKind::Source | ProblemKind::Eigen => self.problem,
            _ if self.w1.is_some() || self.w2.is_some() || self.w3.is_some() => ProblemKind::Source,
            _ => ProblemKind::Eigen,
        }
    }

    pub fn projection(&self) -> Result<ProjectionMatrix, ConfigError> {
        let rows = self
            .projection_matrix
            .iter()
            .map(|r| r.iter().map(Entry::value).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(ConfigError::new)?;
        ProjectionMatrix::from_rows(&rows).map_err(|e| ConfigError::new(format!("projection_matrix: {e}")))
    }

    pub fn epsilon_expr(&self, n: usize) -> Result<Expression, ConfigError> {
        parse_expression(&self.epsilon, n).map_err(|e| ConfigError::new(format!("epsilon: {e}")))
    }

    /// The manufactured potential, if any component is given.
    pub fn w_exprs(&self, n: usize) -> Result<Option<[Expression; 3]>, ConfigError> {
        if self.w1.is_none() && self.w2.is_none() && self.w3.is_none() {
            return Ok(None);
        }
        let parse = |key: &str, s: &Option<String>| {
            parse_expression(s.as_deref().unwrap_or("0"), n).map_err(|e| ConfigError::new(format!("{key}: {e}")))
        };
        Ok(Some([parse("w1", &self.w1)?, parse("w2", &self.w2)?, parse("w3", &self.w3)?]))
    }

    pub fn level(&self) -> Result<log::LevelFilter, ConfigError> {
        self.verbosity
            .parse()
            .map_err(|_| ConfigError::new(format!("unknown verbosity {:?}", self.verbosity)))
    }
}
