use std::path::{Path, PathBuf};

use ashbm::problems::{self, GaussianSpec, LinearSystem};
use ashbm::solvers::{SolverConfig, SolverId, ZetaSchedule};
use ashbm::SchemeSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io;

/// Where the linear system comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemSource {
    /// Synthetic `A = U D V^T`; the problem seed defaults to the experiment seed.
    Generate {
        m: usize,
        n: usize,
        rank: usize,
        kappa: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Matrix Market file. Without `rhs`, `b = A x*` for a Gaussian `x*`
    /// drawn from the experiment seed.
    Mtx {
        matrix: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rhs: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(CliError::Config(format!("unknown format {s:?} (expected csv or json)"))),
        }
    }
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// A complete experiment description, stored as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub sampling: SchemeSpec,
    pub solver: SolverId,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub zeta: ZetaSchedule,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Worker threads; 0 lets the pool decide.
    #[serde(default)]
    pub threads: usize,
    /// Trace stride; 0 keeps only the first and last records.
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_beta() -> f64 {
    0.7
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iters() -> usize {
    1_000_000
}

fn default_trace_every() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSource, sampling: SchemeSpec, solver: SolverId) -> Self {
        Self {
            problem,
            sampling,
            solver,
            trials: 1,
            seed: 0,
            zeta: ZetaSchedule::default(),
            beta: default_beta(),
            tol: default_tol(),
            max_iters: default_max_iters(),
            out: None,
            format: OutputFormat::Csv,
            threads: 0,
            trace_every: default_trace_every(),
            record_wall_time: false,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.trials == 0 {
            return Err(CliError::Config("trials must be >= 1".into()));
        }
        if let ProblemSource::Generate { kappa, .. } = self.problem {
            if !kappa.is_finite() {
                return Err(CliError::Config(format!("kappa must be finite, got {kappa}")));
            }
        }
        if self.solver == SolverId::Cgne && self.sampling != SchemeSpec::Identity {
            return Err(CliError::Config("cgne is deterministic; use --sampling identity".into()));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(CliError::Config(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        self.solver_config(0).validate()?;
        Ok(())
    }

    /// Solver settings for one run with the given stream seed.
    pub fn solver_config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            zeta: self.zeta.clone(),
            max_iters: self.max_iters,
            rse_tolerance: self.tol,
            momentum_beta: self.beta,
            seed,
            trace_every: self.trace_every,
            record_wall_time: self.record_wall_time,
            ..SolverConfig::default()
        }
    }

    /// Builds the system and attaches its minimum-norm solution.
    pub fn load_system(&self) -> CliResult<LinearSystem> {
        match &self.problem {
            ProblemSource::Generate { m, n, rank, kappa, seed } => {
                let spec = GaussianSpec { m: *m, n: *n, rank: *rank, kappa: *kappa };
                Ok(problems::generate_gaussian_problem(spec, seed.unwrap_or(self.seed))?)
            }
            ProblemSource::Mtx { matrix, rhs } => {
                let a = problems::load_matrix_market(matrix)?;
                let system = match rhs {
                    Some(path) => LinearSystem::new(a, io::read_vector(path)?)?,
                    None => {
                        let x_star = problems::gaussian_vector(a.cols(), self.seed);
                        LinearSystem::from_planted(a, x_star)?
                    }
                };
                Ok(problems::attach_min_norm(system)?)
            }
        }
    }
}
