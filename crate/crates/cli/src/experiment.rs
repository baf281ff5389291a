use std::path::Path;

use ashbm::analysis::{convergence_factor, median, quantile, TraceRecord};
use ashbm::solvers::{self, Termination};
use ashbm::{LinearSystem, SamplingScheme};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{is_breakdown, CliError, CliResult};
use crate::io;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed of trial `i`: the `(i+1)`-th SplitMix64 output of a generator
/// whose state starts at `base`.
pub fn trial_seed(base: u64, i: usize) -> u64 {
    splitmix64(base.wrapping_add(GOLDEN_GAMMA.wrapping_mul(i as u64 + 1)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            median: median(&sorted),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            q25: quantile(&sorted, 0.25),
            q75: quantile(&sorted, 0.75),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub result: TrialResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrialResult {
    Finished {
        iterations: usize,
        termination: Termination,
        final_rse: Option<f64>,
        final_residual_norm: f64,
        /// Per-iteration factor `RSE_K^{1/K}`; absent when undefined.
        convergence_factor: Option<f64>,
        fallbacks: usize,
    },
    Failed {
        breakdown: bool,
        error: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub solver: String,
    pub scheme: String,
    pub trials: usize,
    pub failed: usize,
    pub iterations: Option<Stats>,
    pub final_rse: Option<Stats>,
    pub convergence_factor: Option<Stats>,
    pub outcomes: Vec<TrialOutcome>,
}

impl Summary {
    pub fn from_outcomes(config: &ExperimentConfig, outcomes: Vec<TrialOutcome>) -> Self {
        let mut iterations = Vec::new();
        let mut rses = Vec::new();
        let mut factors = Vec::new();
        for o in &outcomes {
            if let TrialResult::Finished { iterations: k, final_rse, convergence_factor, .. } = &o.result {
                iterations.push(*k as f64);
                rses.extend(*final_rse);
                factors.extend(*convergence_factor);
            }
        }
        Self {
            solver: config.solver.to_string(),
            scheme: config.sampling.to_string(),
            trials: outcomes.len(),
            failed: outcomes.len() - iterations.len(),
            iterations: Stats::of(&iterations),
            final_rse: Stats::of(&rses),
            convergence_factor: Stats::of(&factors),
            outcomes,
        }
    }

    /// Whether any trial stopped on a breakdown of the method.
    pub fn has_breakdown(&self) -> bool {
        self.outcomes
            .iter()
            .any(|o| matches!(o.result, TrialResult::Failed { breakdown: true, .. }))
    }
}

/// A prepared experiment: the system and scheme are built once and shared
/// read-only by all trials.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub system: LinearSystem,
    pub scheme: SamplingScheme,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> CliResult<Self> {
        config.validate()?;
        let system = config.load_system()?;
        Self::with_system(config, system)
    }

    /// The partition, if any, is drawn from the experiment seed.
    pub fn with_system(config: ExperimentConfig, system: LinearSystem) -> CliResult<Self> {
        config.validate()?;
        let scheme = SamplingScheme::from_spec(config.sampling, &system.a, config.seed)?;
        Ok(Self { config, system, scheme })
    }

    pub fn run_trial(&self, trial: usize) -> (TrialOutcome, Vec<TraceRecord>) {
        let seed = trial_seed(self.config.seed, trial);
        let solver_config = self.config.solver_config(seed);
        let (result, trace) = match solvers::solve(self.config.solver, &self.system, &self.scheme, &solver_config) {
            Ok(report) => {
                let factor = report
                    .final_rse
                    .and_then(|r| convergence_factor(r, report.iterations).ok());
                let result = TrialResult::Finished {
                    iterations: report.iterations,
                    termination: report.termination,
                    final_rse: report.final_rse,
                    final_residual_norm: report.final_residual_norm,
                    convergence_factor: factor,
                    fallbacks: report.fallbacks,
                };
                (result, report.trace)
            }
            Err(e) => {
                let result = TrialResult::Failed { breakdown: is_breakdown(&e), error: e.to_string() };
                (result, Vec::new())
            }
        };
        (TrialOutcome { trial, seed, result }, trace)
    }

    /// Runs every trial on a pool of `config.threads` workers. With `trace_dir`,
    /// trial `i` writes `trace_<i>.<ext>` there.
    pub fn run(&self, trace_dir: Option<&Path>) -> CliResult<Summary> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.threads)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
        let format = self.config.format;
        let outcomes: CliResult<Vec<TrialOutcome>> = pool.install(|| {
            (0..self.config.trials)
                .into_par_iter()
                .map(|i| {
                    let (outcome, trace) = self.run_trial(i);
                    if let Some(dir) = trace_dir {
                        let path = dir.join(format!("trace_{i:04}.{}", format.extension()));
                        io::write_trace(&path, &trace, format)?;
                    }
                    Ok(outcome)
                })
                .collect()
        });
        Ok(Summary::from_outcomes(&self.config, outcomes?))
    }
}
