use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ashbm::analysis::{theoretical_bound, BoundReport};
use ashbm::problems::{generate_gaussian_problem, GaussianSpec};
use ashbm::solvers::{SolverId, ZetaSchedule};
use ashbm::{LinearSystem, SamplingScheme, SchemeSpec};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::error::{CliError, CliResult};
use crate::experiment::{Experiment, Stats, Summary, TrialResult};
use crate::io;

pub const MATRIX_FILE: &str = "A.mtx";
pub const RHS_FILE: &str = "b.txt";
pub const MIN_NORM_FILE: &str = "x_min_norm.txt";
pub const PLANTED_FILE: &str = "x_star.txt";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BOUND_FILE: &str = "bound.json";

/// Paths written by [`cmd_generate`].
#[derive(Clone, Debug)]
pub struct GeneratedFiles {
    pub matrix: PathBuf,
    pub rhs: PathBuf,
    pub min_norm: PathBuf,
    pub planted: PathBuf,
}

/// Writes `A.mtx`, `b.txt`, `x_min_norm.txt` and `x_star.txt` into `out`.
pub fn cmd_generate(spec: GaussianSpec, seed: u64, out: &Path) -> CliResult<GeneratedFiles> {
    let system = generate_gaussian_problem(spec, seed)?;
    fs::create_dir_all(out)?;
    let files = GeneratedFiles {
        matrix: out.join(MATRIX_FILE),
        rhs: out.join(RHS_FILE),
        min_norm: out.join(MIN_NORM_FILE),
        planted: out.join(PLANTED_FILE),
    };
    io::write_matrix_market(&files.matrix, &system.a)?;
    io::write_vector(&files.rhs, &system.b)?;
    io::write_vector(&files.min_norm, system.min_norm.as_deref().expect("generator attaches x_min"))?;
    io::write_vector(&files.planted, system.planted_solution.as_deref().expect("generator plants x*"))?;
    Ok(files)
}

/// Runs all trials, writes one trace per trial and `summary.json` when an
/// output directory is configured.
pub fn cmd_solve(config: &ExperimentConfig) -> CliResult<Summary> {
    let experiment = Experiment::prepare(config.clone())?;
    solve_prepared(&experiment)
}

pub fn solve_prepared(experiment: &Experiment) -> CliResult<Summary> {
    let out = experiment.config.out.as_deref();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    let summary = experiment.run(out)?;
    if let Some(dir) = out {
        io::write_json(&dir.join(SUMMARY_FILE), &summary)?;
    }
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: usize,
    pub solver: SolverId,
    pub trials: usize,
    pub failed: usize,
    pub iterations: Option<Stats>,
    /// Iterations scaled by `p / m`.
    pub full_iterations: Option<Stats>,
    pub median_final_rse: Option<f64>,
    pub median_convergence_factor: Option<f64>,
}

impl SweepRow {
    fn new(p: usize, m: usize, solver: SolverId, summary: &Summary) -> Self {
        let scale = p as f64 / m as f64;
        let full: Vec<f64> = summary
            .outcomes
            .iter()
            .filter_map(|o| match o.result {
                TrialResult::Finished { iterations, .. } => Some(iterations as f64 * scale),
                TrialResult::Failed { .. } => None,
            })
            .collect();
        Self {
            p,
            solver,
            trials: summary.trials,
            failed: summary.failed,
            iterations: summary.iterations,
            full_iterations: Stats::of(&full),
            median_final_rse: summary.final_rse.map(|s| s.median),
            median_convergence_factor: summary.convergence_factor.map(|s| s.median),
        }
    }
}

fn with_block_size(spec: SchemeSpec, p: usize) -> CliResult<SchemeSpec> {
    match spec {
        SchemeSpec::Partition(_) => Ok(SchemeSpec::Partition(p)),
        SchemeSpec::Uniform(_) => Ok(SchemeSpec::Uniform(p)),
        other => Err(CliError::Config(format!(
            "sweep needs partition or uniform sampling, got {other}"
        ))),
    }
}

/// One row per `(p, solver)` pair, `p` outermost. The system is built once.
pub fn cmd_sweep(config: &ExperimentConfig, p_list: &[usize], solvers: &[SolverId]) -> CliResult<Vec<SweepRow>> {
    if p_list.is_empty() || solvers.is_empty() {
        return Err(CliError::Config("sweep needs at least one block size and one solver".into()));
    }
    with_block_size(config.sampling, 1)?;
    config.validate()?;
    let system = config.load_system()?;
    sweep_system(config, &system, p_list, solvers)
}

pub fn sweep_system(
    config: &ExperimentConfig,
    system: &LinearSystem,
    p_list: &[usize],
    solvers: &[SolverId],
) -> CliResult<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(p_list.len() * solvers.len());
    for &p in p_list {
        let sampling = with_block_size(config.sampling, p)?;
        let scheme = SamplingScheme::from_spec(sampling, &system.a, config.seed)?;
        for &solver in solvers {
            let experiment = Experiment {
                config: ExperimentConfig { sampling, solver, out: None, ..config.clone() },
                system: system.clone(),
                scheme: scheme.clone(),
            };
            experiment.config.validate()?;
            let summary = experiment.run(None)?;
            rows.push(SweepRow::new(p, system.rows(), solver, &summary));
        }
    }
    if let Some(dir) = &config.out {
        fs::create_dir_all(dir)?;
        match config.format {
            OutputFormat::Csv => fs::write(dir.join("sweep.csv"), sweep_csv(&rows))?,
            OutputFormat::Json => io::write_json(&dir.join("sweep.json"), &rows)?,
        }
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "p,solver,trials,failed,median_iterations,q25_iterations,q75_iterations,\
min_iterations,max_iterations,median_full_iterations,q25_full_iterations,q75_full_iterations,\
median_final_rse,median_convergence_factor";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let num = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let it = r.iterations;
        let full = r.full_iterations;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.p,
            r.solver,
            r.trials,
            r.failed,
            num(it.map(|s| s.median)),
            num(it.map(|s| s.q25)),
            num(it.map(|s| s.q75)),
            num(it.map(|s| s.min)),
            num(it.map(|s| s.max)),
            num(full.map(|s| s.median)),
            num(full.map(|s| s.q25)),
            num(full.map(|s| s.q75)),
            num(r.median_final_rse),
            num(r.median_convergence_factor),
        )
        .unwrap();
    }
    out
}

/// Ratio of the largest to the smallest median full-iteration count over
/// the sweep rows of one solver.
pub fn full_iteration_spread(rows: &[SweepRow], solver: SolverId) -> Option<f64> {
    let medians: Vec<f64> = rows
        .iter()
        .filter(|r| r.solver == solver)
        .map(|r| r.full_iterations.map(|s| s.median))
        .collect::<Option<_>>()?;
    let max = medians.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = medians.iter().copied().fold(f64::INFINITY, f64::min);
    (!medians.is_empty()).then(|| max / min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundOutput {
    pub report: BoundReport,
    /// `per_iter_factor^k` from `k = 0`, cut at `max_iters` or where it leaves the normal range.
    pub curve: Vec<f64>,
}

pub fn cmd_bound(config: &ExperimentConfig) -> CliResult<BoundOutput> {
    let zeta = match config.zeta {
        ZetaSchedule::Constant(z) => z,
        ZetaSchedule::Sequence(_) => {
            return Err(CliError::Config("the bound needs a constant relaxation parameter".into()))
        }
    };
    let system = config.load_system()?;
    let scheme = SamplingScheme::from_spec(config.sampling, &system.a, config.seed)?;
    let report = theoretical_bound(&scheme, &system.a, zeta)?;
    let mut curve = report.curve(config.max_iters);
    if let Some(end) = curve.iter().position(|v| *v < f64::MIN_POSITIVE) {
        curve.truncate(end);
    }
    let output = BoundOutput { report, curve };
    if let Some(dir) = &config.out {
        fs::create_dir_all(dir)?;
        io::write_json(&dir.join(BOUND_FILE), &output)?;
    }
    Ok(output)
}
