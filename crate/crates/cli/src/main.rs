use std::path::PathBuf;
use std::process::ExitCode;

use ashbm::problems::GaussianSpec;
use ashbm::solvers::{SolverId, ZetaSchedule};
use ashbm::SchemeSpec;
use ashbm_cli::commands::{self, SUMMARY_FILE};
use ashbm_cli::{CliError, CliResult, ExperimentConfig, OutputFormat, ProblemSource};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ashbm", version, about = "Randomized solvers for consistent linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded Gaussian problem: A.mtx, b.txt, x_min_norm.txt, x_star.txt.
    Generate {
        m: usize,
        n: usize,
        rank: usize,
        kappa: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run independent trials and write per-trial traces plus a summary.
    Solve(ExperimentArgs),
    /// Run the experiment for several block sizes and solvers.
    Sweep {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Comma-separated block sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        p_list: Vec<usize>,
        /// Comma-separated solvers; defaults to --solver.
        #[arg(long, value_delimiter = ',')]
        solvers: Vec<SolverId>,
    },
    /// Write the theoretical contraction bound and its curve.
    Bound(ExperimentArgs),
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// JSON experiment config; other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Matrix Market file for A.
    #[arg(long, conflicts_with = "generate")]
    matrix: Option<PathBuf>,
    /// Right-hand side, one value per line.
    #[arg(long, requires = "matrix")]
    rhs: Option<PathBuf>,
    /// Generate the system instead: M,N,RANK,KAPPA.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    generate: Option<Vec<f64>>,
    #[arg(long)]
    solver: Option<SolverId>,
    /// row | uniform:<p> | partition:<p> | identity
    #[arg(long)]
    sampling: Option<SchemeSpec>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Worker threads (0: one per core).
    #[arg(long)]
    threads: Option<usize>,
    /// Record every n-th iteration (0: first and last only).
    #[arg(long)]
    trace_every: Option<usize>,
    /// Fill the wall_nanos trace column.
    #[arg(long)]
    wall_time: bool,
}

impl ExperimentArgs {
    fn problem(&self) -> CliResult<Option<ProblemSource>> {
        if let Some(matrix) = &self.matrix {
            return Ok(Some(ProblemSource::Mtx { matrix: matrix.clone(), rhs: self.rhs.clone() }));
        }
        let Some(g) = &self.generate else {
            return Ok(None);
        };
        let dim = |v: f64| -> CliResult<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Config(format!("bad dimension {v} in --generate")))
            }
        };
        match g.as_slice() {
            [m, n, r, kappa] => Ok(Some(ProblemSource::Generate {
                m: dim(*m)?,
                n: dim(*n)?,
                rank: dim(*r)?,
                kappa: *kappa,
                seed: None,
            })),
            _ => Err(CliError::Config("--generate expects M,N,RANK,KAPPA".into())),
        }
    }

    fn into_config(self) -> CliResult<ExperimentConfig> {
        let problem = self.problem()?;
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let problem = problem
                    .clone()
                    .ok_or_else(|| CliError::Config("give --config, --matrix or --generate".into()))?;
                ExperimentConfig::new(problem, SchemeSpec::Row, SolverId::Ashbm)
            }
        };
        if let Some(p) = problem {
            c.problem = p;
        }
        if let Some(v) = self.solver {
            c.solver = v;
        }
        if let Some(v) = self.sampling {
            c.sampling = v;
        }
        if let Some(v) = self.zeta {
            c.zeta = ZetaSchedule::Constant(v);
        }
        if let Some(v) = self.beta {
            c.beta = v;
        }
        if let Some(v) = self.tol {
            c.tol = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.out {
            c.out = Some(v);
        }
        if let Some(v) = self.format {
            c.format = v;
        }
        if let Some(v) = self.threads {
            c.threads = v;
        }
        if let Some(v) = self.trace_every {
            c.trace_every = v;
        }
        c.record_wall_time |= self.wall_time;
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { m, n, rank, kappa, seed, out } => {
            let files = commands::cmd_generate(GaussianSpec { m, n, rank, kappa }, seed, &out)?;
            println!("wrote {}", files.matrix.display());
        }
        Command::Solve(args) => {
            let config = args.into_config()?;
            let summary = commands::cmd_solve(&config)?;
            match &config.out {
                Some(dir) => println!("wrote {}", dir.join(SUMMARY_FILE).display()),
                None => println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes")),
            }
            if summary.has_breakdown() {
                return Err(CliError::Solver(format!(
                    "{} of {} trials failed",
                    summary.failed, summary.trials
                )));
            }
        }
        Command::Sweep { experiment, p_list, mut solvers } => {
            let config = experiment.into_config()?;
            if solvers.is_empty() {
                solvers.push(config.solver);
            }
            let rows = commands::cmd_sweep(&config, &p_list, &solvers)?;
            if config.out.is_none() {
                print!("{}", commands::sweep_csv(&rows));
            }
        }
        Command::Bound(args) => {
            let config = args.into_config()?;
            let output = commands::cmd_bound(&config)?;
            println!("{}", serde_json::to_string_pretty(&output.report).expect("report serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
