//! Randomized iterative solvers for consistent systems `A x = b`.
//!
//! Every method is a [`Stepper`]: it owns a [`SolverState`] and advances it one
//! iteration at a time. [`run`] drives a stepper to termination and records a
//! trace. All methods start from `x = 0`, which lies in `Range(A^T)`, so the
//! iterates converge to the minimum-norm solution.

mod ashbm;
mod basic;
mod cgne;
mod mrabk;
mod scg;
mod step;

pub use ashbm::AshbmStepper;
pub use basic::BasicStepper;
pub use cgne::CgneStepper;
pub use mrabk::{compute_tau, MrabkStepper};
pub use scg::ScgStepper;
pub use step::{ashbm_parameters, basic_step, polyak_stepsize};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::TraceRecord;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::problems::LinearSystem;
use crate::sampling::{SampleOp, SamplingScheme};
use crate::vector;

/// Relaxation parameters `ζ_k ∈ (0, 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZetaSchedule {
    Constant(f64),
    /// `ζ_k` for `k < len`; the last value repeats afterwards.
    Sequence(Vec<f64>),
}

impl ZetaSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            ZetaSchedule::Constant(z) => *z,
            ZetaSchedule::Sequence(v) => v[k.min(v.len() - 1)],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |z: f64| z > 0.0 && z < 2.0;
        let valid = match self {
            ZetaSchedule::Constant(z) => ok(*z),
            ZetaSchedule::Sequence(v) => !v.is_empty() && v.iter().all(|z| ok(*z)),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "relaxation parameters must lie in (0, 2): {self:?}"
            )))
        }
    }
}

impl Default for ZetaSchedule {
    fn default() -> Self {
        ZetaSchedule::Constant(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub zeta: ZetaSchedule,
    pub max_iters: usize,
    /// Stop once `RSE <= rse_tolerance`; also scales the residual stopping test.
    pub rse_tolerance: f64,
    /// `||S^T r||_2` at or below this counts as zero. Defaults to `1e-14 (1 + ||b||_2)`.
    pub zero_threshold: Option<f64>,
    /// Consecutive zero draws tolerated before declaring a stall.
    /// Defaults to 100 times the number of blocks needed to cover all rows.
    pub resample_cap: Option<usize>,
    /// Fixed momentum of the mRABK baseline.
    pub momentum_beta: f64,
    pub seed: u64,
    /// Full residual recomputation cadence, in iterations.
    pub residual_every: usize,
    /// Trace recording stride; 0 keeps only the first and last records.
    pub trace_every: usize,
    /// Fill `wall_nanos` in trace records. Off by default so traces are reproducible.
    pub record_wall_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            zeta: ZetaSchedule::default(),
            max_iters: 1_000_000,
            rse_tolerance: 1e-12,
            zero_threshold: None,
            resample_cap: None,
            momentum_beta: 0.7,
            seed: 0,
            residual_every: 1000,
            trace_every: 1,
            record_wall_time: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.zeta.validate()?;
        if !(self.rse_tolerance >= 0.0) {
            return Err(Error::InvalidParameter("rse_tolerance must be >= 0".into()));
        }
        if matches!(self.zero_threshold, Some(t) if !(t > 0.0)) {
            return Err(Error::InvalidParameter("zero_threshold must be > 0".into()));
        }
        if self.resample_cap == Some(0) {
            return Err(Error::InvalidParameter("resample_cap must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum_beta) {
            return Err(Error::InvalidParameter("momentum_beta must lie in [0, 1)".into()));
        }
        if self.residual_every == 0 {
            return Err(Error::InvalidParameter("residual_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn zero_threshold_for(&self, b: &[f64]) -> f64 {
        self.zero_threshold
            .unwrap_or_else(|| 1e-14 * (1.0 + vector::norm(b)))
    }

    pub fn resample_cap_for(&self, scheme: &SamplingScheme) -> usize {
        self.resample_cap
            .unwrap_or_else(|| 100 * scheme.support_blocks().max(1))
    }
}

/// Iterate, previous iterate, search direction and residual.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub x_prev: Vec<f64>,
    /// Search direction; empty for methods that do not keep one.
    pub p: Vec<f64>,
    /// `A x - b` as of iteration `residual_iter`.
    pub r: Vec<f64>,
    pub residual_iter: usize,
    pub k: usize,
}

impl SolverState {
    /// State at `x = 0`.
    pub fn at_origin(a: &Matrix, b: &[f64]) -> Self {
        let n = a.cols();
        Self {
            x: vec![0.0; n],
            x_prev: vec![0.0; n],
            p: Vec::new(),
            r: b.iter().map(|v| -v).collect(),
            residual_iter: 0,
            k: 0,
        }
    }

    /// Recomputes `r = A x - b` and returns the drift from the previous value.
    pub fn refresh_residual(&mut self, a: &Matrix, b: &[f64]) -> f64 {
        let fresh = a.residual(&self.x, b).expect("state dimensions match the system");
        let drift = vector::dist_sq(&fresh, &self.r).sqrt();
        self.r = fresh;
        self.residual_iter = self.k;
        drift
    }
}

/// What one iteration did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub alpha: f64,
    /// Momentum (or conjugacy) coefficient; 0 for momentum-free steps.
    pub beta: f64,
    pub sample: SampleOp,
    /// False when the iterate was left unchanged.
    pub moved: bool,
    /// True when the momentum parameters were degenerate and a plain step was taken.
    pub fallback: bool,
}

impl StepOutcome {
    pub(crate) fn stay(sample: SampleOp) -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            sample,
            moved: false,
            fallback: false,
        }
    }
}

/// Shared stepping interface of all methods.
pub trait Stepper {
    fn state(&self) -> &SolverState;

    /// Advances one iteration. A non-moving outcome from a rejection-sampling
    /// method means `resample_cap` consecutive sketches were zero.
    fn step(&mut self) -> Result<StepOutcome>;

    /// Recomputes the full residual, returning its drift.
    fn refresh_residual(&mut self) -> f64;

    /// Draw budget of methods that resample until the sketched residual is
    /// nonzero; `None` for methods that accept zero sketches.
    fn resample_cap(&self) -> Option<usize> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverId {
    /// Basic method: one draw per iteration, no move on a zero sketch.
    Basic,
    /// Modified basic method (RABK/RBKU/RK under the shipped schemes).
    Mbasic,
    /// Adaptive stochastic heavy-ball momentum.
    Ashbm,
    /// Stochastic conjugate gradient form of ASHBM.
    Scg,
    /// Fixed-parameter momentum baseline over partition sampling.
    Mrabk,
    /// Conjugate gradient on `A A^T y = b`, `x = A^T y`.
    Cgne,
}

impl SolverId {
    pub const ALL: [SolverId; 6] = [
        SolverId::Basic,
        SolverId::Mbasic,
        SolverId::Ashbm,
        SolverId::Scg,
        SolverId::Mrabk,
        SolverId::Cgne,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverId::Basic => "basic",
            SolverId::Mbasic => "mbasic",
            SolverId::Ashbm => "ashbm",
            SolverId::Scg => "scg",
            SolverId::Mrabk => "mrabk",
            SolverId::Cgne => "cgne",
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown solver {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    RseTolerance,
    ResidualTolerance,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub state: SolverState,
    pub trace: Vec<TraceRecord>,
    pub termination: Termination,
    /// Number of iterations performed.
    pub iterations: usize,
    /// Steps where degenerate momentum parameters forced a plain step.
    pub fallbacks: usize,
    /// Relative solution error at exit, when a reference solution is known.
    pub final_rse: Option<f64>,
    pub final_residual_norm: f64,
}

/// Drives `stepper` until the RSE or residual tolerance is met or `max_iters` is reached.
pub fn run<S: Stepper>(
    mut stepper: S,
    system: &LinearSystem,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    let started = Instant::now();
    let elapsed = |on: bool| if on { started.elapsed().as_nanos() as u64 } else { 0 };

    let reference = system.min_norm.as_deref();
    let rse_denominator = reference
        .map(|x_ref| vector::dist_sq(&stepper.state().x, x_ref))
        .filter(|d| *d > 0.0);
    let rse_of = |x: &[f64]| match (reference, rse_denominator) {
        (Some(x_ref), Some(d)) => Some(vector::dist_sq(x, x_ref) / d),
        _ => None,
    };
    let residual_tolerance = config.rse_tolerance * (1.0 + vector::norm_inf(&system.b));

    stepper.refresh_residual();
    let mut residual_norm = vector::norm(&stepper.state().r);
    let mut trace = vec![TraceRecord {
        k: 0,
        rse: rse_of(&stepper.state().x),
        residual_norm: Some(residual_norm),
        alpha: 0.0,
        beta: 0.0,
        wall_nanos: elapsed(config.record_wall_time),
        moved: false,
    }];

    let mut termination = Termination::MaxIterations;
    let mut fallbacks = 0;
    let mut iterations = 0;
    if vector::norm_inf(&stepper.state().r) <= residual_tolerance {
        termination = Termination::ResidualTolerance;
    } else {
        while iterations < config.max_iters {
            let outcome = stepper.step()?;
            iterations += 1;
            fallbacks += usize::from(outcome.fallback);

            let mut refreshed = false;
            if !outcome.moved {
                stepper.refresh_residual();
                refreshed = true;
                let state = stepper.state();
                if let (true, Some(cap)) = (
                    vector::norm_inf(&state.r) > residual_tolerance,
                    stepper.resample_cap(),
                ) {
                    return Err(Error::StalledSampling {
                        iteration: iterations,
                        draws: cap,
                        residual: vector::norm(&state.r),
                    });
                }
            } else if iterations % config.residual_every == 0 {
                stepper.refresh_residual();
                refreshed = true;
            }
            let state = stepper.state();
            let current = refreshed || state.residual_iter == state.k;
            if current {
                residual_norm = vector::norm(&state.r);
            }

            let rse = rse_of(&state.x);
            let done_rse = matches!(rse, Some(v) if v <= config.rse_tolerance);
            let done_residual = current && vector::norm_inf(&state.r) <= residual_tolerance;
            let last = done_rse || done_residual || iterations == config.max_iters;
            if (config.trace_every > 0 && iterations % config.trace_every == 0) || last {
                trace.push(TraceRecord {
                    k: iterations,
                    rse,
                    residual_norm: current.then_some(residual_norm),
                    alpha: outcome.alpha,
                    beta: outcome.beta,
                    wall_nanos: elapsed(config.record_wall_time),
                    moved: outcome.moved,
                });
            }
            if done_rse {
                termination = Termination::RseTolerance;
                break;
            }
            if done_residual {
                termination = Termination::ResidualTolerance;
                break;
            }
        }
    }

    stepper.refresh_residual();
    let state = stepper.state().clone();
    let final_residual_norm = vector::norm(&state.r);
    if let Some(last) = trace.last_mut() {
        last.residual_norm = Some(final_residual_norm);
    }
    Ok(SolveReport {
        final_rse: rse_of(&state.x),
        state,
        trace,
        termination,
        iterations,
        fallbacks,
        final_residual_norm,
    })
}

/// Runs `solver` on `system` from `x = 0`.
pub fn solve(
    solver: SolverId,
    system: &LinearSystem,
    scheme: &SamplingScheme,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    match solver {
        SolverId::Basic => run(BasicStepper::basic(system, scheme, config), system, config),
        SolverId::Mbasic => run(BasicStepper::modified(system, scheme, config), system, config),
        SolverId::Ashbm => run(AshbmStepper::new(system, scheme, config), system, config),
        SolverId::Scg => run(ScgStepper::new(system, scheme, config), system, config),
        SolverId::Mrabk => run(MrabkStepper::new(system, scheme, config)?, system, config),
        SolverId::Cgne => run(CgneStepper::new(system, config), system, config),
    }
}

pub fn solve_basic(system: &LinearSystem, scheme: &SamplingScheme, config: &SolverConfig) -> Result<SolveReport> {
    solve(SolverId::Basic, system, scheme, config)
}

pub fn solve_modified_basic(
    system: &LinearSystem,
    scheme: &SamplingScheme,
    config: &SolverConfig,
) -> Result<SolveReport> {
    solve(SolverId::Mbasic, system, scheme, config)
}

pub fn solve_ashbm(system: &LinearSystem, scheme: &SamplingScheme, config: &SolverConfig) -> Result<SolveReport> {
    solve(SolverId::Ashbm, system, scheme, config)
}

pub fn solve_scg(system: &LinearSystem, scheme: &SamplingScheme, config: &SolverConfig) -> Result<SolveReport> {
    solve(SolverId::Scg, system, scheme, config)
}

pub fn solve_mrabk(system: &LinearSystem, scheme: &SamplingScheme, config: &SolverConfig) -> Result<SolveReport> {
    solve(SolverId::Mrabk, system, scheme, config)
}

pub fn solve_cgne(system: &LinearSystem, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    run(CgneStepper::new(system, config), system, config)
}

/// Supplies `S_k^T (A x^k - b)` to the randomized steppers.
///
/// Block sketches are evaluated from the sampled rows at the current iterate.
/// Under the identity scheme the sketch is the whole residual, so it is
/// carried by the recursion `r ← r + A (x^{k+1} - x^k)` at the same cost,
/// which keeps the rounding in `x` from feeding back into the next step.
pub(crate) struct SketchSource<'a> {
    sampler: crate::sampling::Sampler<'a>,
    recursive: bool,
    threshold: f64,
    cap: usize,
    r_prev: Vec<f64>,
    a_step: Vec<f64>,
}

impl<'a> SketchSource<'a> {
    pub(crate) fn new(scheme: &'a SamplingScheme, system: &LinearSystem, config: &SolverConfig, cap: usize) -> Self {
        Self {
            sampler: scheme.sampler(config.seed),
            recursive: scheme.is_deterministic(),
            threshold: config.zero_threshold_for(&system.b),
            cap,
            r_prev: Vec::new(),
            a_step: Vec::new(),
        }
    }

    pub(crate) fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Draws until the sketched residual exceeds the zero threshold, at most
    /// `cap` times. Returns the sample with its sketch left in `sketch`, or the
    /// last (zero) sample as `Err` when every draw was zero.
    pub(crate) fn draw(
        &mut self,
        a: &Matrix,
        b: &[f64],
        state: &SolverState,
        sketch: &mut Vec<f64>,
    ) -> std::result::Result<SampleOp, SampleOp> {
        if self.recursive {
            sketch.clear();
            sketch.extend_from_slice(&state.r);
            return if vector::norm(sketch) > self.threshold {
                Ok(SampleOp::Identity)
            } else {
                Err(SampleOp::Identity)
            };
        }
        let mut sample = SampleOp::Identity;
        for _ in 0..self.cap.max(1) {
            sample = self.sampler.draw();
            sample.sketch_residual_into(a, &state.x, b, sketch);
            if vector::norm(sketch) > self.threshold {
                return Ok(sample);
            }
        }
        Err(sample)
    }

    /// `S^T (A x^{k-1} - b)` for the sample drawn at iteration `k`.
    pub(crate) fn sketch_at_prev(
        &self,
        sample: &SampleOp,
        a: &Matrix,
        b: &[f64],
        state: &SolverState,
        out: &mut Vec<f64>,
    ) {
        if self.recursive {
            out.clear();
            out.extend_from_slice(&self.r_prev);
        } else {
            sample.sketch_residual_into(a, &state.x_prev, b, out);
        }
    }

    /// Records that `step` was just added to `state.x` and `state.k` advanced.
    pub(crate) fn advance(&mut self, a: &Matrix, state: &mut SolverState, step: &[f64]) {
        if !self.recursive {
            return;
        }
        self.a_step.clear();
        self.a_step.extend((0..a.rows()).map(|i| a.row_dot(i, step)));
        self.r_prev.clear();
        self.r_prev.extend_from_slice(&state.r);
        vector::axpy(1.0, &self.a_step, &mut state.r);
        state.residual_iter = state.k;
    }
}
