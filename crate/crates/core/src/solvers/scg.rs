use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::problems::LinearSystem;
use crate::sampling::SamplingScheme;
use crate::solvers::{SketchSource, SolverConfig, SolverState, StepOutcome, Stepper};
use crate::vector;

/// Stochastic conjugate gradient: the direction form of ASHBM.
///
/// Keeps a search direction `p_k`; `x ← x + δ_k p_k` with
/// `δ_k = ||S_k^T r^k||^2 / ||p_k||^2`, and the next direction is
/// `p_{k+1} = -A^T S_{k+1} S_{k+1}^T r^{k+1} + η_k p_k` where
/// `η_k = (||S_{k+1}^T r^{k+1}||^2 - <S_{k+1}^T r^{k+1}, S_{k+1}^T r^k>) / ||S_k^T r^k||^2`.
///
/// Sketch `S_{k+1}` is drawn at the start of iteration `k+1`, so the random
/// stream is consumed in the same order as [`AshbmStepper`](super::AshbmStepper).
pub struct ScgStepper<'a> {
    a: &'a Matrix,
    b: &'a [f64],
    source: SketchSource<'a>,
    state: SolverState,
    resample_cap: usize,
    /// `||S_k^T r^k||^2` of the previous iteration.
    last_sketch_sq: f64,
    sketch: Vec<f64>,
    sketch_prev: Vec<f64>,
    grad: Vec<f64>,
    step: Vec<f64>,
}

impl<'a> ScgStepper<'a> {
    pub fn new(system: &'a LinearSystem, scheme: &'a SamplingScheme, config: &SolverConfig) -> Self {
        let mut state = SolverState::at_origin(&system.a, &system.b);
        state.p = vec![0.0; system.cols()];
        let resample_cap = config.resample_cap_for(scheme);
        Self {
            a: &system.a,
            b: &system.b,
            source: SketchSource::new(scheme, system, config, resample_cap),
            state,
            resample_cap,
            last_sketch_sq: 0.0,
            sketch: Vec::new(),
            sketch_prev: Vec::new(),
            grad: vec![0.0; system.cols()],
            step: vec![0.0; system.cols()],
        }
    }
}

impl Stepper for ScgStepper<'_> {
    fn state(&self) -> &SolverState {
        &self.state
    }

    fn step(&mut self) -> Result<StepOutcome> {
        let sample = match self.source.draw(self.a, self.b, &self.state, &mut self.sketch) {
            Ok(sample) => sample,
            Err(zero) => return Ok(StepOutcome::stay(zero)),
        };
        sample.pullback_into(self.a, &self.sketch, &mut self.grad);
        let sketch_sq = vector::norm_sq(&self.sketch);

        let eta = if self.state.k == 0 {
            0.0
        } else {
            self.source
                .sketch_at_prev(&sample, self.a, self.b, &self.state, &mut self.sketch_prev);
            (sketch_sq - vector::dot(&self.sketch, &self.sketch_prev)) / self.last_sketch_sq
        };
        let state = &mut self.state;
        for (p, g) in state.p.iter_mut().zip(&self.grad) {
            *p = eta * *p - g;
        }
        let pp = vector::norm_sq(&state.p);
        if !(pp > 0.0) || !pp.is_finite() {
            return Err(Error::DegenerateDirection);
        }
        let delta = sketch_sq / pp;
        state.x_prev.copy_from_slice(&state.x);
        for ((x, s), p) in state.x.iter_mut().zip(self.step.iter_mut()).zip(&state.p) {
            *s = delta * p;
            *x += *s;
        }
        state.k += 1;
        self.source.advance(self.a, state, &self.step);
        self.last_sketch_sq = sketch_sq;
        Ok(StepOutcome {
            alpha: delta,
            beta: eta,
            sample,
            moved: true,
            fallback: false,
        })
    }

    fn refresh_residual(&mut self) -> f64 {
        self.state.refresh_residual(self.a, self.b)
    }

    fn resample_cap(&self) -> Option<usize> {
        Some(self.resample_cap)
    }
}
