use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::problems::LinearSystem;
use crate::sampling::SamplingScheme;
use crate::solvers::step::polyak_into;
use crate::solvers::{ashbm_parameters, SketchSource, SolverConfig, SolverState, StepOutcome, Stepper};
use crate::vector;

/// Adaptive stochastic heavy-ball momentum.
///
/// The first iteration is a modified basic step with `ζ = 1`. Afterwards
/// `x ← x - α g + β (x - x_prev)` with `(α, β)` chosen so the new iterate is
/// the orthogonal projection of `A^† b` onto `x + span{g, x - x_prev}`; both
/// inner products involving `A^† b` reduce to `||S^T r||^2` and zero, so no
/// reference solution is needed.
pub struct AshbmStepper<'a> {
    a: &'a Matrix,
    b: &'a [f64],
    source: SketchSource<'a>,
    state: SolverState,
    resample_cap: usize,
    sketch: Vec<f64>,
    grad: Vec<f64>,
    /// The last step `x^k - x^{k-1}` as computed, rather than re-derived by
    /// subtracting nearly equal iterates.
    diff: Vec<f64>,
}

impl<'a> AshbmStepper<'a> {
    pub fn new(system: &'a LinearSystem, scheme: &'a SamplingScheme, config: &SolverConfig) -> Self {
        let n = system.cols();
        let resample_cap = config.resample_cap_for(scheme);
        Self {
            a: &system.a,
            b: &system.b,
            source: SketchSource::new(scheme, system, config, resample_cap),
            state: SolverState::at_origin(&system.a, &system.b),
            resample_cap,
            sketch: Vec::new(),
            grad: vec![0.0; n],
            diff: vec![0.0; n],
        }
    }
}

impl Stepper for AshbmStepper<'_> {
    fn state(&self) -> &SolverState {
        &self.state
    }

    fn step(&mut self) -> Result<StepOutcome> {
        let sample = match self.source.draw(self.a, self.b, &self.state, &mut self.sketch) {
            Ok(sample) => sample,
            Err(zero) => return Ok(StepOutcome::stay(zero)),
        };
        let threshold = self.source.threshold();
        let Some(polyak) = polyak_into(self.a, &sample, &self.sketch, threshold, &mut self.grad) else {
            return Ok(StepOutcome::stay(sample));
        };

        let state = &mut self.state;
        let momentum = if state.k == 0 {
            Err(Error::DegenerateDirection)
        } else {
            ashbm_parameters(&self.grad, &self.diff, vector::norm_sq(&self.sketch))
        };
        let (alpha, beta, fallback) = match momentum {
            Ok((alpha, beta)) => (alpha, beta, false),
            // First iteration, or gradient numerically parallel to the last step.
            Err(_) => (polyak, 0.0, state.k > 0),
        };

        state.x_prev.copy_from_slice(&state.x);
        for ((x, g), d) in state.x.iter_mut().zip(&self.grad).zip(self.diff.iter_mut()) {
            *d = beta * *d - alpha * g;
            *x += *d;
        }
        state.k += 1;
        self.source.advance(self.a, state, &self.diff);
        Ok(StepOutcome {
            alpha,
            beta,
            sample,
            moved: true,
            fallback,
        })
    }

    fn refresh_residual(&mut self) -> f64 {
        self.state.refresh_residual(self.a, self.b)
    }

    fn resample_cap(&self) -> Option<usize> {
        Some(self.resample_cap)
    }
}
