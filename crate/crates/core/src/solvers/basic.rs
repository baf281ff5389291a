use crate::error::Result;
use crate::matrix::Matrix;
use crate::problems::LinearSystem;
use crate::sampling::SamplingScheme;
use crate::solvers::step::polyak_into;
use crate::solvers::{SketchSource, SolverConfig, SolverState, StepOutcome, Stepper, ZetaSchedule};
use crate::vector;

/// The basic method and its modified (resampling) variant.
///
/// Each iteration moves along the sampled gradient with the relaxed adaptive
/// step `(2 - ζ_k) ||S^T r||^2 / ||A^T S S^T r||^2`. The basic method accepts
/// a zero sketch as a non-move; the modified method redraws until the sketch
/// is nonzero.
pub struct BasicStepper<'a> {
    a: &'a Matrix,
    b: &'a [f64],
    source: SketchSource<'a>,
    state: SolverState,
    zeta: ZetaSchedule,
    resample_cap: Option<usize>,
    sketch: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> BasicStepper<'a> {
    fn with_cap(
        system: &'a LinearSystem,
        scheme: &'a SamplingScheme,
        config: &SolverConfig,
        resample_cap: Option<usize>,
    ) -> Self {
        Self {
            a: &system.a,
            b: &system.b,
            source: SketchSource::new(scheme, system, config, resample_cap.unwrap_or(1)),
            state: SolverState::at_origin(&system.a, &system.b),
            zeta: config.zeta.clone(),
            resample_cap,
            sketch: Vec::new(),
            grad: vec![0.0; system.cols()],
        }
    }

    /// One draw per iteration; zero sketches leave the iterate unchanged.
    pub fn basic(system: &'a LinearSystem, scheme: &'a SamplingScheme, config: &SolverConfig) -> Self {
        Self::with_cap(system, scheme, config, None)
    }

    /// Redraws until the sketched residual is nonzero.
    pub fn modified(system: &'a LinearSystem, scheme: &'a SamplingScheme, config: &SolverConfig) -> Self {
        let cap = config.resample_cap_for(scheme);
        Self::with_cap(system, scheme, config, Some(cap))
    }
}

impl Stepper for BasicStepper<'_> {
    fn state(&self) -> &SolverState {
        &self.state
    }

    fn step(&mut self) -> Result<StepOutcome> {
        let drawn = self.source.draw(self.a, self.b, &self.state, &mut self.sketch);
        let zeta = self.zeta.at(self.state.k);
        self.state.x_prev.copy_from_slice(&self.state.x);
        self.state.k += 1;
        let sample = match drawn {
            Ok(sample) => sample,
            Err(zero) => return Ok(StepOutcome::stay(zero)),
        };
        let threshold = self.source.threshold();
        let Some(step) = polyak_into(self.a, &sample, &self.sketch, threshold, &mut self.grad) else {
            return Ok(StepOutcome::stay(sample));
        };
        let alpha = (2.0 - zeta) * step;
        self.grad.iter_mut().for_each(|g| *g *= -alpha);
        vector::axpy(1.0, &self.grad, &mut self.state.x);
        self.source.advance(self.a, &mut self.state, &self.grad);
        Ok(StepOutcome {
            alpha,
            beta: 0.0,
            sample,
            moved: true,
            fallback: false,
        })
    }

    fn refresh_residual(&mut self) -> f64 {
        self.state.refresh_residual(self.a, self.b)
    }

    fn resample_cap(&self) -> Option<usize> {
        self.resample_cap
    }
}
