use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::problems::LinearSystem;
use crate::sampling::{lambda_max_sup, Sampler, SamplingScheme};
use crate::solvers::{SolverConfig, SolverState, StepOutcome, Stepper};

/// `τ = max_i (||A_{I_i}||_2^2 / ||A_{I_i}||_F^2) / ||A||_F^2` for a partition scheme.
pub fn compute_tau(scheme: &SamplingScheme, a: &Matrix) -> Result<f64> {
    if scheme.partition().is_none() {
        return Err(Error::Unsupported(format!(
            "the fixed-step momentum baseline needs partition sampling, got {}",
            scheme.spec()
        )));
    }
    Ok(lambda_max_sup(scheme, a).value / a.fro_norm_sq())
}

/// Partition-sampled block Kaczmarz with fixed step `α = 1 / (τ ||A||_F^2)`
/// and fixed momentum `β`: `x ← x - α A^T S S^T r + β (x - x_prev)`.
pub struct MrabkStepper<'a> {
    a: &'a Matrix,
    b: &'a [f64],
    sampler: Sampler<'a>,
    state: SolverState,
    alpha: f64,
    beta: f64,
    sketch: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> MrabkStepper<'a> {
    pub fn new(system: &'a LinearSystem, scheme: &'a SamplingScheme, config: &SolverConfig) -> Result<Self> {
        let tau = compute_tau(scheme, &system.a)?;
        Ok(Self {
            a: &system.a,
            b: &system.b,
            sampler: scheme.sampler(config.seed),
            state: SolverState::at_origin(&system.a, &system.b),
            alpha: 1.0 / (tau * system.a.fro_norm_sq()),
            beta: config.momentum_beta,
            sketch: Vec::new(),
            grad: vec![0.0; system.cols()],
        })
    }

    pub fn step_size(&self) -> f64 {
        self.alpha
    }
}

impl Stepper for MrabkStepper<'_> {
    fn state(&self) -> &SolverState {
        &self.state
    }

    fn step(&mut self) -> Result<StepOutcome> {
        let sample = self.sampler.draw();
        sample.sketch_residual_into(self.a, &self.state.x, self.b, &mut self.sketch);
        sample.pullback_into(self.a, &self.sketch, &mut self.grad);
        let state = &mut self.state;
        let mut moved = false;
        for ((x, xp), g) in state.x.iter_mut().zip(state.x_prev.iter_mut()).zip(&self.grad) {
            let next = *x - self.alpha * g + self.beta * (*x - *xp);
            moved |= next != *x;
            *xp = *x;
            *x = next;
        }
        state.k += 1;
        Ok(StepOutcome {
            alpha: self.alpha,
            beta: self.beta,
            sample,
            moved,
            fallback: false,
        })
    }

    fn refresh_residual(&mut self) -> f64 {
        self.state.refresh_residual(self.a, self.b)
    }
}
