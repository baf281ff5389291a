use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::problems::LinearSystem;
use crate::sampling::SampleOp;
use crate::solvers::{SolverConfig, SolverState, StepOutcome, Stepper};
use crate::vector;

/// Conjugate gradient on `A A^T y = b` with `x = A^T y` (CGNE / Craig's method).
///
/// ```text
/// μ_k     = ||r^k||^2 / ||p_k||^2
/// x^{k+1} = x^k + μ_k p_k
/// r^{k+1} = r^k + μ_k A p_k
/// τ_k     = ||r^{k+1}||^2 / ||r^k||^2
/// p_{k+1} = -A^T r^{k+1} + τ_k p_k
/// ```
///
/// The residual is carried by the recursion; refreshing it replaces the
/// recursive value with `A x - b`. Once `||r||` drops to the zero threshold
/// the iterate stays put, since further steps would only amplify rounding.
pub struct CgneStepper<'a> {
    a: &'a Matrix,
    b: &'a [f64],
    state: SolverState,
    zero_threshold: f64,
    r_sq: f64,
    ap: Vec<f64>,
}

impl<'a> CgneStepper<'a> {
    pub fn new(system: &'a LinearSystem, config: &SolverConfig) -> Self {
        let mut state = SolverState::at_origin(&system.a, &system.b);
        state.refresh_residual(&system.a, &system.b);
        state.p = system
            .a
            .matvec_transpose(&state.r)
            .expect("residual has one entry per row");
        state.p.iter_mut().for_each(|v| *v = -*v);
        let r_sq = vector::norm_sq(&state.r);
        Self {
            a: &system.a,
            b: &system.b,
            state,
            zero_threshold: config.zero_threshold_for(&system.b),
            r_sq,
            ap: vec![0.0; system.rows()],
        }
    }
}

impl Stepper for CgneStepper<'_> {
    fn state(&self) -> &SolverState {
        &self.state
    }

    fn step(&mut self) -> Result<StepOutcome> {
        let state = &mut self.state;
        state.x_prev.copy_from_slice(&state.x);
        if self.r_sq.sqrt() <= self.zero_threshold {
            state.k += 1;
            return Ok(StepOutcome::stay(SampleOp::Identity));
        }
        let pp = vector::norm_sq(&state.p);
        if !(pp > 0.0) {
            return Err(Error::Breakdown {
                iteration: state.k,
                residual: self.r_sq.sqrt(),
            });
        }
        let mu = self.r_sq / pp;
        for (i, api) in self.ap.iter_mut().enumerate() {
            *api = self.a.row_dot(i, &state.p);
        }
        vector::axpy(mu, &state.p, &mut state.x);
        vector::axpy(mu, &self.ap, &mut state.r);
        state.residual_iter = state.k + 1;

        let r_sq_next = vector::norm_sq(&state.r);
        let tau = r_sq_next / self.r_sq;
        self.r_sq = r_sq_next;
        for p in state.p.iter_mut() {
            *p *= tau;
        }
        for (i, &ri) in state.r.iter().enumerate() {
            self.a.add_row_scaled(i, -ri, &mut state.p);
        }
        state.k += 1;
        Ok(StepOutcome {
            alpha: mu,
            beta: tau,
            sample: SampleOp::Identity,
            moved: true,
            fallback: false,
        })
    }

    fn refresh_residual(&mut self) -> f64 {
        let drift = self.state.refresh_residual(self.a, self.b);
        self.r_sq = vector::norm_sq(&self.state.r);
        drift
    }
}
