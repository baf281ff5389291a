//! Single-step building blocks shared by the sampling-based methods.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sampling::SampleOp;
use crate::solvers::{SolverState, StepOutcome};
use crate::vector;

/// Relative threshold on `||g||^2 ||d||^2 - <g, d>^2` below which the
/// gradient and the previous step are treated as parallel.
pub const DEGENERACY_THRESHOLD: f64 = 1e-14;

/// Adaptive step `||S^T r||^2 / ||A^T S S^T r||^2` for a full residual `r`.
pub fn polyak_stepsize(sample: &SampleOp, a: &Matrix, r: &[f64], zero_threshold: f64) -> Result<f64> {
    if r.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: r.len(),
        });
    }
    let sketch = sample.apply_transpose(r);
    let s = vector::norm_sq(&sketch);
    if s.sqrt() <= zero_threshold {
        return Err(Error::ZeroSketchResidual);
    }
    let g = sample.pullback(a, &sketch);
    let gg = vector::norm_sq(&g);
    if gg == 0.0 {
        return Err(Error::ZeroSketchResidual);
    }
    Ok(s / gg)
}

/// `(α, β)` minimising `||x - α g + β d - A^† b||` when `x` is already the
/// projection of `A^† b` onto the previous search plane.
///
/// `g` is the sampled gradient `A^T S S^T r`, `d = x^k - x^{k-1}` and
/// `s = ||S^T r||^2`. With `D = ||g||^2 ||d||^2 - <g, d>^2` the result is
/// `α = ||d||^2 s / D` and `β = <g, d> s / D`. `D` is evaluated as
/// `||d||^2 ||g_perp||^2`, with `g_perp` the part of `g` orthogonal to `d`,
/// which avoids cancelling two large products.
pub fn ashbm_parameters(g: &[f64], d: &[f64], s: f64) -> Result<(f64, f64)> {
    let gg = vector::norm_sq(g);
    let dd = vector::norm_sq(d);
    if !(gg > 0.0 && dd > 0.0) {
        return Err(Error::DegenerateDirection);
    }
    let c = vector::dot(g, d) / dd;
    let perp_sq: f64 = g.iter().zip(d).map(|(gi, di)| (gi - c * di).powi(2)).sum();
    if !(perp_sq > DEGENERACY_THRESHOLD * gg) {
        return Err(Error::DegenerateDirection);
    }
    let alpha = s / perp_sq;
    Ok((alpha, alpha * c))
}

/// One step of the basic method from `state.x` with sketch `sample`:
/// `x ← x - (2 - ζ) L A^T S S^T (A x - b)`, or no move when `S^T (A x - b)` is zero.
///
/// The full residual `state.r` is not touched; `state.residual_iter` records
/// how stale it is.
pub fn basic_step(
    a: &Matrix,
    b: &[f64],
    state: &mut SolverState,
    sample: SampleOp,
    zeta: f64,
    zero_threshold: f64,
) -> StepOutcome {
    let sketch = sample.sketch_residual(a, &state.x, b);
    let mut grad = vec![0.0; a.cols()];
    match polyak_into(a, &sample, &sketch, zero_threshold, &mut grad) {
        Some(step) => {
            let alpha = (2.0 - zeta) * step;
            state.x_prev.copy_from_slice(&state.x);
            vector::axpy(-alpha, &grad, &mut state.x);
            state.k += 1;
            StepOutcome {
                alpha,
                beta: 0.0,
                sample,
                moved: true,
                fallback: false,
            }
        }
        None => {
            state.x_prev.copy_from_slice(&state.x);
            state.k += 1;
            StepOutcome::stay(sample)
        }
    }
}

/// Writes `A^T S sketch` into `grad` and returns the Polyak step, or `None`
/// when the sketch (or its pullback) is numerically zero.
pub(crate) fn polyak_into(
    a: &Matrix,
    sample: &SampleOp,
    sketch: &[f64],
    zero_threshold: f64,
    grad: &mut [f64],
) -> Option<f64> {
    let s = vector::norm_sq(sketch);
    if s.sqrt() <= zero_threshold {
        return None;
    }
    sample.pullback_into(a, sketch, grad);
    let gg = vector::norm_sq(grad);
    (gg > 0.0).then(|| s / gg)
}
