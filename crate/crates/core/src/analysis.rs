//! Error metrics and the theoretical per-iteration contraction bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sampling::{expected_gram, lambda_max_sup, SamplingScheme, SchemeSpec};
use crate::spectral::{spectral_quantities, SpectralSummary};
use crate::vector;

/// RSE level below which bound checks stop, to stay clear of round-off floors.
pub const RSE_FLOOR: f64 = 100.0 * f64::EPSILON;

/// Multiplicative slack allowed over the bound curve.
pub const BOUND_SLACK: f64 = 0.05;

/// Minimum number of trials for a contraction verdict.
pub const MIN_TRIALS: usize = 30;

/// One row of a solver trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    /// `||x^k - A^† b||^2 / ||x^0 - A^† b||^2`, when the reference is known.
    pub rse: Option<f64>,
    /// `||A x^k - b||_2`, on iterations where the full residual was recomputed.
    pub residual_norm: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub wall_nanos: u64,
    pub moved: bool,
}

/// Relative solution error `||x - x_ref||^2 / ||x0 - x_ref||^2`.
pub fn rse(x: &[f64], min_norm: &[f64], x0: &[f64]) -> Result<f64> {
    let denom = vector::dist_sq(x0, min_norm);
    if denom == 0.0 {
        return Err(Error::AlreadySolved);
    }
    Ok(vector::dist_sq(x, min_norm) / denom)
}

/// Geometric-mean contraction `final_rse^(1/K)`.
pub fn convergence_factor(final_rse: f64, iterations: usize) -> Result<f64> {
    if iterations == 0 {
        return Err(Error::InvalidParameter("convergence factor needs K >= 1".into()));
    }
    if final_rse == 0.0 {
        return Err(Error::ExactConvergence);
    }
    if !(final_rse > 0.0) || !final_rse.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid final RSE {final_rse}")));
    }
    Ok(final_rse.powf(1.0 / iterations as f64))
}

/// Theoretical expected contraction of the squared error per iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub scheme: SchemeSpec,
    pub zeta: f64,
    /// `σ_min^2(H^{1/2} A)`, with `σ_min` the smallest nonzero singular value.
    pub sigma_min_sq_ha: f64,
    /// `sup_S λ_max(A^T S S^T A)` over the scheme's support.
    pub lambda_max: f64,
    /// `1 - ζ(2 - ζ) σ_min^2(H^{1/2} A) / λ_max`.
    pub per_iter_factor: f64,
    /// Set when `lambda_max` came from sampled subsets.
    pub is_estimate: bool,
    pub spectral: SpectralSummary,
}

impl BoundReport {
    /// `per_iter_factor^k` for `k = 0..=iterations`.
    pub fn curve(&self, iterations: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(iterations + 1);
        let mut v = 1.0;
        for _ in 0..=iterations {
            out.push(v);
            v *= self.per_iter_factor;
        }
        out
    }
}

pub fn theoretical_bound(scheme: &SamplingScheme, a: &Matrix, zeta: f64) -> Result<BoundReport> {
    let spectral = spectral_quantities(a)?;
    theoretical_bound_with(scheme, a, &spectral, zeta)
}

/// As [`theoretical_bound`] with precomputed singular values.
pub fn theoretical_bound_with(
    scheme: &SamplingScheme,
    a: &Matrix,
    spectral: &SpectralSummary,
    zeta: f64,
) -> Result<BoundReport> {
    if scheme.is_deterministic() {
        return Err(Error::Unsupported(
            "no randomized bound for the deterministic identity scheme".into(),
        ));
    }
    if !(zeta > 0.0 && zeta < 2.0) {
        return Err(Error::InvalidParameter(format!("zeta must lie in (0, 2), got {zeta}")));
    }
    let h = expected_gram(scheme, a);
    let lambda = lambda_max_sup(scheme, a);
    let sigma_min_sq_ha = h.scale * spectral.sigma_min_nonzero * spectral.sigma_min_nonzero;
    let per_iter_factor = 1.0 - zeta * (2.0 - zeta) * sigma_min_sq_ha / lambda.value;
    Ok(BoundReport {
        scheme: scheme.spec(),
        zeta,
        sigma_min_sq_ha,
        lambda_max: lambda.value,
        per_iter_factor,
        is_estimate: lambda.estimate,
        spectral: *spectral,
    })
}

/// Median of a non-empty slice (mean of the two middle values for even lengths).
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolated quantile, `q ∈ [0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty set");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Per-iteration median RSE across trials.
///
/// Trials that terminated early keep contributing their final RSE. Traces
/// must have been recorded at every iteration.
pub fn median_rse_curve(traces: &[Vec<TraceRecord>]) -> Vec<f64> {
    let len = traces
        .iter()
        .map(|t| t.last().map_or(0, |r| r.k + 1))
        .max()
        .unwrap_or(0);
    let mut column = Vec::with_capacity(traces.len());
    (0..len)
        .map(|k| {
            column.clear();
            for t in traces {
                let idx = t.partition_point(|r| r.k <= k).saturating_sub(1);
                if let Some(v) = t.get(idx).and_then(|r| r.rse) {
                    column.push(v);
                }
            }
            if column.is_empty() {
                f64::NAN
            } else {
                median(&column)
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Pass {
        checked_iterations: usize,
    },
    Fail {
        k: usize,
        median_rse: f64,
        bound: f64,
    },
    InsufficientTrials {
        trials: usize,
    },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }
}

/// Checks that the per-iteration median RSE stays below
/// `(1 + slack) per_iter_factor^k` while the median is above [`RSE_FLOOR`].
pub fn contraction_check(traces: &[Vec<TraceRecord>], report: &BoundReport) -> Verdict {
    if traces.len() < MIN_TRIALS {
        return Verdict::InsufficientTrials {
            trials: traces.len(),
        };
    }
    let medians = median_rse_curve(traces);
    let mut bound = 1.0;
    let mut checked = 0;
    for (k, &m) in medians.iter().enumerate() {
        if !(m > RSE_FLOOR) {
            break;
        }
        if m > (1.0 + BOUND_SLACK) * bound {
            return Verdict::Fail {
                k,
                median_rse: m,
                bound,
            };
        }
        checked += 1;
        bound *= report.per_iter_factor;
    }
    Verdict::Pass {
        checked_iterations: checked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{Partition, SamplingScheme};

    #[test]
    fn rse_examples() {
        let x_ref = [1.0, 2.0];
        let x0 = [0.0, 0.0];
        assert_eq!(rse(&x_ref, &x_ref, &x0).unwrap(), 0.0);
        assert_eq!(rse(&x0, &x_ref, &x0).unwrap(), 1.0);
        assert!((rse(&[0.5, 1.0], &x_ref, &x0).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(rse(&x0, &x0, &x0), Err(Error::AlreadySolved)));
    }

    #[test]
    fn convergence_factor_examples() {
        assert!((convergence_factor(1e-12, 12).unwrap() - 0.1).abs() < 1e-14);
        assert_eq!(convergence_factor(1.0, 37).unwrap(), 1.0);
        assert!(matches!(convergence_factor(0.0, 3), Err(Error::ExactConvergence)));
        assert!(convergence_factor(0.5, 0).is_err());
    }

    #[test]
    fn row_bound_on_orthonormal_rows() {
        let a = Matrix::identity(10);
        let scheme = SamplingScheme::single_row(&a).unwrap();
        let report = theoretical_bound(&scheme, &a, 1.0).unwrap();
        assert!((report.per_iter_factor - 0.9).abs() < 1e-14);
        assert!(!report.is_estimate);
    }

    #[test]
    fn singleton_partition_bound_matches_row_bound() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [0.0, 3.0], [4.0, 1.0], [1.0, -1.0]]).unwrap();
        let row = theoretical_bound(&SamplingScheme::single_row(&a).unwrap(), &a, 1.0).unwrap();
        let blocks = Partition::from_blocks(4, (0..4).map(|i| vec![i]).collect()).unwrap();
        let part = theoretical_bound(&SamplingScheme::partition_block(&a, blocks).unwrap(), &a, 1.0)
            .unwrap();
        assert!((row.per_iter_factor - part.per_iter_factor).abs() < 1e-14);
    }

    #[test]
    fn identity_bound_is_unsupported() {
        let a = Matrix::identity(3);
        assert!(matches!(
            theoretical_bound(&SamplingScheme::identity(&a), &a, 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    fn synthetic(values: &[f64]) -> Vec<TraceRecord> {
        values
            .iter()
            .enumerate()
            .map(|(k, &v)| TraceRecord {
                k,
                rse: Some(v),
                residual_norm: None,
                alpha: 0.0,
                beta: 0.0,
                wall_nanos: 0,
                moved: true,
            })
            .collect()
    }

    fn report(factor: f64) -> BoundReport {
        BoundReport {
            scheme: SchemeSpec::Row,
            zeta: 1.0,
            sigma_min_sq_ha: 0.0,
            lambda_max: 1.0,
            per_iter_factor: factor,
            is_estimate: false,
            spectral: SpectralSummary {
                sigma_max: 1.0,
                sigma_min_nonzero: 1.0,
                sigma_min_all: 1.0,
                rank: 1,
                fro_norm: 1.0,
            },
        }
    }

    #[test]
    fn contraction_check_boundary_and_violation() {
        let rep = report(0.5);
        let exact = synthetic(&rep.curve(40));
        assert!(contraction_check(&vec![exact.clone(); 30], &rep).passed());

        let mut bumped: Vec<f64> = rep.curve(40);
        bumped[7] *= 1.10;
        let verdict = contraction_check(&vec![synthetic(&bumped); 30], &rep);
        assert!(matches!(verdict, Verdict::Fail { k: 7, .. }), "{verdict:?}");

        assert!(matches!(
            contraction_check(&vec![exact; 5], &rep),
            Verdict::InsufficientTrials { trials: 5 }
        ));
    }

    #[test]
    fn median_curve_pads_finished_trials() {
        let t1 = synthetic(&[1.0, 0.5]);
        let t2 = synthetic(&[1.0, 0.8, 0.6, 0.4]);
        let t3 = synthetic(&[1.0, 0.9, 0.7, 0.5]);
        let m = median_rse_curve(&[t1, t2, t3]);
        assert_eq!(m, vec![1.0, 0.8, 0.6, 0.5]);
    }

    #[test]
    fn quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.25), 1.75);
    }
}
