//! Singular-value quantities and the SVD-based minimum-norm oracle.
//!
//! Nothing in here is shared with the iterative solvers: the SVD path is the
//! independent reference the solvers are checked against.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::vector;

/// Relative residual threshold above which a system is declared inconsistent.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub sigma_max: f64,
    /// Smallest singular value counted as nonzero by the rank rule.
    pub sigma_min_nonzero: f64,
    /// Smallest singular value overall, including numerically-zero ones.
    pub sigma_min_all: f64,
    pub rank: usize,
    pub fro_norm: f64,
}

impl SpectralSummary {
    pub fn condition_number(&self) -> f64 {
        self.sigma_max / self.sigma_min_nonzero
    }
}

/// Singular values at or below this are treated as zero.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Largest accepted `max |A - U Σ V^T|` relative to `max |A|`.
const RECONSTRUCTION_TOLERANCE: f64 = 1e-12;

type Factors = (DMatrix<f64>, DVector<f64>, DMatrix<f64>);

fn reconstruction_error(a: &DMatrix<f64>, (u, s, v_t): &Factors) -> f64 {
    let rebuilt = u * DMatrix::from_diagonal(s) * v_t;
    (rebuilt - a).amax() / a.amax()
}

/// Thin SVD whose factors are checked against `a`.
///
/// nalgebra's default convergence threshold can return orthonormal factors
/// that do not reproduce a rank-deficient input, so each candidate is
/// verified and the next one tried: tight threshold, default, transpose.
fn verified_svd(a: &DMatrix<f64>) -> Result<Factors> {
    let attempts: [&dyn Fn() -> Option<Factors>; 3] = [
        &|| {
            let svd = a.clone().try_svd(true, true, f64::EPSILON, 0)?;
            Some((svd.u?, svd.singular_values, svd.v_t?))
        },
        &|| {
            let svd = a.clone().svd(true, true);
            Some((svd.u?, svd.singular_values, svd.v_t?))
        },
        &|| {
            let svd = a.transpose().try_svd(true, true, f64::EPSILON, 0)?;
            Some((svd.v_t?.transpose(), svd.singular_values, svd.u?.transpose()))
        },
    ];
    let mut best = f64::INFINITY;
    for attempt in attempts {
        if let Some(factors) = attempt() {
            let err = reconstruction_error(a, &factors);
            if err <= RECONSTRUCTION_TOLERANCE {
                return Ok(factors);
            }
            best = best.min(err);
        }
    }
    Err(Error::Unsupported(format!(
        "SVD did not reproduce the matrix (best relative error {best:e})"
    )))
}

/// Thin SVD of a matrix, truncated to its numerical rank.
pub struct SvdOracle {
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    singular_values: Vec<f64>,
    rank: usize,
    rows: usize,
    cols: usize,
}

impl SvdOracle {
    pub fn new(a: &Matrix) -> Result<Self> {
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::ZeroMatrix);
        }
        let (u_raw, sigma, v_t_raw) = verified_svd(&a.to_nalgebra())?;
        let mut order: Vec<usize> = (0..sigma.len()).collect();
        order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));

        let singular_values: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();
        let sigma_max = singular_values.first().copied().unwrap_or(0.0);
        if sigma_max == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        let tol = rank_tolerance(a.rows(), a.cols(), sigma_max);
        let rank = singular_values.iter().take_while(|&&s| s > tol).count();

        let u = DMatrix::from_fn(a.rows(), rank, |i, k| u_raw[(i, order[k])]);
        let v_t = DMatrix::from_fn(rank, a.cols(), |k, j| v_t_raw[(order[k], j)]);
        Ok(Self {
            u,
            v_t,
            singular_values,
            rank,
            rows: a.rows(),
            cols: a.cols(),
        })
    }

    /// All singular values, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn summary(&self, fro_norm: f64) -> SpectralSummary {
        SpectralSummary {
            sigma_max: self.singular_values[0],
            sigma_min_nonzero: self.singular_values[self.rank - 1],
            sigma_min_all: *self.singular_values.last().unwrap(),
            rank: self.rank,
            fro_norm,
        }
    }

    /// `A^† b` without a consistency check.
    pub fn pseudo_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: b.len(),
            });
        }
        let mut coeffs = self.u.tr_mul(&DVector::from_column_slice(b));
        for k in 0..self.rank {
            coeffs[k] /= self.singular_values[k];
        }
        Ok(self.v_t.tr_mul(&coeffs).as_slice().to_vec())
    }

    /// Component of `x` in `Null(A)`, i.e. `x - V_r V_r^T x`.
    pub fn null_space_component(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        let xv = DVector::from_column_slice(x);
        let range_part = self.v_t.tr_mul(&(&self.v_t * &xv));
        Ok((xv - range_part).as_slice().to_vec())
    }
}

/// Singular extremes, rank and Frobenius norm of `a`.
pub fn spectral_quantities(a: &Matrix) -> Result<SpectralSummary> {
    if a.fro_norm_sq() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(SvdOracle::new(a)?.summary(a.fro_norm_sq().sqrt()))
}

/// The minimum-norm solution `A^† b` of a consistent system.
pub fn min_norm_solution(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.fro_norm_sq() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let oracle = SvdOracle::new(a)?;
    let x = oracle.pseudo_solve(b)?;
    let residual = vector::norm(&a.residual(&x, b)?);
    let tolerance = CONSISTENCY_TOLERANCE * (1.0 + vector::norm(b));
    if residual > tolerance {
        return Err(Error::InconsistentSystem {
            residual,
            tolerance,
        });
    }
    Ok(x)
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
///
/// Matrices up to 64 rows go through a dense symmetric eigensolver; larger
/// ones use power iteration stopped at relative change 1e-10.
pub fn largest_eigenvalue(gram: &DMatrix<f64>) -> f64 {
    let n = gram.nrows();
    if n == 0 {
        return 0.0;
    }
    if n <= 64 {
        return SymmetricEigen::new(gram.clone())
            .eigenvalues
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    }
    power_iteration(gram, 1e-10, 10_000)
}

fn power_iteration(gram: &DMatrix<f64>, tol: f64, max_iters: usize) -> f64 {
    let n = gram.nrows();
    // Deterministic start with components in every coordinate direction.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let w = gram * &v;
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        if (next - lambda).abs() <= tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}
