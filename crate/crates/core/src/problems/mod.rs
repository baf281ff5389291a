//! Test systems: seeded low-rank Gaussian problems and external matrices.

mod mtx;

pub use mtx::{load_matrix_market, parse_matrix_market};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::spectral::{SvdOracle, CONSISTENCY_TOLERANCE};
use crate::vector;

/// A consistent system `A x = b` plus the reference solutions used for error tracking.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub a: Matrix,
    pub b: Vec<f64>,
    /// The vector `b` was generated from, if known.
    pub planted_solution: Option<Vec<f64>>,
    /// `A^† b`, the target of every solver started from zero.
    pub min_norm: Option<Vec<f64>>,
    /// `||A A^† b - b||_2`, filled together with `min_norm`.
    pub consistency_residual: Option<f64>,
}

impl LinearSystem {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                found: b.len(),
            });
        }
        Ok(Self {
            a,
            b,
            planted_solution: None,
            min_norm: None,
            consistency_residual: None,
        })
    }

    /// `b = A x*` for a given planted solution.
    pub fn from_planted(a: Matrix, x_star: Vec<f64>) -> Result<Self> {
        let b = a.matvec(&x_star)?;
        let mut system = Self::new(a, b)?;
        system.planted_solution = Some(x_star);
        Ok(system)
    }

    /// Supplies a known `A^† b`; the consistency residual is recomputed from it.
    pub fn with_min_norm(mut self, min_norm: Vec<f64>) -> Result<Self> {
        let residual = vector::norm(&self.a.residual(&min_norm, &self.b)?);
        self.consistency_residual = Some(residual);
        self.min_norm = Some(min_norm);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    pub fn b_norm(&self) -> f64 {
        vector::norm(&self.b)
    }
}

/// Fills `min_norm` from the SVD oracle when it is absent.
pub fn attach_min_norm(system: LinearSystem) -> Result<LinearSystem> {
    if system.min_norm.is_some() {
        return Ok(system);
    }
    let oracle = SvdOracle::new(&system.a)?;
    let x = oracle.pseudo_solve(&system.b)?;
    let residual = vector::norm(&system.a.residual(&x, &system.b)?);
    let tolerance = CONSISTENCY_TOLERANCE * (1.0 + system.b_norm());
    if residual > tolerance {
        return Err(Error::InconsistentSystem {
            residual,
            tolerance,
        });
    }
    Ok(LinearSystem {
        min_norm: Some(x),
        consistency_residual: Some(residual),
        ..system
    })
}

/// Standard Gaussian vector of length `n` from a seeded stream.
pub fn gaussian_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Parameters of a synthetic `A = U D V^T` problem.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianSpec {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub kappa: f64,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Column-major fill.
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Generates `A = U D V^T` with orthonormal `U` (m x r) and `V` (n x r) taken
/// from QR factorizations of Gaussian matrices, and `D = diag(1 + (κ-1) u_i)`
/// with `u_i` uniform on `[0, 1)`. The right-hand side is `b = A x*` for a
/// standard Gaussian `x*`, and the attached minimum-norm solution is `V V^T x*`.
pub fn generate_gaussian_problem(spec: GaussianSpec, seed: u64) -> Result<LinearSystem> {
    let GaussianSpec { m, n, rank, kappa } = spec;
    if rank == 0 || rank > m.min(n) {
        return Err(Error::InvalidRank { rank, rows: m, cols: n });
    }
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!("kappa must be >= 1, got {kappa}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = gaussian_matrix(&mut rng, m, rank).qr().q();
    let v = gaussian_matrix(&mut rng, n, rank).qr().q();
    let d: Vec<f64> = (0..rank)
        .map(|_| 1.0 + (kappa - 1.0) * rng.gen::<f64>())
        .collect();
    let x_star: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();

    let mut ud = u;
    for (k, dk) in d.iter().enumerate() {
        ud.column_mut(k).scale_mut(*dk);
    }
    let a = Matrix::from_nalgebra(&(ud * v.transpose()));

    let xs = nalgebra::DVector::from_column_slice(&x_star);
    let min_norm = (&v * v.tr_mul(&xs)).as_slice().to_vec();

    LinearSystem::from_planted(a, x_star)?.with_min_norm(min_norm)
}
