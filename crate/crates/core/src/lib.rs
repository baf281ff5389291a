//! Adaptive stochastic heavy-ball momentum (ASHBM) and related randomized
//! iterative solvers for consistent linear systems `A x = b`.
//!
//! * [`matrix`] and [`spectral`]: storage, products and the SVD reference.
//! * [`problems`]: seeded synthetic systems and Matrix Market ingestion.
//! * [`sampling`]: sketching distributions and their bound quantities.
//! * [`solvers`]: basic, modified basic, ASHBM, SCG, mRABK and CGNE.
//! * [`analysis`]: RSE, convergence factors and contraction bounds.

pub mod analysis;
pub mod error;
pub mod matrix;
pub mod problems;
pub mod sampling;
pub mod solvers;
pub mod spectral;
pub mod vector;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use problems::{GaussianSpec, LinearSystem};
pub use sampling::{SampleOp, SamplingScheme, SchemeSpec};
pub use solvers::{SolverConfig, SolverId, SolverState, StepOutcome, Stepper};
