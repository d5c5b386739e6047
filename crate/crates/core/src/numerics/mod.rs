//! Dense linear algebra, percentiles, and seeded random streams.
//!
//! Everything here is small-scale and deterministic: matrices are at most a
//! few hundred rows by a few dozen columns, and every random draw comes from
//! an explicit [`RngStream`].

mod linalg;
pub(crate) mod mat;
mod rng;
mod stats;
mod walsh;

pub use linalg::{
    least_squares, ridge_solve, solve_normal_equations, Cholesky, LeastSquares, NormalEquations,
};
pub use mat::Mat;
pub use rng::{mix64, sample_gaussian, sample_indices_with_replacement, sample_laplace, RngStream};
pub use stats::{mean_and_stderr, percentile, percentile_in_place};
pub use walsh::walsh_hadamard;
