//! Numeric building blocks shared by every other module.

pub mod finite_diff;
pub mod linalg;
pub mod min_norm;
pub mod rng;
pub mod simplex;

pub use finite_diff::finite_diff_grad;
pub use linalg::{axpy, dot, norm, weighted_sum, Mat};
pub use min_norm::{min_norm_solve, min_norm_weights, MinNormOptions, MinNormSolution};
pub use rng::{prng_draw, DrawKind, RngState};
pub use simplex::{project_simplex, WeightSimplex, SIMPLEX_TOL};
