//! Multi-agent split-model training.
//!
//! Agents hold the front layers of their models and ship embeddings to a
//! controller that hosts the shared back layers. The controller combines the
//! per-agent gradients with simplex weights that are either fixed (static
//! weighting) or adapted every round from two independent stochastic
//! gradients (dynamic weighting), and returns boundary gradients so agents
//! can finish backpropagation locally.
//!
//! Modules, bottom-up:
//! - [`math`]: vectors, simplex projection, min-norm solver, PRNG streams.
//! - [`model`]: dense layers, forward/backward, partitioning, flop counts.
//! - [`protocol`]: binary embedding/gradient messages and loopback transport.
//! - [`tasks`]: quadratic toy objectives and synthetic time-series datasets.
//! - [`training`]: agent and controller state machines, the round driver.
//! - [`metrics`]: optimization, generalization and conflict errors, bound curves, fits.
//! - [`verify`]: end-to-end checks shared by the CLI and the acceptance suite.

pub mod error;
pub mod math;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod tasks;
pub mod training;
pub mod verify;

pub use error::{MopsError, Result};
pub use math::{min_norm_weights, project_simplex, RngState, WeightSimplex};
pub use metrics::MetricsRecord;
pub use model::{ModelSpec, ParamVector, Part, Scheme};
pub use training::{run_training, Algorithm, TrainConfig};
