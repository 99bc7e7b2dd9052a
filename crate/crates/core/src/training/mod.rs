//! Agent and controller state machines and the round driver.
//!
//! A round runs four steps in order: (1) each agent applies the boundary
//! gradient of the previous round to its front layers, (2) each agent uploads
//! fresh embeddings, (3) the controller optionally adapts the weights from the
//! extra samples and then updates the shared layers with the weighted sum of
//! per-agent gradients, (4) the controller returns boundary gradients.

pub mod agent;
pub mod config;
pub mod controller;
pub mod sim;

pub use agent::{AgentData, AgentModel, AgentState};
pub use config::{Algorithm, Harness, TrainConfig, WeightGrads};
pub use controller::{ControllerState, SharedEval, SharedModel, WeightTerms};
pub use sim::{
    collaborative_inference, expected_round_bytes, full_batch_gradient, initial_weights, run_training,
    timeseries_spec, JointGradients, Simulation, Trajectory,
};
