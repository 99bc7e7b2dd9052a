//! Layered MLPs with manual backprop, split into agent and shared parts.

pub mod flops;
pub mod loss;
pub mod net;
pub mod params;
pub mod spec;

pub use flops::{flops, Phase};
pub use loss::mse_loss_and_grad;
pub use net::{backward, backward_counted, forward, forward_counted, ForwardCache, MacCounter};
pub use params::ParamVector;
pub use spec::{split_model, Activation, LayerSpec, ModelSpec, Part, Scheme};
