//! E-interface / G-interface messages, their binary codec, and the transport.

pub mod codec;
pub mod fuzz;
pub mod message;
pub mod transport;

pub use codec::{decode, embedding_message_len, encode, gradient_message_len, HEADER_LEN};
pub use fuzz::random_message;
pub use message::{
    ControlKind, ControlMessage, EmbeddingRecord, GradientRecord, RoundMessage, SampleTag,
    WeightsBroadcast,
};
pub use transport::{Endpoint, EndpointId, LoopbackHub, Transport, CONTROLLER};
