//! Random valid messages for round-trip testing.

use crate::math::RngState;
use crate::model::Scheme;

use super::message::*;

fn vec_of(rng: &mut RngState, max_len: usize) -> Vec<f64> {
    let n = rng.index(max_len + 1);
    (0..n)
        .map(|_| match rng.index(8) {
            0 => 0.0,
            1 => -0.0,
            2 => f64::MAX * if rng.bernoulli(0.5) { 1.0 } else { -1.0 },
            3 => f64::MIN_POSITIVE * 0.5,
            _ => rng.gaussian() * 10f64.powi(rng.index(21) as i32 - 10),
        })
        .collect()
}

fn tag(rng: &mut RngState) -> SampleTag {
    SampleTag::from_code(rng.index(3) as u8).unwrap()
}

fn u32_any(rng: &mut RngState) -> u32 {
    (rng.uniform() * 4294967296.0) as u32
}

fn u16_any(rng: &mut RngState) -> u16 {
    rng.index(1 << 16) as u16
}

/// A uniformly chosen message kind with random, valid contents.
pub fn random_message(rng: &mut RngState) -> RoundMessage {
    let agent_id = u16_any(rng);
    let round = u32_any(rng);
    match rng.index(4) {
        0 => RoundMessage::Embedding(EmbeddingRecord {
            agent_id,
            round,
            tag: tag(rng),
            seq: u32_any(rng),
            z: vec_of(rng, 40),
            y: vec_of(rng, 10),
        }),
        1 => RoundMessage::Gradient(GradientRecord {
            agent_id,
            round,
            tag: tag(rng),
            g_boundary: vec_of(rng, 40),
        }),
        2 => RoundMessage::Weights(WeightsBroadcast {
            agent_id,
            round,
            weights: vec_of(rng, 8),
        }),
        _ => RoundMessage::Control(ControlMessage {
            agent_id,
            round,
            kind: match rng.index(3) {
                0 => ControlKind::Assign {
                    scheme: Scheme::ALL[rng.index(3)],
                    boundary: u16_any(rng),
                    embedding_dim: u32_any(rng),
                },
                1 => ControlKind::Barrier,
                _ => ControlKind::Shutdown,
            },
        }),
    }
}
