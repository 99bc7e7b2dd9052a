//! Fixtures shared by the criterion benchmarks.

use mops_core::math::RngState;
use mops_core::model::{ModelSpec, ParamVector};
use mops_core::protocol::{EmbeddingRecord, RoundMessage, SampleTag};
use mops_core::training::timeseries_spec;
use mops_core::Scheme;

pub fn gaussian_vectors(seed: u64, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = RngState::new(seed, 0);
    (0..count).map(|_| (0..dim).map(|_| rng.gaussian()).collect()).collect()
}

/// Default time-series model with freshly initialized full parameters.
pub fn model(scheme: Scheme) -> (ModelSpec, ParamVector) {
    let spec = timeseries_spec(scheme).expect("default spec is valid");
    let params = ParamVector::init(&spec.layers, &mut RngState::new(1, 0));
    (spec, params)
}

pub fn embedding_message(e: usize, p: usize) -> RoundMessage {
    let v = gaussian_vectors(2, 2, e.max(p));
    RoundMessage::Embedding(EmbeddingRecord {
        agent_id: 1,
        round: 7,
        tag: SampleTag::Primary,
        seq: 7,
        z: v[0][..e].to_vec(),
        y: v[1][..p].to_vec(),
    })
}
