use mops_core::math::RngState;
use mops_core::protocol::{
    decode, encode, random_message, EmbeddingRecord, Endpoint, GradientRecord, LoopbackHub, RoundMessage, SampleTag,
    Transport, CONTROLLER,
};
use mops_core::verify::GOLDEN_GRADIENT;
use mops_core::MopsError;
use proptest::prelude::*;

fn golden_fixture() -> Vec<u8> {
    let hex = include_str!("fixtures/golden_gradient.hex").trim();
    (0..hex.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).unwrap())
        .collect()
}

#[test]
fn golden_gradient_bytes() {
    let msg = RoundMessage::Gradient(GradientRecord {
        agent_id: 1,
        round: 0,
        tag: SampleTag::Primary,
        g_boundary: vec![1.0],
    });
    let bytes = encode(&msg).unwrap();
    assert_eq!(bytes, golden_fixture());
    assert_eq!(bytes, GOLDEN_GRADIENT);
    assert_eq!(decode(&golden_fixture()).unwrap(), msg);
}

#[test]
fn fuzzed_roundtrips() {
    let mut rng = RngState::new(99, 0);
    for _ in 0..2000 {
        let m = random_message(&mut rng);
        let bytes = encode(&m).unwrap();
        assert_eq!(decode(&bytes).unwrap(), m);
        // no strict prefix decodes
        let cut = rng.index(bytes.len());
        assert!(decode(&bytes[..cut]).is_err());
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e300f64..1e300, Just(0.0), Just(-0.0), Just(f64::MIN_POSITIVE / 4.0)]
}

proptest! {
    #[test]
    fn embedding_roundtrip(agent in any::<u16>(), round in any::<u32>(), seq in any::<u32>(),
                           tag in 0u8..3, z in prop::collection::vec(finite(), 0..20),
                           y in prop::collection::vec(finite(), 0..6)) {
        let m = RoundMessage::Embedding(EmbeddingRecord {
            agent_id: agent, round, tag: SampleTag::from_code(tag).unwrap(), seq, z, y,
        });
        let bytes = encode(&m).unwrap();
        prop_assert_eq!(decode(&bytes).unwrap(), m);
    }

    #[test]
    fn garbage_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode(&bytes);
    }

    #[test]
    fn flipped_magic_or_version_is_rejected(pos in 0usize..5, flip in 1u8..=255) {
        let mut bytes = GOLDEN_GRADIENT.to_vec();
        bytes[pos] ^= flip;
        prop_assert!(matches!(decode(&bytes), Err(MopsError::Protocol(_))));
    }
}

#[test]
fn loopback_delivers_in_order_and_counts_bytes() {
    let hub = LoopbackHub::new();
    let ctrl: Endpoint = hub.register(CONTROLLER).unwrap();
    let agent: Endpoint = hub.register(0).unwrap();
    for k in 0..5u8 {
        agent.send(CONTROLLER, vec![k; k as usize + 1]).unwrap();
    }
    for k in 0..5u8 {
        let (from, bytes) = ctrl.recv().unwrap();
        assert_eq!(from, 0);
        assert_eq!(bytes, vec![k; k as usize + 1]);
    }
    assert_eq!(hub.bytes_between(0, CONTROLLER), 15);
    assert_eq!(hub.messages_between(0, CONTROLLER), 5);
    assert_eq!(hub.total_bytes(), 15);
}

#[test]
fn closed_endpoint_reports_channel_closed() {
    let hub = LoopbackHub::new();
    let ctrl = hub.register(CONTROLLER).unwrap();
    let agent = hub.register(0).unwrap();
    ctrl.close();
    assert!(matches!(agent.send(CONTROLLER, vec![1]), Err(MopsError::ChannelClosed(_))));
}
