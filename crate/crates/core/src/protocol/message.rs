use crate::model::Scheme;

/// Which of an agent's per-round samples an embedding was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleTag {
    Primary,
    Extra1,
    Extra2,
}

impl SampleTag {
    pub fn code(self) -> u8 {
        match self {
            SampleTag::Primary => 0,
            SampleTag::Extra1 => 1,
            SampleTag::Extra2 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SampleTag::Primary),
            1 => Some(SampleTag::Extra1),
            2 => Some(SampleTag::Extra2),
            _ => None,
        }
    }
}

/// E-interface payload: one embedding-label pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub agent_id: u16,
    pub round: u32,
    pub tag: SampleTag,
    /// Per-agent emission sequence number.
    pub seq: u32,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

/// G-interface payload: gradient of the agent's loss at the shared part's input.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientRecord {
    pub agent_id: u16,
    pub round: u32,
    /// Tag of the embedding this gradient answers.
    pub tag: SampleTag,
    pub g_boundary: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightsBroadcast {
    pub agent_id: u16,
    pub round: u32,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    /// Partition assignment sent once before training.
    Assign {
        scheme: Scheme,
        boundary: u16,
        embedding_dim: u32,
    },
    /// Round `round` is complete at the controller.
    Barrier,
    Shutdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlMessage {
    pub agent_id: u16,
    pub round: u32,
    pub kind: ControlKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RoundMessage {
    Embedding(EmbeddingRecord),
    Gradient(GradientRecord),
    Weights(WeightsBroadcast),
    Control(ControlMessage),
}

impl RoundMessage {
    pub fn msg_type(&self) -> u8 {
        match self {
            RoundMessage::Embedding(_) => 0x01,
            RoundMessage::Gradient(_) => 0x02,
            RoundMessage::Weights(_) => 0x03,
            RoundMessage::Control(_) => 0x04,
        }
    }

    pub fn agent_id(&self) -> u16 {
        match self {
            RoundMessage::Embedding(m) => m.agent_id,
            RoundMessage::Gradient(m) => m.agent_id,
            RoundMessage::Weights(m) => m.agent_id,
            RoundMessage::Control(m) => m.agent_id,
        }
    }

    pub fn round(&self) -> u32 {
        match self {
            RoundMessage::Embedding(m) => m.round,
            RoundMessage::Gradient(m) => m.round,
            RoundMessage::Weights(m) => m.round,
            RoundMessage::Control(m) => m.round,
        }
    }
}
