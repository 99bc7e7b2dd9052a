use thiserror::Error;

/// Error kinds shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MopsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("channel closed: {0}")]
    ChannelClosed(String),

    #[error("barrier violation: {0}")]
    BarrierViolation(String),

    #[error("round {round}: {source}")]
    AtRound {
        round: usize,
        #[source]
        source: Box<MopsError>,
    },
}

impl MopsError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        MopsError::InvalidArgument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        MopsError::NumericFailure(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        MopsError::ContractViolation(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        MopsError::Protocol(msg.into())
    }

    /// Attaches a round index. Already-tagged errors keep their original round.
    pub fn at_round(self, round: usize) -> Self {
        match self {
            e @ MopsError::AtRound { .. } => e,
            other => MopsError::AtRound {
                round,
                source: Box::new(other),
            },
        }
    }

    /// Strips any round tag and returns the underlying error.
    pub fn root(&self) -> &MopsError {
        match self {
            MopsError::AtRound { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn round(&self) -> Option<usize> {
        match self {
            MopsError::AtRound { round, .. } => Some(*round),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, MopsError>;
