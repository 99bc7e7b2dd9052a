//! Reliable in-order byte transport between registered endpoints.
//!
//! The loopback hub backs every endpoint with an unbounded in-process queue.
//! A single queue per receiver preserves FIFO order for every sender.

use std::collections::{BTreeMap, HashMap};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};

use crate::error::{MopsError, Result};

pub type EndpointId = u16;

/// Reserved endpoint id of the controller; agents use their agent id.
pub const CONTROLLER: EndpointId = u16::MAX;

/// Point-to-point byte transport contract.
pub trait Transport {
    fn id(&self) -> EndpointId;
    fn send(&self, to: EndpointId, bytes: Vec<u8>) -> Result<()>;
    /// Blocks until a message arrives; returns the sender and the bytes.
    fn recv(&self) -> Result<(EndpointId, Vec<u8>)>;
}

type Envelope = (EndpointId, Vec<u8>);

#[derive(Default)]
struct HubState {
    senders: HashMap<EndpointId, Sender<Envelope>>,
    bytes: BTreeMap<(EndpointId, EndpointId), u64>,
    messages: BTreeMap<(EndpointId, EndpointId), u64>,
}

/// In-process transport hub.
#[derive(Clone, Default)]
pub struct LoopbackHub {
    state: Arc<Mutex<HubState>>,
}

impl LoopbackHub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, id: EndpointId) -> Result<Endpoint> {
        let mut st = self.state.lock().unwrap();
        if st.senders.contains_key(&id) {
            return Err(MopsError::invalid(format!("endpoint {id} already registered")));
        }
        let (tx, rx) = mpsc::channel();
        st.senders.insert(id, tx);
        Ok(Endpoint {
            id,
            rx,
            hub: self.clone(),
        })
    }

    /// Closes `id` for new traffic; queued messages can still be drained.
    pub fn close(&self, id: EndpointId) {
        self.state.lock().unwrap().senders.remove(&id);
    }

    /// Total bytes sent from `from` to `to`.
    pub fn bytes_between(&self, from: EndpointId, to: EndpointId) -> u64 {
        self.state.lock().unwrap().bytes.get(&(from, to)).copied().unwrap_or(0)
    }

    pub fn messages_between(&self, from: EndpointId, to: EndpointId) -> u64 {
        self.state.lock().unwrap().messages.get(&(from, to)).copied().unwrap_or(0)
    }

    pub fn total_bytes(&self) -> u64 {
        self.state.lock().unwrap().bytes.values().sum()
    }

    fn deliver(&self, from: EndpointId, to: EndpointId, bytes: Vec<u8>) -> Result<()> {
        let mut st = self.state.lock().unwrap();
        let n = bytes.len() as u64;
        let tx = st
            .senders
            .get(&to)
            .ok_or_else(|| MopsError::ChannelClosed(format!("endpoint {to} is not open")))?;
        tx.send((from, bytes))
            .map_err(|_| MopsError::ChannelClosed(format!("endpoint {to} dropped its receiver")))?;
        *st.bytes.entry((from, to)).or_default() += n;
        *st.messages.entry((from, to)).or_default() += 1;
        Ok(())
    }
}

/// One registered endpoint: a sending handle plus its own receive queue.
pub struct Endpoint {
    id: EndpointId,
    rx: Receiver<Envelope>,
    hub: LoopbackHub,
}

impl Endpoint {
    pub fn try_recv(&self) -> Option<(EndpointId, Vec<u8>)> {
        self.rx.try_recv().ok()
    }

    pub fn close(&self) {
        self.hub.close(self.id);
    }
}

impl Transport for Endpoint {
    fn id(&self) -> EndpointId {
        self.id
    }

    fn send(&self, to: EndpointId, bytes: Vec<u8>) -> Result<()> {
        self.hub.deliver(self.id, to, bytes)
    }

    fn recv(&self) -> Result<(EndpointId, Vec<u8>)> {
        self.rx
            .recv()
            .map_err(|_| MopsError::ChannelClosed(format!("endpoint {} is closed", self.id)))
    }
}
