//! Wire format.
//!
//! ```text
//! header  "MOPS" | version u8 = 1 | msg_type u8 | agent_id u16 | round u32 | payload_len u32
//! EMB     tag u8 | seq u32 | z vec | y vec
//! GRAD    tag u8 | g vec
//! WEIGHTS w vec
//! CONTROL kind u8 | kind fields
//! vec     len u32 | len x binary64
//! ```
//! All integers and reals are little-endian.

use crate::error::{MopsError, Result};
use crate::model::Scheme;

use super::message::*;

pub const MAGIC: &[u8; 4] = b"MOPS";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;

const CONTROL_ASSIGN: u8 = 0x01;
const CONTROL_BARRIER: u8 = 0x02;
const CONTROL_SHUTDOWN: u8 = 0x03;

/// Encoded size of an embedding message with embedding width `e` and label width `p`.
pub fn embedding_message_len(e: usize, p: usize) -> usize {
    HEADER_LEN + 1 + 4 + (4 + 8 * e) + (4 + 8 * p)
}

/// Encoded size of a gradient message with boundary width `e`.
pub fn gradient_message_len(e: usize) -> usize {
    HEADER_LEN + 1 + 4 + 8 * e
}

pub fn encode(msg: &RoundMessage) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    match msg {
        RoundMessage::Embedding(m) => {
            payload.push(m.tag.code());
            payload.extend_from_slice(&m.seq.to_le_bytes());
            put_vec(&mut payload, &m.z)?;
            put_vec(&mut payload, &m.y)?;
        }
        RoundMessage::Gradient(m) => {
            payload.push(m.tag.code());
            put_vec(&mut payload, &m.g_boundary)?;
        }
        RoundMessage::Weights(m) => put_vec(&mut payload, &m.weights)?,
        RoundMessage::Control(m) => match m.kind {
            ControlKind::Assign {
                scheme,
                boundary,
                embedding_dim,
            } => {
                payload.push(CONTROL_ASSIGN);
                payload.push(scheme_code(scheme));
                payload.extend_from_slice(&boundary.to_le_bytes());
                payload.extend_from_slice(&embedding_dim.to_le_bytes());
            }
            ControlKind::Barrier => payload.push(CONTROL_BARRIER),
            ControlKind::Shutdown => payload.push(CONTROL_SHUTDOWN),
        },
    }
    let payload_len = u32::try_from(payload.len())
        .map_err(|_| MopsError::invalid("payload exceeds u32 length"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(msg.msg_type());
    out.extend_from_slice(&msg.agent_id().to_le_bytes());
    out.extend_from_slice(&msg.round().to_le_bytes());
    out.extend_from_slice(&payload_len.to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<RoundMessage> {
    if bytes.len() < HEADER_LEN {
        return Err(MopsError::protocol(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(MopsError::protocol(format!("bad magic {:02X?}", &bytes[..4])));
    }
    if bytes[4] != VERSION {
        return Err(MopsError::protocol(format!("unsupported version {}", bytes[4])));
    }
    let msg_type = bytes[5];
    let agent_id = u16::from_le_bytes([bytes[6], bytes[7]]);
    let round = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let payload_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != payload_len {
        return Err(MopsError::protocol(format!(
            "header announces {payload_len} payload bytes, found {}",
            payload.len()
        )));
    }
    let mut r = Reader { buf: payload, pos: 0 };
    let msg = match msg_type {
        0x01 => {
            let tag = r.tag()?;
            let seq = r.u32()?;
            let z = r.vec()?;
            let y = r.vec()?;
            RoundMessage::Embedding(EmbeddingRecord {
                agent_id,
                round,
                tag,
                seq,
                z,
                y,
            })
        }
        0x02 => {
            let tag = r.tag()?;
            let g_boundary = r.vec()?;
            RoundMessage::Gradient(GradientRecord {
                agent_id,
                round,
                tag,
                g_boundary,
            })
        }
        0x03 => RoundMessage::Weights(WeightsBroadcast {
            agent_id,
            round,
            weights: r.vec()?,
        }),
        0x04 => {
            let kind = match r.u8()? {
                CONTROL_ASSIGN => {
                    let scheme = scheme_from_code(r.u8()?)?;
                    let boundary = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
                    let embedding_dim = r.u32()?;
                    ControlKind::Assign {
                        scheme,
                        boundary,
                        embedding_dim,
                    }
                }
                CONTROL_BARRIER => ControlKind::Barrier,
                CONTROL_SHUTDOWN => ControlKind::Shutdown,
                other => return Err(MopsError::protocol(format!("unknown control kind {other:#04x}"))),
            };
            RoundMessage::Control(ControlMessage {
                agent_id,
                round,
                kind,
            })
        }
        other => return Err(MopsError::protocol(format!("unknown message type {other:#04x}"))),
    };
    if r.pos != payload.len() {
        return Err(MopsError::protocol(format!(
            "{} trailing payload bytes",
            payload.len() - r.pos
        )));
    }
    Ok(msg)
}

fn put_vec(out: &mut Vec<u8>, v: &[f64]) -> Result<()> {
    let len = u32::try_from(v.len())
        .map_err(|_| MopsError::invalid(format!("vector of {} entries exceeds u32 length", v.len())))?;
    out.extend_from_slice(&len.to_le_bytes());
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(())
}

fn scheme_code(s: Scheme) -> u8 {
    match s {
        Scheme::None => 0,
        Scheme::ShareTop => 1,
        Scheme::ShareDeep => 2,
    }
}

fn scheme_from_code(c: u8) -> Result<Scheme> {
    match c {
        0 => Ok(Scheme::None),
        1 => Ok(Scheme::ShareTop),
        2 => Ok(Scheme::ShareDeep),
        other => Err(MopsError::protocol(format!("unknown scheme code {other}"))),
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(MopsError::protocol(format!(
                "truncated payload: need {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn tag(&mut self) -> Result<SampleTag> {
        let c = self.u8()?;
        SampleTag::from_code(c).ok_or_else(|| MopsError::protocol(format!("unknown sample tag {c}")))
    }

    fn vec(&mut self) -> Result<Vec<f64>> {
        let len = self.u32()? as usize;
        let raw = self.take(len.checked_mul(8).ok_or_else(|| MopsError::protocol("vector length overflow"))?)?;
        let v: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(MopsError::numeric("non-finite real in payload"));
        }
        Ok(v)
    }
}
