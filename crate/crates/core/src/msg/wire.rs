//! Length-prefixed binary frames shared by the TCP transport and bag files.
//!
//! ```text
//! [len u32][topic_len u16][topic][type_id u16][seq u32][stamp_ns u64]
//! [frame_id_len u16][frame_id][body]
//! ```
//!
//! All integers and floats are little-endian. `len` counts every byte after
//! itself.

use super::*;
use thiserror::Error;

pub const MAX_FRAME_LEN: u64 = u32::MAX as u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("frame truncated: need {need} bytes, have {have}")]
    Truncated { need: u64, have: u64 },
    #[error("unknown type id {0}")]
    UnknownTypeId(u16),
    #[error("body length mismatch: expected {expected} bytes, found {actual}")]
    BodyLengthMismatch { expected: u64, actual: u64 },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("frame of {0} bytes exceeds the 4 GiB limit")]
    OversizedMessage(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum ControlOp {
    Advertise = 100,
    Subscribe = 101,
}

/// A decoded wire frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Data {
        topic: String,
        msg: Message,
    },
    /// Control frames have an empty body. The header `seq` field carries the
    /// message type id the topic is bound to, or 0 when unspecified.
    Control {
        op: ControlOp,
        topic: String,
        header: Header,
    },
}

impl Frame {
    pub fn topic(&self) -> &str {
        match self {
            Frame::Data { topic, .. } | Frame::Control { topic, .. } => topic,
        }
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn str16(&mut self, s: &str, what: &str) -> Result<(), WireError> {
        let len = u16::try_from(s.len())
            .map_err(|_| WireError::InvariantViolation(format!("{what} longer than 65535 bytes")))?;
        self.u16(len);
        self.buf.extend_from_slice(s.as_bytes());
        Ok(())
    }
    fn bbox(&mut self, b: &BoundingBox) {
        self.u32(b.x);
        self.u32(b.y);
        self.u32(b.w);
        self.u32(b.h);
    }
}

fn write_prefix(topic: &str, type_id: u16, header: &Header, body_hint: usize) -> Result<Writer, WireError> {
    if topic.is_empty() {
        return Err(WireError::InvariantViolation("empty topic".into()));
    }
    let mut w = Writer {
        buf: Vec::with_capacity(4 + 2 + topic.len() + 2 + 12 + 2 + header.frame_id.len() + body_hint),
    };
    w.u32(0);
    w.str16(topic, "topic")?;
    w.u16(type_id);
    w.u32(header.seq);
    w.u64(header.stamp_ns);
    w.str16(&header.frame_id, "frame_id")?;
    Ok(w)
}

fn finish(mut w: Writer) -> Result<Vec<u8>, WireError> {
    let len = (w.buf.len() - 4) as u64;
    if len > MAX_FRAME_LEN {
        return Err(WireError::OversizedMessage(len));
    }
    w.buf[..4].copy_from_slice(&(len as u32).to_le_bytes());
    Ok(w.buf)
}

/// Encodes a data message on `topic`.
pub fn serialize_frame(topic: &str, msg: &Message) -> Result<Vec<u8>, WireError> {
    msg.validate().map_err(WireError::InvariantViolation)?;
    let hint = match msg {
        Message::Image(m) => m.pixels.len() + 9,
        Message::Saliency(m) => m.values.len() * 4 + 8,
        Message::RegionFoa(m) => m.mask.len() + 20,
        _ => 64,
    };
    // Reject before allocating gigabytes we can't send anyway.
    if hint as u64 > MAX_FRAME_LEN {
        return Err(WireError::OversizedMessage(hint as u64));
    }
    let mut w = write_prefix(topic, msg.kind().id(), msg.header(), hint)?;
    match msg {
        Message::Image(m) => {
            w.u32(m.width);
            w.u32(m.height);
            w.u8(m.channels);
            w.buf.extend_from_slice(&m.pixels);
        }
        Message::Saliency(m) => {
            w.u32(m.width);
            w.u32(m.height);
            for v in &m.values {
                w.f32(*v);
            }
        }
        Message::PointFoa(m) => {
            w.u32(m.x);
            w.u32(m.y);
            w.f32(m.score);
        }
        Message::ObjectFoa(m) => {
            w.bbox(&m.bbox);
            w.f32(m.score);
        }
        Message::RegionFoa(m) => {
            w.bbox(&m.bbox);
            w.f32(m.score);
            w.buf.extend_from_slice(&m.mask);
        }
        Message::TrackState(m) => {
            w.u8(m.state as u8);
            w.bbox(&m.bbox);
            w.f32(m.confidence);
        }
        Message::ParamUpdate(m) => {
            w.str16(&m.node, "node")?;
            w.str16(&m.param, "param")?;
            match &m.value {
                ParamValue::F64(v) => {
                    w.u8(0);
                    w.f64(*v);
                }
                ParamValue::I64(v) => {
                    w.u8(1);
                    w.u64(*v as u64);
                }
                ParamValue::Bool(v) => {
                    w.u8(2);
                    w.u8(*v as u8);
                }
                ParamValue::Str(v) => {
                    w.u8(3);
                    w.str16(v, "string value")?;
                }
            }
        }
        Message::TopDownGain(m) => {
            for g in m.gains {
                w.f32(g);
            }
        }
        Message::InhibitRegion(m) => {
            w.bbox(&m.bbox);
            w.u32(m.decay_frames);
        }
    }
    finish(w)
}

/// Encodes an ADVERTISE or SUBSCRIBE frame.
pub fn encode_control(op: ControlOp, topic: &str, header: &Header) -> Result<Vec<u8>, WireError> {
    finish(write_prefix(topic, op as u16, header, 0)?)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }
    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }
    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes([b[0], b[1]]))
    }
    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
    fn f32(&mut self) -> Option<f32> {
        self.u32().map(f32::from_bits)
    }
    fn f64(&mut self) -> Option<f64> {
        self.u64().map(f64::from_bits)
    }
    fn str16(&mut self) -> Option<Result<String, WireError>> {
        let n = self.u16()? as usize;
        let bytes = self.take(n)?;
        Some(
            std::str::from_utf8(bytes)
                .map(str::to_owned)
                .map_err(|_| WireError::InvariantViolation("invalid UTF-8 string".into())),
        )
    }
    fn bbox(&mut self) -> Option<BoundingBox> {
        Some(BoundingBox::new(self.u32()?, self.u32()?, self.u32()?, self.u32()?))
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Returns the total size of the frame starting at `bytes`, if the length
/// prefix is present.
pub fn frame_len(bytes: &[u8]) -> Option<u64> {
    bytes
        .get(..4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as u64 + 4)
}

/// Decodes exactly one frame; trailing bytes are rejected.
pub fn deserialize_frame(bytes: &[u8]) -> Result<Frame, WireError> {
    let have = bytes.len() as u64;
    let total = frame_len(bytes).ok_or(WireError::Truncated { need: 4, have })?;
    if have < total {
        return Err(WireError::Truncated { need: total, have });
    }
    if have > total {
        return Err(WireError::BodyLengthMismatch {
            expected: total,
            actual: have,
        });
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let prefix_cut = |r: &Reader| WireError::Truncated {
        need: r.pos as u64 + 1,
        have,
    };
    let topic = r.str16().ok_or_else(|| prefix_cut(&r))??;
    if topic.is_empty() {
        return Err(WireError::InvariantViolation("empty topic".into()));
    }
    let type_id = r.u16().ok_or_else(|| prefix_cut(&r))?;
    let seq = r.u32().ok_or_else(|| prefix_cut(&r))?;
    let stamp_ns = r.u64().ok_or_else(|| prefix_cut(&r))?;
    let frame_id = r.str16().ok_or_else(|| prefix_cut(&r))??;
    let header = Header {
        seq,
        stamp_ns,
        frame_id,
    };

    let op = match type_id {
        100 => Some(ControlOp::Advertise),
        101 => Some(ControlOp::Subscribe),
        _ => None,
    };
    if let Some(op) = op {
        if r.remaining() != 0 {
            return Err(WireError::BodyLengthMismatch {
                expected: 0,
                actual: r.remaining() as u64,
            });
        }
        return Ok(Frame::Control { op, topic, header });
    }
    let kind = MessageKind::from_id(type_id).ok_or(WireError::UnknownTypeId(type_id))?;
    let msg = decode_body(kind, header, &mut r)?;
    if r.remaining() != 0 {
        return Err(WireError::BodyLengthMismatch {
            expected: r.pos as u64,
            actual: have,
        });
    }
    msg.validate().map_err(WireError::InvariantViolation)?;
    Ok(Frame::Data { topic, msg })
}

fn decode_body(kind: MessageKind, header: Header, r: &mut Reader) -> Result<Message, WireError> {
    let body_start = r.pos;
    let short = |r: &Reader, expected: u64| WireError::BodyLengthMismatch {
        expected,
        actual: (r.buf.len() - body_start) as u64,
    };
    // Every fixed-size read below maps exhaustion to a length mismatch.
    macro_rules! get {
        ($e:expr, $need:expr) => {
            match $e {
                Some(v) => v,
                None => return Err(short(r, $need)),
            }
        };
    }
    let msg = match kind {
        MessageKind::Image => {
            let width = get!(r.u32(), 9);
            let height = get!(r.u32(), 9);
            let channels = get!(r.u8(), 9);
            let n = width as u64 * height as u64 * channels as u64;
            if n != r.remaining() as u64 {
                return Err(short(r, 9 + n));
            }
            let pixels = r.take(n as usize).unwrap().to_vec();
            Message::Image(ImageMsg {
                header,
                width,
                height,
                channels,
                pixels,
            })
        }
        MessageKind::Saliency => {
            let width = get!(r.u32(), 8);
            let height = get!(r.u32(), 8);
            let n = width as u64 * height as u64;
            if n * 4 != r.remaining() as u64 {
                return Err(short(r, 8 + n * 4));
            }
            let values = (0..n).map(|_| r.f32().unwrap()).collect();
            Message::Saliency(SaliencyMap {
                header,
                width,
                height,
                values,
            })
        }
        MessageKind::PointFoa => Message::PointFoa(PointFoa {
            header,
            x: get!(r.u32(), 12),
            y: get!(r.u32(), 12),
            score: get!(r.f32(), 12),
        }),
        MessageKind::ObjectFoa => Message::ObjectFoa(ObjectFoa {
            header,
            bbox: get!(r.bbox(), 20),
            score: get!(r.f32(), 20),
        }),
        MessageKind::RegionFoa => {
            let bbox = get!(r.bbox(), 20);
            let score = get!(r.f32(), 20);
            let n = RegionFoa::row_bytes(bbox.w) as u64 * bbox.h as u64;
            if n != r.remaining() as u64 {
                return Err(short(r, 20 + n));
            }
            let mask = r.take(n as usize).unwrap().to_vec();
            Message::RegionFoa(RegionFoa {
                header,
                bbox,
                mask,
                score,
            })
        }
        MessageKind::TrackState => {
            let raw = get!(r.u8(), 21);
            let state = TrackStatus::from_u8(raw)
                .ok_or_else(|| WireError::InvariantViolation(format!("unknown track state {raw}")))?;
            Message::TrackState(TrackState {
                header,
                state,
                bbox: get!(r.bbox(), 21),
                confidence: get!(r.f32(), 21),
            })
        }
        MessageKind::ParamUpdate => {
            let node = get!(r.str16(), 6)?;
            let param = get!(r.str16(), 6)?;
            let tag = get!(r.u8(), 6);
            let value = match tag {
                0 => ParamValue::F64(get!(r.f64(), 8)),
                1 => ParamValue::I64(get!(r.u64(), 8) as i64),
                2 => match get!(r.u8(), 1) {
                    0 => ParamValue::Bool(false),
                    1 => ParamValue::Bool(true),
                    b => return Err(WireError::InvariantViolation(format!("bad bool byte {b}"))),
                },
                3 => ParamValue::Str(get!(r.str16(), 2)?),
                t => return Err(WireError::InvariantViolation(format!("unknown value tag {t}"))),
            };
            Message::ParamUpdate(ParamUpdate {
                header,
                node,
                param,
                value,
            })
        }
        MessageKind::TopDownGain => {
            let mut gains = [0f32; 4];
            for g in &mut gains {
                *g = get!(r.f32(), 16);
            }
            Message::TopDownGain(TopDownGain { header, gains })
        }
        MessageKind::InhibitRegion => Message::InhibitRegion(InhibitRegion {
            header,
            bbox: get!(r.bbox(), 20),
            decay_frames: get!(r.u32(), 20),
        }),
    };
    Ok(msg)
}
