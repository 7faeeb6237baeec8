//! Message types carried on the bus.
//!
//! Every message is an immutable value with a [`Header`]. The binary layout
//! shared by the TCP transport and bag files lives in [`wire`].

mod bbox;
pub mod wire;

pub use bbox::{bbox_iou, bbox_scale, BoundingBox};
pub use wire::{deserialize_frame, encode_control, serialize_frame, ControlOp, Frame, WireError};

use std::fmt;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Header {
    pub seq: u32,
    pub stamp_ns: u64,
    pub frame_id: String,
}

impl Header {
    pub fn new(seq: u32, stamp_ns: u64) -> Self {
        Header {
            seq,
            stamp_ns,
            frame_id: String::new(),
        }
    }
}

/// Numeric type identifiers of the wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u16)]
pub enum MessageKind {
    Image = 1,
    Saliency = 2,
    PointFoa = 3,
    RegionFoa = 4,
    ObjectFoa = 5,
    TrackState = 6,
    ParamUpdate = 7,
    TopDownGain = 8,
    InhibitRegion = 9,
}

impl MessageKind {
    pub const ALL: [MessageKind; 9] = [
        MessageKind::Image,
        MessageKind::Saliency,
        MessageKind::PointFoa,
        MessageKind::RegionFoa,
        MessageKind::ObjectFoa,
        MessageKind::TrackState,
        MessageKind::ParamUpdate,
        MessageKind::TopDownGain,
        MessageKind::InhibitRegion,
    ];

    pub fn from_id(id: u16) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| *k as u16 == id)
    }

    pub fn id(self) -> u16 {
        self as u16
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Image => "ImageMsg",
            MessageKind::Saliency => "SaliencyMap",
            MessageKind::PointFoa => "PointFoa",
            MessageKind::RegionFoa => "RegionFoa",
            MessageKind::ObjectFoa => "ObjectFoa",
            MessageKind::TrackState => "TrackState",
            MessageKind::ParamUpdate => "ParamUpdate",
            MessageKind::TopDownGain => "TopDownGain",
            MessageKind::InhibitRegion => "InhibitRegion",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Raster frame, 8 bits per channel, row-major, origin top-left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageMsg {
    pub header: Header,
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub pixels: Vec<u8>,
}

impl ImageMsg {
    pub fn new(header: Header, width: u32, height: u32, channels: u8, pixels: Vec<u8>) -> Self {
        ImageMsg {
            header,
            width,
            height,
            channels,
            pixels,
        }
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Self {
        let len = width as usize * height as usize * channels as usize;
        ImageMsg::new(Header::default(), width, height, channels, vec![value; len])
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("image dimensions must be at least 1x1".into());
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(format!("unsupported channel count {}", self.channels));
        }
        let want = self.width as u64 * self.height as u64 * self.channels as u64;
        if self.pixels.len() as u64 != want {
            return Err(format!(
                "pixel buffer holds {} bytes, expected {want}",
                self.pixels.len()
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u8) -> u8 {
        let idx = (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize;
        self.pixels[idx]
    }

    /// Intensity plane as floats in 0..=255, (r+g+b)/3 for colour input.
    pub fn to_gray_f32(&self) -> Vec<f32> {
        match self.channels {
            1 => self.pixels.iter().map(|&p| p as f32).collect(),
            _ => self
                .pixels
                .chunks_exact(3)
                .map(|c| (c[0] as f32 + c[1] as f32 + c[2] as f32) / 3.0)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub header: Header,
    pub width: u32,
    pub height: u32,
    pub values: Vec<f32>,
}

impl SaliencyMap {
    pub fn new(header: Header, width: u32, height: u32, values: Vec<f32>) -> Self {
        SaliencyMap {
            header,
            width,
            height,
            values,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("saliency dimensions must be at least 1x1".into());
        }
        if self.values.len() as u64 != self.width as u64 * self.height as u64 {
            return Err("saliency value count does not match dimensions".into());
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(format!("saliency value {v} outside [0,1]"));
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFoa {
    pub header: Header,
    pub x: u32,
    pub y: u32,
    pub score: f32,
}

/// Connected salient region in saliency-map coordinates.
///
/// `mask` holds `bbox.h` rows of `ceil(bbox.w / 8)` bytes, MSB-first.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionFoa {
    pub header: Header,
    pub bbox: BoundingBox,
    pub mask: Vec<u8>,
    pub score: f32,
}

impl RegionFoa {
    pub fn row_bytes(w: u32) -> usize {
        (w as usize).div_ceil(8)
    }

    pub fn mask_len(bbox: &BoundingBox) -> usize {
        Self::row_bytes(bbox.w) * bbox.h as usize
    }

    /// Bit at bbox-relative `(x, y)`.
    pub fn bit(&self, x: u32, y: u32) -> bool {
        let row = Self::row_bytes(self.bbox.w);
        let byte = self.mask[y as usize * row + (x as usize >> 3)];
        byte & (0x80 >> (x & 7)) != 0
    }

    pub fn set_bits(&self) -> usize {
        self.mask.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.bbox.is_valid() {
            return Err("region bbox must be at least 1x1".into());
        }
        if self.mask.len() != Self::mask_len(&self.bbox) {
            return Err("region mask length does not match bbox".into());
        }
        let row = Self::row_bytes(self.bbox.w);
        let pad = row * 8 - self.bbox.w as usize;
        if pad > 0 {
            let pad_bits = (1u8 << pad) - 1;
            if self.mask.chunks(row).any(|r| r[row - 1] & pad_bits != 0) {
                return Err("region mask has bits set in row padding".into());
            }
        }
        if self.set_bits() == 0 {
            return Err("region mask is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectFoa {
    pub header: Header,
    pub bbox: BoundingBox,
    pub score: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum TrackStatus {
    Idle = 0,
    Tracking = 1,
    Lost = 2,
}

impl TrackStatus {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(TrackStatus::Idle),
            1 => Some(TrackStatus::Tracking),
            2 => Some(TrackStatus::Lost),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub header: Header,
    pub state: TrackStatus,
    /// Meaningless while `state` is `Idle`.
    pub bbox: BoundingBox,
    pub confidence: f32,
}

impl TrackState {
    pub fn idle(header: Header) -> Self {
        TrackState {
            header,
            state: TrackStatus::Idle,
            bbox: BoundingBox::default(),
            confidence: 0.0,
        }
    }
}

/// Channel order: intensity, color, orientation, motion.
#[derive(Debug, Clone, PartialEq)]
pub struct TopDownGain {
    pub header: Header,
    pub gains: [f32; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct InhibitRegion {
    pub header: Header,
    pub bbox: BoundingBox,
    pub decay_frames: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    F64(f64),
    I64(i64),
    Bool(bool),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::F64(v) => Some(v),
            ParamValue::I64(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            ParamValue::I64(v) => Some(v),
            ParamValue::F64(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Some(v as i64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            ParamValue::Bool(v) => Some(v),
            ParamValue::I64(0) => Some(false),
            ParamValue::I64(1) => Some(true),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            ParamValue::F64(v) => serde_json::json!(v),
            ParamValue::I64(v) => serde_json::json!(v),
            ParamValue::Bool(v) => serde_json::json!(v),
            ParamValue::Str(v) => serde_json::json!(v),
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Option<Self> {
        match v {
            serde_json::Value::Bool(b) => Some(ParamValue::Bool(*b)),
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(ParamValue::I64)
                .or_else(|| n.as_f64().map(ParamValue::F64)),
            serde_json::Value::String(s) => Some(ParamValue::Str(s.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::F64(v) => write!(f, "{v}"),
            ParamValue::I64(v) => write!(f, "{v}"),
            ParamValue::Bool(v) => write!(f, "{v}"),
            ParamValue::Str(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamUpdate {
    pub header: Header,
    pub node: String,
    pub param: String,
    pub value: ParamValue,
}

/// Any data message that can travel on a topic.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Image(ImageMsg),
    Saliency(SaliencyMap),
    PointFoa(PointFoa),
    RegionFoa(RegionFoa),
    ObjectFoa(ObjectFoa),
    TrackState(TrackState),
    ParamUpdate(ParamUpdate),
    TopDownGain(TopDownGain),
    InhibitRegion(InhibitRegion),
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Image(_) => MessageKind::Image,
            Message::Saliency(_) => MessageKind::Saliency,
            Message::PointFoa(_) => MessageKind::PointFoa,
            Message::RegionFoa(_) => MessageKind::RegionFoa,
            Message::ObjectFoa(_) => MessageKind::ObjectFoa,
            Message::TrackState(_) => MessageKind::TrackState,
            Message::ParamUpdate(_) => MessageKind::ParamUpdate,
            Message::TopDownGain(_) => MessageKind::TopDownGain,
            Message::InhibitRegion(_) => MessageKind::InhibitRegion,
        }
    }

    pub fn header(&self) -> &Header {
        match self {
            Message::Image(m) => &m.header,
            Message::Saliency(m) => &m.header,
            Message::PointFoa(m) => &m.header,
            Message::RegionFoa(m) => &m.header,
            Message::ObjectFoa(m) => &m.header,
            Message::TrackState(m) => &m.header,
            Message::ParamUpdate(m) => &m.header,
            Message::TopDownGain(m) => &m.header,
            Message::InhibitRegion(m) => &m.header,
        }
    }

    pub fn header_mut(&mut self) -> &mut Header {
        match self {
            Message::Image(m) => &mut m.header,
            Message::Saliency(m) => &mut m.header,
            Message::PointFoa(m) => &mut m.header,
            Message::RegionFoa(m) => &mut m.header,
            Message::ObjectFoa(m) => &mut m.header,
            Message::TrackState(m) => &mut m.header,
            Message::ParamUpdate(m) => &mut m.header,
            Message::TopDownGain(m) => &mut m.header,
            Message::InhibitRegion(m) => &mut m.header,
        }
    }

    pub fn stamp_ns(&self) -> u64 {
        self.header().stamp_ns
    }

    /// Checks the per-type invariants. Score-like floats must be finite.
    pub fn validate(&self) -> Result<(), String> {
        fn unit(name: &str, v: f32) -> Result<(), String> {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} {v} outside [0,1]"))
            }
        }
        fn bbox(b: &BoundingBox) -> Result<(), String> {
            if b.is_valid() {
                Ok(())
            } else {
                Err(format!("degenerate bbox {b:?}"))
            }
        }
        match self {
            Message::Image(m) => m.validate(),
            Message::Saliency(m) => m.validate(),
            Message::PointFoa(m) => unit("score", m.score),
            Message::RegionFoa(m) => {
                m.validate()?;
                if m.score.is_finite() {
                    Ok(())
                } else {
                    Err("non-finite region score".into())
                }
            }
            Message::ObjectFoa(m) => {
                bbox(&m.bbox)?;
                if m.score.is_finite() {
                    Ok(())
                } else {
                    Err("non-finite object score".into())
                }
            }
            Message::TrackState(m) => {
                unit("confidence", m.confidence)?;
                match m.state {
                    TrackStatus::Idle if m.confidence != 0.0 => {
                        Err("idle track state must carry zero confidence".into())
                    }
                    TrackStatus::Idle => Ok(()),
                    _ => bbox(&m.bbox),
                }
            }
            Message::ParamUpdate(m) => {
                if m.node.is_empty() || m.param.is_empty() {
                    Err("param update needs node and param names".into())
                } else {
                    Ok(())
                }
            }
            Message::TopDownGain(m) => {
                if m.gains.iter().all(|g| g.is_finite() && *g >= 0.0) {
                    Ok(())
                } else {
                    Err("gains must be finite and non-negative".into())
                }
            }
            Message::InhibitRegion(m) => {
                bbox(&m.bbox)?;
                if m.decay_frames == 0 {
                    Err("decay_frames must be at least 1".into())
                } else {
                    Ok(())
                }
            }
        }
    }
}

macro_rules! impl_from {
    ($($variant:ident => $ty:ty),* $(,)?) => {
        $(impl From<$ty> for Message {
            fn from(m: $ty) -> Self {
                Message::$variant(m)
            }
        })*
    };
}

impl_from! {
    Image => ImageMsg,
    Saliency => SaliencyMap,
    PointFoa => PointFoa,
    RegionFoa => RegionFoa,
    ObjectFoa => ObjectFoa,
    TrackState => TrackState,
    ParamUpdate => ParamUpdate,
    TopDownGain => TopDownGain,
    InhibitRegion => InhibitRegion,
}
