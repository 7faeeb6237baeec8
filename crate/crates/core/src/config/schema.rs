//! Registered node kinds: their parameters and ports.

use crate::msg::{MessageKind, ParamValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    F64,
    I64,
    Bool,
    Str,
}

impl ParamType {
    /// Parses a config token. Integers are accepted where floats are expected.
    pub fn parse(self, raw: &str) -> Result<ParamValue, String> {
        match self {
            ParamType::F64 => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(ParamValue::F64)
                .ok_or_else(|| format!("{raw:?} is not a number")),
            ParamType::I64 => raw
                .parse()
                .map(ParamValue::I64)
                .map_err(|_| format!("{raw:?} is not an integer")),
            ParamType::Bool => match raw {
                "true" | "1" | "yes" | "on" => Ok(ParamValue::Bool(true)),
                "false" | "0" | "no" | "off" => Ok(ParamValue::Bool(false)),
                _ => Err(format!("{raw:?} is not a boolean")),
            },
            ParamType::Str => Ok(ParamValue::Str(raw.to_string())),
        }
    }

    /// Coerces a value arriving at runtime (e.g. from JSON) to this type.
    pub fn coerce(self, v: &ParamValue) -> Result<ParamValue, String> {
        match (self, v) {
            (ParamType::F64, ParamValue::F64(x)) if x.is_finite() => Ok(v.clone()),
            (ParamType::F64, ParamValue::I64(x)) => Ok(ParamValue::F64(*x as f64)),
            (ParamType::I64, ParamValue::I64(_)) => Ok(v.clone()),
            (ParamType::I64, ParamValue::F64(x)) if x.fract() == 0.0 && x.abs() < 9e15 => {
                Ok(ParamValue::I64(*x as i64))
            }
            (ParamType::Bool, ParamValue::Bool(_)) => Ok(v.clone()),
            (ParamType::Str, ParamValue::Str(_)) => Ok(v.clone()),
            (_, ParamValue::Str(s)) => self.parse(s),
            (t, v) => Err(format!("expected {t:?}, got {v}")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub ty: ParamType,
    pub default: &'static str,
}

#[derive(Debug, Clone, Copy)]
pub struct PortSpec {
    pub name: &'static str,
    pub kind: MessageKind,
    pub topic: &'static str,
}

#[derive(Debug, Clone, Copy)]
pub struct KindSpec {
    pub kind: &'static str,
    pub params: &'static [ParamSpec],
    pub inputs: &'static [PortSpec],
    pub outputs: &'static [PortSpec],
    /// Input ports delivered together through a synchronizer unless the
    /// config supplies its own sync block.
    pub default_sync: &'static [&'static str],
    pub source: bool,
}

impl KindSpec {
    pub fn param(&self, name: &str) -> Option<&'static ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|p| p.name == name)
    }

    pub fn default_params(&self) -> Vec<(String, ParamValue)> {
        self.params
            .iter()
            .map(|p| {
                (
                    p.name.to_string(),
                    p.ty.parse(p.default).expect("schema default parses"),
                )
            })
            .collect()
    }

    pub fn is_attention(&self) -> bool {
        self.kind.starts_with("attention_")
    }
}

macro_rules! p {
    ($n:literal, $t:ident, $d:literal) => {
        ParamSpec {
            name: $n,
            ty: ParamType::$t,
            default: $d,
        }
    };
}

macro_rules! port {
    ($n:literal, $k:ident, $t:literal) => {
        PortSpec {
            name: $n,
            kind: MessageKind::$k,
            topic: $t,
        }
    };
}

/// Default slop for implicit synchronizers, 1 ms.
pub const DEFAULT_SYNC_SLOP_NS: u64 = 1_000_000;

pub const PARAMS_TOPIC: &str = "/params";
pub const PARAM_ACK_TOPIC: &str = "/param_ack";
pub const PARAM_ERROR_TOPIC: &str = "/param_error";

static KINDS: &[KindSpec] = &[
    KindSpec {
        kind: "image_sequence",
        params: &[
            p!("dir", Str, "."),
            p!("pattern", Str, "*"),
            p!("fps", F64, "30"),
            p!("loop", Bool, "false"),
        ],
        inputs: &[],
        outputs: &[port!("image", Image, "/image")],
        default_sync: &[],
        source: true,
    },
    KindSpec {
        kind: "synthetic_scene",
        params: &[
            p!("w", I64, "256"),
            p!("h", I64, "256"),
            p!("side", I64, "20"),
            p!("pos", Str, "10,10"),
            p!("vel", Str, "0,0"),
            p!("noise", I64, "0"),
            p!("seed", I64, "0"),
            p!("distractors", Str, ""),
            p!("background", I64, "128"),
            p!("level", I64, "255"),
            p!("frames", I64, "150"),
            p!("fps", F64, "30"),
            p!("vanish", Str, ""),
        ],
        inputs: &[],
        outputs: &[port!("image", Image, "/image"), port!("gt", ObjectFoa, "/gt")],
        default_sync: &[],
        source: true,
    },
    KindSpec {
        kind: "bag_replay",
        params: &[
            p!("file", Str, ""),
            p!("rate", F64, "1"),
            p!("loop", Bool, "false"),
            p!("topics", Str, ""),
        ],
        inputs: &[],
        outputs: &[],
        default_sync: &[],
        source: true,
    },
    KindSpec {
        kind: "preprocess_gaussian",
        params: &[p!("sigma", F64, "1")],
        inputs: &[port!("image", Image, "/image")],
        outputs: &[port!("image", Image, "/image_smooth")],
        default_sync: &[],
        source: false,
    },
    KindSpec {
        kind: "preprocess_resize",
        params: &[p!("w", I64, "128"), p!("h", I64, "128")],
        inputs: &[port!("image", Image, "/image")],
        outputs: &[port!("image", Image, "/image_resized")],
        default_sync: &[],
        source: false,
    },
    KindSpec {
        kind: "attention_itti",
        params: &[
            p!("channels", Str, "icom"),
            p!("gains", Str, "1,1,1,1"),
            p!("depth", I64, "8"),
            p!("out_level", I64, "2"),
        ],
        inputs: &[
            port!("image", Image, "/image"),
            port!("gain", TopDownGain, "/gain"),
            port!("inhibit", InhibitRegion, "/inhibit_region"),
        ],
        outputs: &[port!("saliency", Saliency, "/saliency")],
        default_sync: &[],
        source: false,
    },
    KindSpec {
        kind: "attention_spectral",
        params: &[],
        inputs: &[
            port!("image", Image, "/image"),
            port!("inhibit", InhibitRegion, "/inhibit_region"),
        ],
        outputs: &[port!("saliency", Saliency, "/saliency")],
        default_sync: &[],
        source: false,
    },
    KindSpec {
        kind: "foa_selector",
        params: &[p!("ior_radius", F64, "16"), p!("ior_decay", F64, "0.9")],
        inputs: &[
            port!("saliency", Saliency, "/saliency"),
            port!("image", Image, "/image"),
        ],
        outputs: &[port!("foa", PointFoa, "/foa")],
        default_sync: &["saliency", "image"],
        source: false,
    },
    KindSpec {
        kind: "region_extractor",
        params: &[p!("threshold", F64, "0.7")],
        inputs: &[
            port!("saliency", Saliency, "/saliency"),
            port!("foa", PointFoa, "/foa"),
            port!("image", Image, "/image"),
        ],
        outputs: &[
            port!("region", RegionFoa, "/region_foa"),
            port!("object", ObjectFoa, "/object_foa"),
        ],
        default_sync: &["saliency", "foa", "image"],
        source: false,
    },
    KindSpec {
        kind: "bridge",
        params: &[
            p!("theta_start", F64, "0.6"),
            p!("a_min", F64, "0.001"),
            p!("a_max", F64, "0.25"),
            p!("theta_conf", F64, "0.5"),
            p!("k", I64, "5"),
            p!("inhibit_frames", I64, "30"),
        ],
        inputs: &[
            port!("image", Image, "/image"),
            port!("object", ObjectFoa, "/object_foa"),
            port!("track", TrackState, "/track_state"),
        ],
        outputs: &[
            port!("command", TrackState, "/track_cmd"),
            port!("inhibit", InhibitRegion, "/inhibit_region"),
        ],
        default_sync: &["image", "object"],
        source: false,
    },
    KindSpec {
        kind: "tracker_ncc",
        params: &[p!("margin", F64, "0.5"), p!("update_rate", F64, "0")],
        inputs: &[
            port!("image", Image, "/image"),
            port!("command", TrackState, "/track_cmd"),
        ],
        outputs: &[port!("state", TrackState, "/track_state")],
        default_sync: &[],
        source: false,
    },
];

pub fn kinds() -> &'static [KindSpec] {
    KINDS
}

pub fn kind_spec(kind: &str) -> Option<&'static KindSpec> {
    KINDS.iter().find(|k| k.kind == kind)
}
