//! One [`Node`] implementation per registered kind.

use std::collections::VecDeque;

use super::{Input, Node, Outbox, Params};
use crate::attention::{
    apply_feedback, extract_region, itti_saliency, select_foa, spectral_saliency, AttentionState, Feedback, IttiConfig,
    SelectConfig,
};
use crate::bus::bag::{read_bag_file, BagRecord};
use crate::input::scene::{parse_distractors, parse_pair};
use crate::input::{gaussian_blur, resize_bilinear, SceneConfig, SequenceSource, SyntheticScene};
use crate::msg::{ImageMsg, Message, TrackState, TrackStatus};
use crate::task::{Bridge, BridgeCommand, BridgePolicy, TrackerCore};

const MAX_SIDE: i64 = 1 << 14;

/// Creates the node for `kind` from its resolved parameters.
pub fn build_node(kind: &str, params: &Params) -> Result<Box<dyn Node>, String> {
    let mut node: Box<dyn Node> = match kind {
        "image_sequence" => Box::new(ImageSequenceNode::open(params)?),
        "synthetic_scene" => Box::new(SyntheticSceneNode::new(scene_config(params)?)?),
        "bag_replay" => Box::new(BagReplayNode::default()),
        "preprocess_gaussian" => Box::new(GaussianNode { sigma: 1.0 }),
        "preprocess_resize" => Box::new(ResizeNode { to: (1, 1) }),
        "attention_itti" => Box::new(IttiNode::default()),
        "attention_spectral" => Box::new(SpectralNode::default()),
        "foa_selector" => Box::new(SelectorNode::default()),
        "region_extractor" => Box::new(ExtractorNode { threshold: 0.7 }),
        "bridge" => Box::new(BridgeNode {
            bridge: Bridge::new(BridgePolicy::default()).map_err(|e| e.to_string())?,
        }),
        "tracker_ncc" => Box::new(TrackerNode::default()),
        other => return Err(format!("no implementation for kind {other}")),
    };
    node.configure(params)?;
    Ok(node)
}

fn image_of(input: &Input, port: usize) -> Option<&ImageMsg> {
    match input.on(port) {
        Some(Message::Image(m)) => Some(m),
        _ => None,
    }
}

pub fn scene_config(p: &Params) -> Result<SceneConfig, String> {
    let width = p.int_in("w", 1, MAX_SIDE)?;
    let height = p.int_in("h", 1, MAX_SIDE)?;
    let vanish = p.str("vanish")?.trim();
    let hidden = if vanish.is_empty() {
        None
    } else {
        let (a, b) = parse_pair::<u64>(vanish).map_err(|e| format!("vanish: {e}"))?;
        if a > b {
            return Err(format!("vanish range {a},{b} is reversed"));
        }
        Some((a, b))
    };
    Ok(SceneConfig {
        width,
        height,
        background: p.int_in("background", 0, 255)?,
        side: p.int_in("side", 1, MAX_SIDE)?,
        pos: parse_pair(p.str("pos")?).map_err(|e| format!("pos: {e}"))?,
        vel: parse_pair(p.str("vel")?).map_err(|e| format!("vel: {e}"))?,
        level: p.int_in("level", 0, 255)?,
        hidden,
        distractors: parse_distractors(p.str("distractors")?).map_err(|e| e.to_string())?,
        noise: p.int_in("noise", 0, 255)?,
        seed: p.int_in("seed", 0, i64::MAX)?,
        fps: p.f64_in("fps", 1e-3, 1e6)?,
        frames: p.int_in("frames", 0, i64::MAX)?,
    })
}

struct SyntheticSceneNode {
    scene: SyntheticScene,
}

impl SyntheticSceneNode {
    fn new(cfg: SceneConfig) -> Result<Self, String> {
        Ok(SyntheticSceneNode {
            scene: SyntheticScene::new(cfg).map_err(|e| e.to_string())?,
        })
    }
}

impl Node for SyntheticSceneNode {
    fn next_due(&self) -> Option<u64> {
        (!self.scene.finished()).then(|| self.scene.stamp_of(self.scene.frame_index()))
    }

    fn tick(&mut self, out: &mut Outbox) -> Result<(), String> {
        if let Some((img, gt)) = self.scene.step() {
            out.port(0, Message::Image(img));
            if let Some(gt) = gt {
                out.port(1, Message::ObjectFoa(gt));
            }
        }
        Ok(())
    }

    /// A changed scene is regenerated and fast-forwarded to the current
    /// frame, so the stream stays a function of (config, frame index).
    fn configure(&mut self, params: &Params) -> Result<(), String> {
        let cfg = scene_config(params)?;
        if &cfg == self.scene.config() {
            return Ok(());
        }
        let at = self.scene.frame_index();
        let mut scene = SyntheticScene::new(cfg).map_err(|e| e.to_string())?;
        while scene.frame_index() < at && scene.step().is_some() {}
        self.scene = scene;
        Ok(())
    }
}

struct ImageSequenceNode {
    src: SequenceSource,
    location: (String, String),
    done: bool,
}

impl ImageSequenceNode {
    fn open(p: &Params) -> Result<Self, String> {
        let (dir, pattern) = (p.str("dir")?.to_string(), p.str("pattern")?.to_string());
        let src = SequenceSource::open(&dir, &pattern, p.f64("fps")?, p.bool("loop")?).map_err(|e| e.to_string())?;
        Ok(ImageSequenceNode {
            src,
            location: (dir, pattern),
            done: false,
        })
    }
}

impl Node for ImageSequenceNode {
    fn next_due(&self) -> Option<u64> {
        (!self.done).then(|| self.src.next_stamp())
    }

    fn tick(&mut self, out: &mut Outbox) -> Result<(), String> {
        match self.src.next_frame() {
            Ok(Some(img)) => out.port(0, Message::Image(img)),
            Ok(None) => self.done = true,
            Err(e) => return Err(e.to_string()),
        }
        Ok(())
    }

    fn configure(&mut self, p: &Params) -> Result<(), String> {
        let fps = p.f64_in("fps", 1e-3, 1e6)?;
        let looping = p.bool("loop")?;
        if (p.str("dir")?, p.str("pattern")?) != (self.location.0.as_str(), self.location.1.as_str()) {
            *self = ImageSequenceNode::open(p)?;
        }
        self.src.set_fps(fps);
        self.src.set_looping(looping);
        if looping {
            self.done = false;
        }
        Ok(())
    }
}

/// Republishes a bag with original topics and headers, scheduled by the
/// recorded receive times.
#[derive(Default)]
struct BagReplayNode {
    records: Vec<BagRecord>,
    source: (String, String),
    rate: f64,
    looping: bool,
    next: usize,
    pass: u64,
}

impl BagReplayNode {
    fn offset(&self, i: usize) -> u64 {
        let first = self.records[0].recv_stamp_ns;
        ((self.records[i].recv_stamp_ns - first) as f64 / self.rate).round() as u64
    }

    fn pass_len(&self) -> u64 {
        let n = self.records.len() as u64;
        let last = self.offset(self.records.len() - 1);
        // one average inter-record gap separates passes
        let gap = if n > 1 { last / (n - 1) } else { 0 };
        last + gap.max(1)
    }
}

impl Node for BagReplayNode {
    fn next_due(&self) -> Option<u64> {
        if self.records.is_empty() || (self.next >= self.records.len() && !self.looping) {
            return None;
        }
        let (pass, i) = if self.next >= self.records.len() {
            (self.pass + 1, 0)
        } else {
            (self.pass, self.next)
        };
        Some(pass * self.pass_len() + self.offset(i))
    }

    fn tick(&mut self, out: &mut Outbox) -> Result<(), String> {
        if self.next >= self.records.len() {
            if !self.looping || self.records.is_empty() {
                return Ok(());
            }
            self.next = 0;
            self.pass += 1;
        }
        let rec = &self.records[self.next];
        out.verbatim(&rec.topic, rec.msg.clone());
        self.next += 1;
        Ok(())
    }

    fn configure(&mut self, p: &Params) -> Result<(), String> {
        let rate = p.f64_in("rate", 1e-6, 1e6)?;
        let looping = p.bool("loop")?;
        let source = (p.str("file")?.to_string(), p.str("topics")?.to_string());
        if source != self.source {
            if source.0.is_empty() {
                return Err("file is required".into());
            }
            let wanted: Vec<&str> = source.1.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
            let records: Vec<BagRecord> = read_bag_file(&source.0)
                .map_err(|e| format!("{}: {e}", source.0))?
                .into_iter()
                .filter(|r| wanted.is_empty() || wanted.contains(&r.topic.as_str()))
                .collect();
            self.records = records;
            self.source = source;
            self.next = 0;
            self.pass = 0;
        }
        self.rate = rate;
        self.looping = looping;
        Ok(())
    }
}

struct GaussianNode {
    sigma: f64,
}

impl Node for GaussianNode {
    fn on_input(&mut self, input: Input, out: &mut Outbox) -> Result<(), String> {
        if let Some(img) = image_of(&input, 0) {
            out.port(
                0,
                Message::Image(gaussian_blur(img, self.sigma).map_err(|e| e.to_string())?),
            );
        }
        Ok(())
    }

    fn configure(&mut self, p: &Params) -> Result<(), String> {
        let sigma = p.f64("sigma")?;
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(format!("sigma {sigma} must be > 0"));
        }
        self.sigma = sigma;
        Ok(())
    }
}

struct ResizeNode {
    to: (u32, u32),
}

impl Node for ResizeNode {
    fn on_input(&mut self, input: Input, out: &mut Outbox) -> Result<(), String> {
        if let Some(img) = image_of(&input, 0) {
            out.port(0, Message::Image(resize_bilinear(img, self.to)));
        }
        Ok(())
    }

    fn configure(&mut self, p: &Params) -> Result<(), String> {
        self.to = (p.int_in("w", 1, MAX_SIDE)?, p.int_in("h", 1, MAX_SIDE)?);
        Ok(())
    }
}

pub fn parse_gains(s: &str) -> Result<[f32; 4], String> {
    let v: Vec<f32> = s
        .split(',')
        .map(|t| t.trim().parse::<f32>().ok().filter(|g| g.is_finite() && *g >= 0.0))
        .collect::<Option<_>>()
        .ok_or_else(|| format!("gains {s:?} must be four non-negative numbers"))?;
    v.try_into().map_err(|_| format!("gains {s:?} must have four entries"))
}

/// Applies gain and inhibition messages; returns false for other input.
fn feedback(state: &mut AttentionState, input: &Input) -> bool {
    let Input::Single { env, .. } = input else { return false };
    match &*env.msg {
        Message::TopDownGain(g) => apply_feedback(state, Feedback::Gain(g)),
        Message::InhibitRegion(r) => apply_feedback(state, Feedback::Inhibit(r)),
        _ => return false,
    }
    true
}

#[derive(Default)]
struct IttiNode {
    cfg: IttiConfig,
    state: AttentionState,
    gains: Option<[f32; 4]>,
}

impl Node for IttiNode {
    fn on_input(&mut self, input: Input, out: &mut Outbox) -> Result<(), String> {
        if feedback(&mut self.state, &input) {
            return Ok(());
        }
        if let Some(img) = image_of(&input, 0) {
            let s = itti_saliency(img, &mut self.state, &self.cfg).map_err(|e| e.to_string())?;
            out.port(0, Message::Saliency(s));
        }
        Ok(())
    }

    fn configure(&mut self, p: &Params) -> Result<(), String> {
        let cfg = IttiConfig {
            channels: IttiConfig::parse_channels(p.str("channels")?)?,
            depth: p.int_in("depth", 1, 16)?,
            out_level: p.int_in("out_level", 0, 16)?,
            ..IttiConfig::default()
        };
        let gains = parse_gains(p.str("gains")?)?;
        // the gains parameter only overrides top-down gains when it changes
        if self.gains != Some(gains) {
            self.state.gains = gains;
            self.gains = Some(gains);
        }
        self.cfg = cfg;
        Ok(())
    }
}

#[derive(Default)]
struct SpectralNode {
    state: AttentionState,
}

impl Node for SpectralNode {
    fn on_input(&mut self, input: Input, out: &mut Outbox) -> Result<(), String> {
        if feedback(&mut self.state, &input) {
            return Ok(());
        }
        if let Some(img) = image_of(&input, 0) {
            out.port(
                0,
                Message::Saliency(spectral_saliency(img, &mut self.state).map_err(|e| e.to_string())?),
            );
        }
        Ok(())
    }

    fn configure(&mut self, _: &Params) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Default)]
struct SelectorNode {
    cfg: SelectConfig,
    state: AttentionState,
}

impl Node for SelectorNode {
    fn on_input(&mut self, input: Input, out: &mut Outbox) -> Result<(), String> {
        let (Some(Message::Saliency(s)), Some(img)) = (input.on(0), image_of(&input, 1)) else {
            return Err("needs a saliency map and its image together; add a sync block".into());
        };
        let foa = select_foa(s, &mut self.state, &self.cfg, (img.width, img.height));
        out.port(0, Message::PointFoa(foa));
        Ok(())
    }

    fn configure(&mut self, p: &Params) -> Result<(), String> {
        self.cfg = SelectConfig {
            ior_radius: p.f64_in("ior_radius", 0.0, 1e6)?,
            ior_decay: p.f64_in("ior_decay", 0.0, 1.0)? as f32,
        };
        Ok(())
    }
}

struct ExtractorNode {
    threshold: f32,
}

impl Node for ExtractorNode {
    fn on_input(&mut self, input: Input, out: &mut Outbox) -> Result<(), String> {
        let (Some(Message::Saliency(s)), Some(Message::PointFoa(foa)), Some(img)) =
            (input.on(0), input.on(1), image_of(&input, 2))
        else {
            return Err("needs saliency, FOA and image together; add a sync block".into());
        };
        let (region, object) = extract_region(s, foa, self.threshold, (img.width, img.height));
        out.port(0, Message::RegionFoa(region));
        out.port(1, Message::ObjectFoa(object));
        Ok(())
    }

    fn configure(&mut self, p: &Params) -> Result<(), String> {
        let t = p.f64("threshold")?;
        if !(t > 0.0 && t <= 1.0) {
            return Err(format!("threshold {t} must be in (0, 1]"));
        }
        self.threshold = t as f32;
        Ok(())
    }
}

struct BridgeNode {
    bridge: Bridge,
}

impl Node for BridgeNode {
    fn on_input(&mut self, input: Input, out: &mut Outbox) -> Result<(), String> {
        let cmds = match (&input, input.on(2)) {
            (Input::Single { .. }, Some(Message::TrackState(ts))) => self.bridge.on_track(ts),
            _ => match (image_of(&input, 0), input.on(1)) {
                (Some(img), Some(Message::ObjectFoa(foa))) => self.bridge.on_foa(foa, (img.width, img.height)),
                _ => return Err("needs an image and its object FOA together; add a sync block".into()),
            },
        };
        for c in cmds {
            match c {
                BridgeCommand::Init { header, bbox } => out.port(
                    0,
                    Message::TrackState(TrackState {
                        header,
                        state: TrackStatus::Tracking,
                        bbox,
                        confidence: 1.0,
                    }),
                ),
                BridgeCommand::Stop { header, bbox } => out.port(
                    0,
                    Message::TrackState(TrackState {
                        header,
                        state: TrackStatus::Lost,
                        bbox,
                        confidence: 0.0,
                    }),
                ),
                BridgeCommand::Inhibit(r) => out.port(1, Message::InhibitRegion(r)),
            }
        }
        Ok(())
    }

    fn configure(&mut self, p: &Params) -> Result<(), String> {
        let policy = BridgePolicy {
            theta_start: p.f64("theta_start")?,
            a_min: p.f64("a_min")?,
            a_max: p.f64("a_max")?,
            theta_conf: p.f64("theta_conf")?,
            k: p.int_in("k", 1, u32::MAX as i64)?,
            inhibit_frames: p.int_in("inhibit_frames", 0, u32::MAX as i64)?,
        };
        policy.validate().map_err(|e| e.to_string())?;
        self.bridge.policy = policy;
        Ok(())
    }
}

/// Frames kept so that an init command can refer to an image that has
/// already been seen.
const TRACKER_HISTORY: usize = 32;

#[derive(Default)]
struct TrackerNode {
    margin: f64,
    update_rate: f64,
    history: VecDeque<ImageMsg>,
    core: Option<TrackerCore>,
}

impl Node for TrackerNode {
    fn on_input(&mut self, input: Input, out: &mut Outbox) -> Result<(), String> {
        if let Some(img) = image_of(&input, 0) {
            let st = match &mut self.core {
                Some(core) => core.step(img),
                None => TrackState::idle(img.header.clone()),
            };
            out.port(0, Message::TrackState(st));
            self.history.push_back(img.clone());
            if self.history.len() > TRACKER_HISTORY {
                self.history.pop_front();
            }
            return Ok(());
        }
        let Some(Message::TrackState(cmd)) = input.on(1) else {
            return Ok(());
        };
        match cmd.state {
            TrackStatus::Tracking => {
                let stamp = cmd.header.stamp_ns;
                let at = self
                    .history
                    .iter()
                    .position(|f| f.header.stamp_ns == stamp)
                    .ok_or_else(|| format!("init refers to stamp {stamp}, which is not among recent frames"))?;
                let (mut core, st) = TrackerCore::init(&self.history[at], cmd.bbox, self.margin, self.update_rate)
                    .map_err(|e| e.to_string())?;
                out.port(0, Message::TrackState(st));
                // frames that arrived after the init frame
                for f in self.history.iter().skip(at + 1) {
                    out.port(0, Message::TrackState(core.step(f)));
                }
                self.core = Some(core);
            }
            TrackStatus::Lost => {
                if let Some(core) = self.core.take() {
                    let mut st = core.state(cmd.header.clone());
                    st.state = TrackStatus::Lost;
                    out.port(0, Message::TrackState(st));
                }
            }
            TrackStatus::Idle => {}
        }
        Ok(())
    }

    fn configure(&mut self, p: &Params) -> Result<(), String> {
        let margin = p.f64_in("margin", 0.0, 100.0)?;
        let update_rate = p.f64_in("update_rate", 0.0, 1.0)?;
        self.margin = margin;
        self.update_rate = update_rate;
        if let Some(core) = &mut self.core {
            core.margin = margin;
            core.update_rate = update_rate;
        }
        Ok(())
    }
}
