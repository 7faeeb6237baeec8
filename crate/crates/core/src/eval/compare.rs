use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use super::{compute_metrics, load_ground_truth, EvalError, FrameObservation, GroundTruthSet, MetricsRow};
use crate::bus::{Broker, Notify, Subscription};
use crate::config::{kind_spec, NodeDecl, PipelineConfig, PortSpec};
use crate::msg::{Message, TrackStatus};
use crate::runtime::{Pipeline, RunOptions};

/// Where ground truth comes from: a CSV file, or a topic of the pipeline
/// itself (`topic:/gt`), indexed like the image stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundTruthSource {
    File(PathBuf),
    Topic(String),
}

impl FromStr for GroundTruthSource {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.strip_prefix("topic:") {
            Some(t) => GroundTruthSource::Topic(t.to_string()),
            None => GroundTruthSource::File(PathBuf::from(s)),
        })
    }
}

/// Rebinds explicit port topics by port name after a kind change; ports
/// the new kind lacks are dropped, trailing defaults are trimmed.
fn rebind(old: &[PortSpec], explicit: &[String], new: &[PortSpec]) -> Vec<String> {
    let mut out: Vec<String> = new
        .iter()
        .map(|p| {
            old.iter()
                .position(|o| o.name == p.name)
                .and_then(|i| explicit.get(i).cloned())
                .unwrap_or_else(|| p.topic.to_string())
        })
        .collect();
    while out.len() > explicit.len().min(out.len()) || out.last().is_some_and(|t| new[out.len() - 1].topic == t) {
        out.pop();
    }
    out
}

/// The same node with a different attention kind. Parameters and sync
/// blocks that do not apply to the new kind are dropped.
pub fn swap_attention_kind(decl: &NodeDecl, kind: &str) -> Result<NodeDecl, String> {
    let new = kind_spec(kind)
        .filter(|k| k.is_attention())
        .ok_or_else(|| format!("{kind} is not an attention node kind"))?;
    let old = decl.spec();
    let mut d = decl.clone();
    d.kind = kind.to_string();
    d.params.retain(|(k, _)| new.param(k).is_some());
    d.subs = rebind(old.inputs, &decl.subs, new.inputs);
    d.pubs = rebind(old.outputs, &decl.pubs, new.outputs);
    d.sub_lines.clear();
    d.pub_lines.clear();
    let inputs = d.input_topics();
    d.syncs.retain(|s| s.topics.iter().all(|t| inputs.contains(t)));
    Ok(d)
}

fn output_of(cfg: &PipelineConfig, kind: &str, port: &str) -> Option<String> {
    let n = cfg.nodes.iter().find(|n| n.kind == kind)?;
    let i = n.spec().outputs.iter().position(|p| p.name == port)?;
    Some(n.output_topics()[i].clone())
}

fn tap(b: &Broker, topic: &str) -> Subscription {
    b.subscribe_with(b.new_endpoint(), topic, None, 1 << 20, Notify::new())
        .expect("topic names come from a validated config")
}

/// Everything one run of a pipeline observed, indexed by frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunObservations {
    pub frames: BTreeMap<u64, FrameObservation>,
    /// Ground truth read from the pipeline's own topic, when requested.
    pub gt: Option<GroundTruthSet>,
}

/// Runs `cfg` once in lockstep and gathers per-frame observations. Frames
/// are numbered by their position in the attention node's image stream.
pub fn observe(cfg: &PipelineConfig, gt_topic: Option<&str>) -> Result<RunObservations, String> {
    let att = cfg
        .nodes
        .iter()
        .find(|n| n.spec().is_attention())
        .ok_or("the pipeline has no attention node")?;
    let image_topic = att.input_topics()[att.spec().input_index("image").unwrap()].clone();
    let broker = Broker::new();
    let pipeline = Pipeline::build(cfg, &broker, crate::bus::DEFAULT_QUEUE_CAPACITY).map_err(|e| e.to_string())?;
    let images = tap(&broker, &image_topic);
    let foa = output_of(cfg, "foa_selector", "foa").map(|t| tap(&broker, &t));
    let obj = output_of(cfg, "region_extractor", "object").map(|t| tap(&broker, &t));
    let track = output_of(cfg, "tracker_ncc", "state").map(|t| tap(&broker, &t));
    let gt = gt_topic.map(|t| tap(&broker, t));
    pipeline
        .run_lockstep(&RunOptions::default(), None)
        .map_err(|e| e.to_string())?;

    let drain = |s: &Subscription| std::iter::from_fn(|| s.try_recv()).map(|e| e.msg).collect::<Vec<_>>();
    let mut index = BTreeMap::new();
    for m in drain(&images) {
        let n = index.len() as u64;
        index.entry(m.stamp_ns()).or_insert(n);
    }
    let mut out = RunObservations::default();
    let frame_of = |stamp: u64| index.get(&stamp).copied();

    if let Some(s) = &foa {
        for m in drain(s) {
            if let (Message::PointFoa(p), Some(f)) = (&*m, frame_of(m.stamp_ns())) {
                out.frames.entry(f).or_default().foa.get_or_insert((p.x, p.y));
            }
        }
    }
    if let Some(s) = &obj {
        for m in drain(s) {
            if let (Message::ObjectFoa(o), Some(f)) = (&*m, frame_of(m.stamp_ns())) {
                out.frames.entry(f).or_default().bbox.get_or_insert(o.bbox);
            }
        }
    }
    if let Some(s) = &track {
        for m in drain(s) {
            if let (Message::TrackState(t), Some(f)) = (&*m, frame_of(m.stamp_ns())) {
                if t.state == TrackStatus::Tracking {
                    let o = out.frames.entry(f).or_default();
                    // the latest report for a frame wins over the attention box
                    o.bbox = Some(t.bbox);
                    o.tracking = true;
                }
            }
        }
    }
    if let Some(s) = &gt {
        let mut set = GroundTruthSet::default();
        for m in drain(s) {
            let bbox = match &*m {
                Message::ObjectFoa(o) => o.bbox,
                Message::TrackState(t) => t.bbox,
                Message::RegionFoa(r) => r.bbox,
                other => return Err(format!("ground truth topic carries {}", other.kind())),
            };
            if let Some(f) = frame_of(m.stamp_ns()) {
                set.push(f, bbox).map_err(|e| e.to_string())?;
            }
        }
        out.gt = Some(set);
    }
    Ok(out)
}

/// Runs the pipeline once per attention kind, swapping only the attention
/// node, and scores each run. Rows come back in `algorithms` order.
pub fn run_comparison(
    base: &PipelineConfig,
    algorithms: &[String],
    gt: &GroundTruthSource,
) -> Result<Vec<MetricsRow>, EvalError> {
    if algorithms.is_empty() {
        return Err(EvalError::EmptyComparison);
    }
    let file_gt = match gt {
        GroundTruthSource::File(p) => Some(load_ground_truth(p)?),
        GroundTruthSource::Topic(_) => None,
    };
    let att_index = base.nodes.iter().position(|n| n.spec().is_attention());
    // every variant is checked before any of them runs
    let mut variants = Vec::new();
    for alg in algorithms {
        let bad = |reason: String| EvalError::BadAlgorithm {
            algorithm: alg.clone(),
            reason,
        };
        let idx = att_index.ok_or_else(|| bad("the pipeline has no attention node to swap".into()))?;
        let mut cfg = base.clone();
        cfg.nodes[idx] = swap_attention_kind(&base.nodes[idx], alg).map_err(bad)?;
        variants.push((alg, cfg));
    }
    let mut rows = Vec::new();
    for (alg, cfg) in variants {
        let fail = |reason: String| EvalError::Pipeline {
            algorithm: alg.clone(),
            reason,
        };
        let topic = match gt {
            GroundTruthSource::Topic(t) => Some(t.as_str()),
            GroundTruthSource::File(_) => None,
        };
        let obs = observe(&cfg, topic).map_err(fail)?;
        let truth = match (&file_gt, &obs.gt) {
            (Some(g), _) | (None, Some(g)) => g,
            (None, None) => unreachable!("one ground truth source is always set"),
        };
        rows.push(compute_metrics(alg, truth, &obs.frames).map_err(|e| match e {
            EvalError::EmptyGroundTruth => EvalError::EmptyGroundTruth,
            other => fail(other.to_string()),
        })?);
    }
    Ok(rows)
}
