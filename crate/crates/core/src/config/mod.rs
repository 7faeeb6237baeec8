//! Line-oriented pipeline description.
//!
//! ```text
//! # comment
//! node cam image_sequence
//!   param dir frames/
//!   pub /image
//! end
//! node sel foa_selector
//!   sync /saliency /image slop 1000000
//! end
//! ```
//!
//! `sub`/`pub` lines bind a node's ports in declaration order; ports left
//! unbound use the kind's default topic.

pub mod schema;

pub use schema::{kind_spec, kinds, KindSpec, ParamSpec, ParamType, PortSpec};

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use thiserror::Error;

use crate::bus::broker::check_topic_name;
use crate::msg::{MessageKind, ParamValue};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    SyntaxError { line: usize, reason: String },
    #[error("line {line}: unknown node kind {kind:?}")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: node name {name:?} already used")]
    DuplicateName { line: usize, name: String },
    #[error("line {line}: {kind} has no parameter {param:?}")]
    UnknownParam { line: usize, kind: String, param: String },
    #[error("line {line}: bad value for {param}: {reason}")]
    BadValue { line: usize, param: String, reason: String },
    #[error("line {line}: bad topic {topic:?}: {reason}")]
    BadTopic { line: usize, topic: String, reason: String },
    #[error("line {line}: bad sync: {reason}")]
    BadSync { line: usize, reason: String },
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
}

impl ConfigError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::SyntaxError { line, .. }
            | ConfigError::UnknownKind { line, .. }
            | ConfigError::DuplicateName { line, .. }
            | ConfigError::UnknownParam { line, .. }
            | ConfigError::BadValue { line, .. }
            | ConfigError::BadTopic { line, .. }
            | ConfigError::BadSync { line, .. } => Some(*line),
            ConfigError::Read { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncDecl {
    pub topics: Vec<String>,
    pub slop_ns: u64,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDecl {
    pub name: String,
    pub kind: String,
    pub line: usize,
    /// Explicit settings in file order; later lines win.
    pub params: Vec<(String, ParamValue)>,
    pub subs: Vec<String>,
    pub pubs: Vec<String>,
    pub syncs: Vec<SyncDecl>,
    /// Source lines of `subs` and `pubs`, for error messages.
    pub sub_lines: Vec<usize>,
    pub pub_lines: Vec<usize>,
}

impl NodeDecl {
    pub fn spec(&self) -> &'static KindSpec {
        kind_spec(&self.kind).expect("kind validated at parse time")
    }

    /// Topic bound to each input port.
    pub fn input_topics(&self) -> Vec<String> {
        bind_ports(self.spec().inputs, &self.subs)
    }

    pub fn output_topics(&self) -> Vec<String> {
        bind_ports(self.spec().outputs, &self.pubs)
    }

    /// Defaults overlaid with the explicit settings.
    pub fn param_values(&self) -> BTreeMap<String, ParamValue> {
        let mut m: BTreeMap<String, ParamValue> = self.spec().default_params().into_iter().collect();
        for (k, v) in &self.params {
            m.insert(k.clone(), v.clone());
        }
        m
    }

    pub fn set_param(&mut self, key: &str, value: ParamValue) {
        self.params.retain(|(k, _)| k != key);
        self.params.push((key.to_string(), value));
    }

    /// Declared sync blocks, or the kind's implicit one.
    pub fn effective_syncs(&self) -> Vec<SyncDecl> {
        if !self.syncs.is_empty() {
            return self.syncs.clone();
        }
        let spec = self.spec();
        if spec.default_sync.is_empty() {
            return Vec::new();
        }
        let inputs = self.input_topics();
        vec![SyncDecl {
            topics: spec
                .default_sync
                .iter()
                .map(|p| inputs[spec.input_index(p).unwrap()].clone())
                .collect(),
            slop_ns: schema::DEFAULT_SYNC_SLOP_NS,
            line: self.line,
        }]
    }
}

fn bind_ports(ports: &[PortSpec], explicit: &[String]) -> Vec<String> {
    ports
        .iter()
        .enumerate()
        .map(|(i, p)| explicit.get(i).cloned().unwrap_or_else(|| p.topic.to_string()))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub nodes: Vec<NodeDecl>,
}

impl PipelineConfig {
    pub fn node(&self, name: &str) -> Option<&NodeDecl> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn node_mut(&mut self, name: &str) -> Option<&mut NodeDecl> {
        self.nodes.iter_mut().find(|n| n.name == name)
    }

    /// Every topic a node reads or writes, with its message type.
    /// Outputs of `bag_replay` are only known once the bag is opened.
    pub fn topic_kinds(&self) -> BTreeMap<String, MessageKind> {
        let mut m = BTreeMap::new();
        for n in &self.nodes {
            let spec = n.spec();
            for (t, p) in n.input_topics().into_iter().zip(spec.inputs) {
                m.entry(t).or_insert(p.kind);
            }
            for (t, p) in n.output_topics().into_iter().zip(spec.outputs) {
                m.entry(t).or_insert(p.kind);
            }
        }
        m
    }

    /// Renders the config back to its text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out += &format!("node {} {}\n", n.name, n.kind);
            for (k, v) in &n.params {
                out += &format!("  param {k} {v}\n");
            }
            for t in &n.subs {
                out += &format!("  sub {t}\n");
            }
            for t in &n.pubs {
                out += &format!("  pub {t}\n");
            }
            for s in &n.syncs {
                out += &format!("  sync {} slop {}\n", s.topics.join(" "), s.slop_ns);
            }
            out += "end\n";
        }
        out
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn syntax(line: usize, reason: impl Into<String>) -> ConfigError {
    ConfigError::SyntaxError {
        line,
        reason: reason.into(),
    }
}

fn check_topic(line: usize, topic: &str) -> Result<(), ConfigError> {
    check_topic_name(topic).map_err(|_| ConfigError::BadTopic {
        line,
        topic: topic.to_string(),
        reason: "topics start with '/' and contain no whitespace".into(),
    })
}

/// Checks made once a block is complete, when all its subscriptions are known.
fn close_node(n: &NodeDecl) -> Result<(), ConfigError> {
    let inputs = n.input_topics();
    let mut claimed = HashSet::new();
    for s in &n.syncs {
        for t in &s.topics {
            if !inputs.contains(t) {
                return Err(ConfigError::BadSync {
                    line: s.line,
                    reason: format!("{t} is not a subscription of {}", n.name),
                });
            }
            if !claimed.insert(t.clone()) {
                return Err(ConfigError::BadSync {
                    line: s.line,
                    reason: format!("{t} appears in more than one sync"),
                });
            }
        }
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = PipelineConfig::default();
    let mut open: Option<NodeDecl> = None;
    let mut names = HashSet::new();
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let body = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = body.split_whitespace().collect();
        let Some(&head) = toks.first() else { continue };
        match head {
            "node" => {
                if let Some(n) = &open {
                    return Err(syntax(line, format!("node {:?} is missing its \"end\"", n.name)));
                }
                let [_, name, kind] = toks[..] else {
                    return Err(syntax(line, "expected \"node <name> <kind>\""));
                };
                if !valid_name(name) {
                    return Err(syntax(
                        line,
                        format!("node name {name:?} may only use letters, digits, '_' and '-'"),
                    ));
                }
                if kind_spec(kind).is_none() {
                    return Err(ConfigError::UnknownKind {
                        line,
                        kind: kind.to_string(),
                    });
                }
                if !names.insert(name.to_string()) {
                    return Err(ConfigError::DuplicateName {
                        line,
                        name: name.to_string(),
                    });
                }
                open = Some(NodeDecl {
                    name: name.to_string(),
                    kind: kind.to_string(),
                    line,
                    params: Vec::new(),
                    subs: Vec::new(),
                    pubs: Vec::new(),
                    syncs: Vec::new(),
                    sub_lines: Vec::new(),
                    pub_lines: Vec::new(),
                });
            }
            "end" => {
                if toks.len() != 1 {
                    return Err(syntax(line, "\"end\" takes no arguments"));
                }
                let n = open
                    .take()
                    .ok_or_else(|| syntax(line, "\"end\" without an open node"))?;
                close_node(&n)?;
                cfg.nodes.push(n);
            }
            "param" | "sub" | "pub" | "sync" => {
                let n = open
                    .as_mut()
                    .ok_or_else(|| syntax(line, format!("{head:?} outside a node block")))?;
                let spec = n.spec();
                match head {
                    "param" => {
                        if toks.len() < 3 {
                            return Err(syntax(line, "expected \"param <key> <value>\""));
                        }
                        let key = toks[1];
                        let p = spec.param(key).ok_or_else(|| ConfigError::UnknownParam {
                            line,
                            kind: n.kind.clone(),
                            param: key.to_string(),
                        })?;
                        let value =
                            p.ty.parse(&toks[2..].join(" "))
                                .map_err(|reason| ConfigError::BadValue {
                                    line,
                                    param: key.to_string(),
                                    reason,
                                })?;
                        n.set_param(key, value);
                    }
                    "sub" | "pub" => {
                        let [_, topic] = toks[..] else {
                            return Err(syntax(line, format!("expected \"{head} <topic>\"")));
                        };
                        check_topic(line, topic)?;
                        let (ports, list, lines) = if head == "sub" {
                            (spec.inputs, &mut n.subs, &mut n.sub_lines)
                        } else {
                            (spec.outputs, &mut n.pubs, &mut n.pub_lines)
                        };
                        if list.len() >= ports.len() {
                            return Err(syntax(
                                line,
                                format!("{} has only {} {head} port(s)", n.kind, ports.len()),
                            ));
                        }
                        list.push(topic.to_string());
                        lines.push(line);
                    }
                    _ => {
                        let slop_at = toks.iter().position(|&t| t == "slop");
                        let Some(at) = slop_at.filter(|&a| a + 2 == toks.len()) else {
                            return Err(ConfigError::BadSync {
                                line,
                                reason: "expected \"sync <topic> <topic> ... slop <ns>\"".into(),
                            });
                        };
                        let topics: Vec<String> = toks[1..at].iter().map(|t| t.to_string()).collect();
                        if topics.len() < 2 {
                            return Err(ConfigError::BadSync {
                                line,
                                reason: "a sync needs at least two topics".into(),
                            });
                        }
                        for t in &topics {
                            check_topic(line, t)?;
                        }
                        let slop_ns = toks[at + 1].parse().map_err(|_| ConfigError::BadSync {
                            line,
                            reason: format!("slop {:?} is not a non-negative integer", toks[at + 1]),
                        })?;
                        n.syncs.push(SyncDecl { topics, slop_ns, line });
                    }
                }
            }
            other => return Err(syntax(line, format!("unknown directive {other:?}"))),
        }
    }
    if let Some(n) = open {
        return Err(syntax(
            last_line.max(n.line),
            format!("node {:?} is missing its \"end\"", n.name),
        ));
    }

    // Every port on a topic must agree on its message type.
    let mut seen: BTreeMap<String, MessageKind> = BTreeMap::new();
    for n in &cfg.nodes {
        let spec = n.spec();
        let line_of = |lines: &[usize], i: usize| lines.get(i).copied().unwrap_or(n.line);
        let ports = n
            .input_topics()
            .into_iter()
            .zip(spec.inputs)
            .enumerate()
            .map(|(i, (t, p))| (t, p, line_of(&n.sub_lines, i)))
            .chain(
                n.output_topics()
                    .into_iter()
                    .zip(spec.outputs)
                    .enumerate()
                    .map(|(i, (t, p))| (t, p, line_of(&n.pub_lines, i))),
            );
        for (t, p, line) in ports {
            match seen.get(&t) {
                Some(&k) if k != p.kind => {
                    return Err(ConfigError::BadTopic {
                        line,
                        topic: t,
                        reason: format!("{} port {} needs {}, topic already carries {k}", n.name, p.name, p.kind),
                    })
                }
                Some(_) => {}
                None => {
                    seen.insert(t, p.kind);
                }
            }
        }
    }
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_config(&text)
}
