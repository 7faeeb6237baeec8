//! Instantiates a [`PipelineConfig`] as running nodes on a broker.
//!
//! Two executors share the same nodes. [`Pipeline::run_lockstep`] drives
//! sources in virtual time and drains every queue after each frame, so a
//! run is a pure function of its config. [`Pipeline::spawn`] gives every
//! node its own thread and paces sources against the wall clock.

mod exec;
pub mod nodes;
mod runner;

pub use exec::{LockstepHook, Pipeline, RunOptions, RunSummary, RunningPipeline};
pub use runner::NodeRunner;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::bus::{BagError, BusError, Envelope};
use crate::config::ConfigError;
use crate::msg::{Message, ParamValue};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("node {node}: {reason}")]
    NodeFailed { node: String, reason: String },
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Bag(#[from] BagError),
}

impl RuntimeError {
    /// Process exit status: 1 for configuration errors, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RuntimeError::Config(_) => 1,
            _ => 2,
        }
    }

    pub fn node(node: &str, reason: impl ToString) -> Self {
        RuntimeError::NodeFailed {
            node: node.to_string(),
            reason: reason.to_string(),
        }
    }
}

/// Work handed to a node.
#[derive(Debug, Clone)]
pub enum Input {
    Single {
        port: usize,
        env: Envelope,
    },
    /// One envelope per port of a sync block, in block order.
    Synced(Vec<(usize, Envelope)>),
}

impl Input {
    /// The envelope delivered on `port`, if any.
    pub fn on(&self, port: usize) -> Option<&Message> {
        match self {
            Input::Single { port: p, env } => (*p == port).then(|| &*env.msg),
            Input::Synced(v) => v.iter().find(|(p, _)| *p == port).map(|(_, e)| &*e.msg),
        }
    }
}

#[derive(Debug)]
pub enum Emit {
    /// Publish on an output port; the bus assigns `seq`.
    Port(usize, Message),
    /// Publish on a named topic with the header untouched.
    Verbatim(String, Message),
}

#[derive(Debug, Default)]
pub struct Outbox {
    pub items: Vec<Emit>,
}

impl Outbox {
    pub fn port(&mut self, port: usize, msg: Message) {
        self.items.push(Emit::Port(port, msg));
    }

    pub fn verbatim(&mut self, topic: &str, msg: Message) {
        self.items.push(Emit::Verbatim(topic.to_string(), msg));
    }
}

/// Fully resolved parameter set of one node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(pub BTreeMap<String, ParamValue>);

impl Params {
    fn get(&self, k: &str) -> Result<&ParamValue, String> {
        self.0.get(k).ok_or_else(|| format!("missing parameter {k}"))
    }

    pub fn f64(&self, k: &str) -> Result<f64, String> {
        self.get(k)?.as_f64().ok_or_else(|| format!("{k} must be a number"))
    }

    pub fn i64(&self, k: &str) -> Result<i64, String> {
        self.get(k)?.as_i64().ok_or_else(|| format!("{k} must be an integer"))
    }

    pub fn bool(&self, k: &str) -> Result<bool, String> {
        self.get(k)?.as_bool().ok_or_else(|| format!("{k} must be a boolean"))
    }

    pub fn str(&self, k: &str) -> Result<&str, String> {
        self.get(k)?.as_str().ok_or_else(|| format!("{k} must be a string"))
    }

    /// Integer in `lo..=hi`.
    pub fn int_in<T: TryFrom<i64>>(&self, k: &str, lo: i64, hi: i64) -> Result<T, String> {
        let v = self.i64(k)?;
        if !(lo..=hi).contains(&v) {
            return Err(format!("{k} = {v} is outside [{lo}, {hi}]"));
        }
        T::try_from(v).map_err(|_| format!("{k} = {v} is out of range"))
    }

    /// Finite number in `lo..=hi`.
    pub fn f64_in(&self, k: &str, lo: f64, hi: f64) -> Result<f64, String> {
        let v = self.f64(k)?;
        if !(v.is_finite() && lo <= v && v <= hi) {
            return Err(format!("{k} = {v} is outside [{lo}, {hi}]"));
        }
        Ok(v)
    }
}

/// A running pipeline component.
///
/// Sources report when their next frame is due (virtual nanoseconds from
/// the start of the run) and produce it in `tick`. Everything else reacts
/// to `on_input`. Errors returned from either are logged and the message
/// is dropped; the node keeps running.
pub trait Node: Send {
    fn next_due(&self) -> Option<u64> {
        None
    }

    fn tick(&mut self, _out: &mut Outbox) -> Result<(), String> {
        Ok(())
    }

    fn on_input(&mut self, _input: Input, _out: &mut Outbox) -> Result<(), String> {
        Ok(())
    }

    /// Applies a complete parameter set. On error the node must be left
    /// as it was.
    fn configure(&mut self, params: &Params) -> Result<(), String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    pub name: String,
    pub kind: String,
    pub params: Params,
}

/// Current parameter values of every node, shared with observers such as
/// the gateway.
#[derive(Debug, Clone, Default)]
pub struct ParamRegistry {
    inner: Arc<RwLock<Vec<NodeInfo>>>,
}

impl ParamRegistry {
    pub fn snapshot(&self) -> Vec<NodeInfo> {
        self.inner.read().unwrap().clone()
    }

    pub fn get(&self, node: &str) -> Option<NodeInfo> {
        self.inner.read().unwrap().iter().find(|n| n.name == node).cloned()
    }

    pub fn contains(&self, node: &str) -> bool {
        self.inner.read().unwrap().iter().any(|n| n.name == node)
    }

    pub(crate) fn insert(&self, info: NodeInfo) {
        let mut v = self.inner.write().unwrap();
        v.retain(|n| n.name != info.name);
        v.push(info);
    }

    pub(crate) fn update(&self, node: &str, key: &str, value: ParamValue) {
        if let Some(n) = self.inner.write().unwrap().iter_mut().find(|n| n.name == node) {
            n.params.0.insert(key.to_string(), value);
        }
    }
}
