use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use super::nodes::build_node;
use super::{Emit, Input, Node, NodeInfo, Outbox, ParamRegistry, Params, RuntimeError};
use crate::bus::{Broker, BusError, EndpointId, Envelope, Notify, Publisher, Subscription, SyncPolicy, Synchronizer};
use crate::config::schema::{PARAMS_TOPIC, PARAM_ACK_TOPIC, PARAM_ERROR_TOPIC};
use crate::config::{KindSpec, NodeDecl};
use crate::msg::{Message, MessageKind, ParamUpdate, ParamValue};

struct SyncGroup {
    sync: Synchronizer<Envelope>,
    ports: Vec<usize>,
}

/// Owns one node together with its subscriptions, synchronizers and
/// publishers, and answers parameter updates addressed to it.
pub struct NodeRunner {
    pub name: String,
    pub spec: &'static KindSpec,
    node: Box<dyn Node>,
    params: Params,
    registry: ParamRegistry,
    broker: Broker,
    endpoint: EndpointId,
    notify: Arc<Notify>,
    inputs: Vec<Subscription>,
    /// Sync group of each input port.
    port_group: Vec<Option<usize>>,
    groups: Vec<SyncGroup>,
    param_sub: Subscription,
    ack: Publisher,
    err: Publisher,
    outputs: Vec<Publisher>,
    verbatim: HashMap<String, Publisher>,
    pending: VecDeque<Input>,
    warnings: u64,
}

pub(crate) fn param_publishers(broker: &Broker, endpoint: EndpointId) -> Result<(Publisher, Publisher), BusError> {
    Ok((
        broker.advertise(endpoint, PARAM_ACK_TOPIC, MessageKind::ParamUpdate)?,
        broker.advertise(endpoint, PARAM_ERROR_TOPIC, MessageKind::ParamUpdate)?,
    ))
}

/// Publishes the outcome of a parameter request, echoing its header.
pub(crate) fn answer(ack: &Publisher, err: &Publisher, req: &ParamUpdate, result: Result<ParamValue, String>) {
    let (publisher, value) = match result {
        Ok(v) => (ack, v),
        Err(reason) => (err, ParamValue::Str(reason)),
    };
    let reply = Message::ParamUpdate(ParamUpdate {
        header: req.header.clone(),
        node: req.node.clone(),
        param: req.param.clone(),
        value,
    });
    if let Err(e) = publisher.publish_verbatim(reply) {
        log::warn!("cannot answer parameter request: {e}");
    }
}

impl NodeRunner {
    pub fn new(
        decl: &NodeDecl,
        broker: &Broker,
        registry: &ParamRegistry,
        capacity: usize,
    ) -> Result<Self, RuntimeError> {
        let spec = decl.spec();
        let fail = |e: &dyn std::fmt::Display| RuntimeError::node(&decl.name, e);
        let params = Params(decl.param_values());
        let node = build_node(&decl.kind, &params).map_err(|e| fail(&e))?;
        let endpoint = broker.new_endpoint();
        let notify = Notify::new();

        let in_topics = decl.input_topics();
        let mut inputs = Vec::new();
        for (t, p) in in_topics.iter().zip(spec.inputs) {
            inputs.push(
                broker
                    .subscribe_with(endpoint, t, Some(p.kind), capacity, notify.clone())
                    .map_err(|e| fail(&e))?,
            );
        }
        let mut port_group = vec![None; in_topics.len()];
        let mut groups = Vec::new();
        for s in decl.effective_syncs() {
            let ports: Vec<usize> = s
                .topics
                .iter()
                .map(|t| {
                    in_topics
                        .iter()
                        .position(|x| x == t)
                        .expect("sync topics validated at parse time")
                })
                .collect();
            for &p in &ports {
                port_group[p] = Some(groups.len());
            }
            let mut policy = SyncPolicy::new(s.topics.clone(), s.slop_ns);
            policy.queue_capacity = capacity;
            groups.push(SyncGroup {
                sync: Synchronizer::new(policy),
                ports,
            });
        }
        let outputs = decl
            .output_topics()
            .iter()
            .zip(spec.outputs)
            .map(|(t, p)| broker.advertise(endpoint, t, p.kind))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| fail(&e))?;
        let param_sub = broker
            .subscribe_with(
                endpoint,
                PARAMS_TOPIC,
                Some(MessageKind::ParamUpdate),
                capacity,
                notify.clone(),
            )
            .map_err(|e| fail(&e))?;
        let (ack, err) = param_publishers(broker, endpoint).map_err(|e| fail(&e))?;
        registry.insert(NodeInfo {
            name: decl.name.clone(),
            kind: decl.kind.clone(),
            params: params.clone(),
        });
        Ok(NodeRunner {
            name: decl.name.clone(),
            spec,
            node,
            params,
            registry: registry.clone(),
            broker: broker.clone(),
            endpoint,
            notify,
            inputs,
            port_group,
            groups,
            param_sub,
            ack,
            err,
            outputs,
            verbatim: HashMap::new(),
            pending: VecDeque::new(),
            warnings: 0,
        })
    }

    pub fn is_source(&self) -> bool {
        self.spec.source
    }

    pub fn notifier(&self) -> &Arc<Notify> {
        &self.notify
    }

    /// Messages dropped because the node rejected them.
    pub fn warnings(&self) -> u64 {
        self.warnings
    }

    /// Inbound queues, for observers that need to know whether work is waiting.
    pub fn queues(&self) -> Vec<Arc<crate::bus::broker::EnvelopeQueue>> {
        let mut q: Vec<_> = self.inputs.iter().map(|s| s.queue().clone()).collect();
        q.push(self.param_sub.queue().clone());
        q
    }

    pub fn next_due(&self) -> Option<u64> {
        self.node.next_due()
    }

    /// True when nothing is queued for this node.
    pub fn idle(&self) -> bool {
        self.pending.is_empty() && self.param_sub.queue().is_empty() && self.inputs.iter().all(|s| s.queue().is_empty())
    }

    fn handle_params(&mut self) {
        while let Some(env) = self.param_sub.try_recv() {
            let Message::ParamUpdate(req) = &*env.msg else { continue };
            if req.node != self.name {
                continue;
            }
            let result = self.apply_param(&req.param, &req.value);
            match &result {
                Ok(v) => log::info!("{}: {} = {v}", self.name, req.param),
                Err(e) => log::warn!("{}: rejected {} = {}: {e}", self.name, req.param, req.value),
            }
            answer(&self.ack, &self.err, req, result);
        }
    }

    fn apply_param(&mut self, key: &str, value: &ParamValue) -> Result<ParamValue, String> {
        let spec = self
            .spec
            .param(key)
            .ok_or_else(|| format!("{} has no parameter {key:?}", self.spec.kind))?;
        let v = spec.ty.coerce(value)?;
        let mut next = self.params.clone();
        next.0.insert(key.to_string(), v.clone());
        self.node.configure(&next)?;
        self.params = next;
        self.registry.update(&self.name, key, v.clone());
        Ok(v)
    }

    fn collect(&mut self) {
        for (port, sub) in self.inputs.iter().enumerate() {
            while let Some(env) = sub.try_recv() {
                match self.port_group[port] {
                    None => self.pending.push_back(Input::Single { port, env }),
                    Some(g) => {
                        let group = &mut self.groups[g];
                        let idx = group.ports.iter().position(|&p| p == port).unwrap();
                        group.sync.push(idx, env);
                    }
                }
            }
        }
        for g in &mut self.groups {
            for set in g.sync.drain_ready() {
                self.pending
                    .push_back(Input::Synced(g.ports.iter().copied().zip(set).collect()));
            }
        }
    }

    fn publish(&mut self, out: Outbox) -> Result<(), RuntimeError> {
        for item in out.items {
            let r = match item {
                Emit::Port(p, msg) => self.outputs[p].publish(msg),
                Emit::Verbatim(topic, msg) => {
                    let publisher = match self.verbatim.get(&topic) {
                        Some(p) => p,
                        None => {
                            let p = self
                                .broker
                                .advertise(self.endpoint, &topic, msg.kind())
                                .map_err(|e| RuntimeError::node(&self.name, e))?;
                            self.verbatim.entry(topic).or_insert(p)
                        }
                    };
                    publisher.publish_verbatim(msg)
                }
            };
            match r {
                Ok(_) => {}
                Err(BusError::InvalidMessage(m)) => {
                    self.warnings += 1;
                    log::warn!("{}: dropped invalid output: {m}", self.name);
                }
                Err(e) => return Err(RuntimeError::node(&self.name, e)),
            }
        }
        Ok(())
    }

    fn report(&mut self, r: Result<(), String>) {
        if let Err(e) = r {
            self.warnings += 1;
            log::warn!("{}: {e}", self.name);
        }
    }

    /// Produces the next frame of a source node.
    pub fn tick(&mut self) -> Result<(), RuntimeError> {
        self.handle_params();
        let mut out = Outbox::default();
        let r = self.node.tick(&mut out);
        self.report(r);
        self.publish(out)
    }

    /// Handles parameter requests and at most one input. Returns whether
    /// anything was done.
    pub fn step(&mut self) -> Result<bool, RuntimeError> {
        let had_params = !self.param_sub.queue().is_empty();
        self.handle_params();
        if self.pending.is_empty() {
            self.collect();
        }
        let Some(input) = self.pending.pop_front() else {
            return Ok(had_params);
        };
        let mut out = Outbox::default();
        let r = self.node.on_input(input, &mut out);
        self.report(r);
        self.publish(out)?;
        Ok(true)
    }
}
