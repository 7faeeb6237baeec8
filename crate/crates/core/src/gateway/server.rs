//! Read-only HTTP views plus one WebSocket session per browser client.
//! Sessions read the bus through small drop-oldest queues, so a slow
//! client loses frames instead of holding up the pipeline.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::watch;

use super::json::message_op;
use crate::bus::{Broker, BusError, EndpointId, Notify, Publisher, Subscription};
use crate::config::schema::{PARAMS_TOPIC, PARAM_ACK_TOPIC, PARAM_ERROR_TOPIC};
use crate::config::PipelineConfig;
use crate::msg::{Header, Message, MessageKind, ParamUpdate, ParamValue};
use crate::runtime::{NodeInfo, ParamRegistry};

/// Frames held per subscribed topic per client.
pub const SESSION_QUEUE_DEPTH: usize = 4;
pub const PARAM_REPLY_TIMEOUT: Duration = Duration::from_secs(2);
const PUMP_PERIOD: Duration = Duration::from_millis(5);

const INDEX_HTML: &str = include_str!("index.html");

struct Shared {
    broker: Broker,
    registry: ParamRegistry,
    graph: Value,
    next_req: AtomicU64,
    shutdown: watch::Sender<bool>,
}

/// Everything the server needs; cheap to clone.
#[derive(Clone)]
pub struct Gateway {
    shared: Arc<Shared>,
}

fn node_json(n: &NodeInfo) -> Value {
    let params: serde_json::Map<String, Value> = n.params.0.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
    json!({ "name": n.name, "kind": n.kind, "params": params })
}

/// Nodes, typed topics and one edge per (publisher, subscriber, topic).
pub fn graph_json(cfg: &PipelineConfig) -> Value {
    let kinds = cfg.topic_kinds();
    let nodes: Vec<Value> = cfg
        .nodes
        .iter()
        .map(|n| json!({ "name": n.name, "kind": n.kind, "inputs": n.input_topics(), "outputs": n.output_topics() }))
        .collect();
    let topics: Vec<Value> = kinds
        .iter()
        .map(|(t, k)| json!({ "name": t, "type": k.name() }))
        .collect();
    let mut edges = Vec::new();
    for p in &cfg.nodes {
        for t in p.output_topics() {
            for s in cfg.nodes.iter().filter(|s| s.input_topics().contains(&t)) {
                edges.push(json!({ "from": p.name, "to": s.name, "topic": t }));
            }
        }
    }
    json!({ "nodes": nodes, "topics": topics, "edges": edges })
}

impl Gateway {
    pub fn new(broker: &Broker, registry: &ParamRegistry, cfg: &PipelineConfig) -> Self {
        Gateway {
            shared: Arc::new(Shared {
                broker: broker.clone(),
                registry: registry.clone(),
                graph: graph_json(cfg),
                next_req: AtomicU64::new(1),
                shutdown: watch::channel(false).0,
            }),
        }
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/", get(|| async { Html(INDEX_HTML) }))
            .route("/topics", get(topics))
            .route("/nodes", get(nodes))
            .route("/graph", get(graph))
            .route("/ws", get(ws_upgrade))
            .with_state(self.shared.clone())
    }

    /// Opens a client session without a socket; used by the server and tests.
    pub fn session(&self) -> Result<Session, BusError> {
        Session::new(self.shared.clone())
    }

    /// Serves on `addr` from a background thread with its own runtime.
    pub fn start(&self, addr: &str) -> Result<GatewayHandle, BusError> {
        let bind_err = |e: std::io::Error| BusError::BindFailure {
            addr: addr.to_string(),
            reason: e.to_string(),
        };
        let listener = std::net::TcpListener::bind(addr).map_err(bind_err)?;
        listener.set_nonblocking(true).map_err(bind_err)?;
        let local = listener.local_addr().map_err(bind_err)?;
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .thread_name("attbus-gateway")
            .enable_all()
            .build()
            .map_err(BusError::Io)?;
        let router = self.router();
        let mut stop = self.shared.shutdown.subscribe();
        let thread = std::thread::Builder::new()
            .name("attbus-gateway".into())
            .spawn(move || {
                runtime.block_on(async move {
                    let listener = match tokio::net::TcpListener::from_std(listener) {
                        Ok(l) => l,
                        Err(e) => return log::error!("gateway listener: {e}"),
                    };
                    let served = axum::serve(listener, router).with_graceful_shutdown(async move {
                        let _ = stop.wait_for(|s| *s).await;
                    });
                    if let Err(e) = served.await {
                        log::error!("gateway: {e}");
                    }
                });
                runtime.shutdown_timeout(Duration::from_millis(200));
            })
            .map_err(BusError::Io)?;
        Ok(GatewayHandle {
            addr: local,
            shared: self.shared.clone(),
            thread: Some(thread),
        })
    }
}

pub struct GatewayHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    thread: Option<JoinHandle<()>>,
}

impl GatewayHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Closes every session and stops listening.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        let _ = self.shared.shutdown.send(true);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for GatewayHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

async fn topics(State(s): State<Arc<Shared>>) -> Json<Value> {
    let list: Vec<Value> = s
        .broker
        .topics()
        .iter()
        .map(|t| json!({ "name": t.name, "type": t.kind.name() }))
        .collect();
    Json(Value::Array(list))
}

async fn nodes(State(s): State<Arc<Shared>>) -> Json<Value> {
    Json(Value::Array(s.registry.snapshot().iter().map(node_json).collect()))
}

async fn graph(State(s): State<Arc<Shared>>) -> Json<Value> {
    Json(s.graph.clone())
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(s): State<Arc<Shared>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_socket(socket, s))
}

async fn run_socket(socket: WebSocket, shared: Arc<Shared>) {
    let mut session = match Session::new(shared.clone()) {
        Ok(s) => s,
        Err(e) => return log::error!("cannot open gateway session: {e}"),
    };
    let (mut tx, mut rx) = socket.split();
    let mut stop = shared.shutdown.subscribe();
    if *stop.borrow() {
        return;
    }
    let mut tick = tokio::time::interval(PUMP_PERIOD);
    tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    loop {
        let out = tokio::select! {
            incoming = rx.next() => match incoming {
                Some(Ok(WsMessage::Text(t))) => session.handle(&t),
                Some(Ok(WsMessage::Binary(_))) => vec![error_op("expected a JSON text frame")],
                Some(Ok(WsMessage::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => Vec::new(),
            },
            _ = tick.tick() => session.pump(Instant::now()),
            _ = stop.changed() => break,
        };
        for v in out {
            if tx.send(WsMessage::Text(v.to_string())).await.is_err() {
                return;
            }
        }
    }
    let _ = tx.close().await;
}

#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum ClientOp {
    Subscribe { topic: String },
    Unsubscribe { topic: String },
    SetParam { node: String, param: String, value: Value },
    ListParams { node: Option<String> },
}

pub fn error_op(reason: impl std::fmt::Display) -> Value {
    json!({ "op": "error", "reason": reason.to_string() })
}

struct Pending {
    node: String,
    param: String,
    deadline: Instant,
}

/// State of one client connection, independent of the socket.
pub struct Session {
    shared: Arc<Shared>,
    endpoint: EndpointId,
    notify: Arc<Notify>,
    subs: BTreeMap<String, Subscription>,
    requests: Publisher,
    acks: Subscription,
    errors: Subscription,
    pending: HashMap<String, Pending>,
}

impl Session {
    fn new(shared: Arc<Shared>) -> Result<Self, BusError> {
        let b = &shared.broker;
        let endpoint = b.new_endpoint();
        let notify = Notify::new();
        let kind = Some(MessageKind::ParamUpdate);
        let acks = b.subscribe_with(endpoint, PARAM_ACK_TOPIC, kind, 64, notify.clone())?;
        let errors = b.subscribe_with(endpoint, PARAM_ERROR_TOPIC, kind, 64, notify.clone())?;
        // a separate endpoint so a client watching /params sees its own requests
        let requests = b.advertise(b.new_endpoint(), PARAMS_TOPIC, MessageKind::ParamUpdate)?;
        Ok(Session {
            shared,
            endpoint,
            notify,
            subs: BTreeMap::new(),
            requests,
            acks,
            errors,
            pending: HashMap::new(),
        })
    }

    pub fn subscribed(&self) -> Vec<String> {
        self.subs.keys().cloned().collect()
    }

    /// Handles one client text frame; returns the immediate replies.
    pub fn handle(&mut self, text: &str) -> Vec<Value> {
        let op: ClientOp = match serde_json::from_str(text) {
            Ok(op) => op,
            Err(e) => return vec![error_op(format!("bad request: {e}"))],
        };
        match op {
            ClientOp::Subscribe { topic } => {
                let Some(kind) = self.shared.broker.topic_kind(&topic) else {
                    return vec![json!({ "op": "error", "reason": format!("unknown topic {topic}"), "topic": topic })];
                };
                if !self.subs.contains_key(&topic) {
                    let sub = self.shared.broker.subscribe_with(
                        self.endpoint,
                        &topic,
                        None,
                        SESSION_QUEUE_DEPTH,
                        self.notify.clone(),
                    );
                    match sub {
                        Ok(s) => {
                            self.subs.insert(topic.clone(), s);
                        }
                        Err(e) => return vec![error_op(e)],
                    }
                }
                vec![json!({ "op": "subscribed", "topic": topic, "type": kind.name() })]
            }
            ClientOp::Unsubscribe { topic } => match self.subs.remove(&topic) {
                Some(_) => vec![json!({ "op": "unsubscribed", "topic": topic })],
                None => vec![json!({ "op": "error", "reason": format!("not subscribed to {topic}"), "topic": topic })],
            },
            ClientOp::ListParams { node } => {
                let all = self.shared.registry.snapshot();
                let chosen: Vec<Value> = match &node {
                    Some(name) => match all.iter().find(|n| &n.name == name) {
                        Some(n) => vec![node_json(n)],
                        None => return vec![error_op(format!("no node named {name:?}"))],
                    },
                    None => all.iter().map(node_json).collect(),
                };
                vec![json!({ "op": "params", "nodes": chosen })]
            }
            ClientOp::SetParam { node, param, value } => self.set_param(node, param, value),
        }
    }

    fn set_param(&mut self, node: String, param: String, value: Value) -> Vec<Value> {
        let reject = |reason: String| vec![json!({ "op": "error", "reason": reason, "node": node, "param": param })];
        if !self.shared.registry.contains(&node) {
            return reject(format!("no node named {node:?}"));
        }
        let Some(value) = ParamValue::from_json(&value) else {
            return reject(format!("value must be a number, boolean or string, not {value}"));
        };
        let id = format!("req:{}", self.shared.next_req.fetch_add(1, Ordering::Relaxed));
        let req = Message::ParamUpdate(ParamUpdate {
            header: Header {
                seq: 0,
                stamp_ns: 0,
                frame_id: id.clone(),
            },
            node: node.clone(),
            param: param.clone(),
            value,
        });
        if let Err(e) = self.requests.publish(req) {
            return reject(e.to_string());
        }
        self.pending.insert(
            id,
            Pending {
                node,
                param,
                deadline: Instant::now() + PARAM_REPLY_TIMEOUT,
            },
        );
        Vec::new()
    }

    /// Collects parameter replies, expired requests and queued frames.
    pub fn pump(&mut self, now: Instant) -> Vec<Value> {
        let mut out = Vec::new();
        for (sub, ok) in [(&self.acks, true), (&self.errors, false)] {
            while let Some(env) = sub.try_recv() {
                let Message::ParamUpdate(r) = &*env.msg else { continue };
                if self.pending.remove(&r.header.frame_id).is_none() {
                    continue;
                }
                out.push(if ok {
                    json!({ "op": "param_ack", "node": r.node, "param": r.param, "value": r.value.to_json() })
                } else {
                    json!({ "op": "error", "reason": r.value.to_string(), "node": r.node, "param": r.param })
                });
            }
        }
        let expired: Vec<String> = self
            .pending
            .iter()
            .filter(|(_, p)| p.deadline <= now)
            .map(|(k, _)| k.clone())
            .collect();
        for k in expired {
            let p = self.pending.remove(&k).unwrap();
            out.push(
                json!({ "op": "error", "reason": "no reply from the pipeline", "node": p.node, "param": p.param }),
            );
        }
        for (topic, sub) in &self.subs {
            while let Some(env) = sub.try_recv() {
                out.push(message_op(topic, &env.msg));
            }
        }
        out
    }
}
