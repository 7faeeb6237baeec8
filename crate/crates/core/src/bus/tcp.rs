//! Star-topology TCP transport. Clients speak raw wire frames; the server
//! fronts an in-process [`Broker`], so remote and local endpoints share one
//! routing domain.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, Weak};
use std::thread::JoinHandle;
use std::time::Duration;

use log::{debug, warn};

use super::broker::{check_topic_name, Broker, EndpointId, Envelope, EnvelopeQueue, Subscription};
use super::queue::{BoundedQueue, Notify};
use super::BusError;
use crate::msg::{deserialize_frame, encode_control, serialize_frame, ControlOp, Frame, Header, Message, MessageKind};

pub const DEFAULT_BROKER_ADDR: &str = "127.0.0.1:7447";
pub const BROKER_ENV: &str = "ATTBUS_BROKER";

/// Frames above this size are treated as malformed input.
pub const MAX_ACCEPTED_FRAME: usize = 256 << 20;

/// Broker address from the environment, falling back to the default.
pub fn broker_addr_from_env() -> String {
    std::env::var(BROKER_ENV).unwrap_or_else(|_| DEFAULT_BROKER_ADDR.to_string())
}

/// Reads one length-prefixed frame. `Ok(None)` means clean EOF.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let n = u32::from_le_bytes(len) as usize;
    if n > MAX_ACCEPTED_FRAME {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame length {n} too large"),
        ));
    }
    let mut buf = vec![0u8; n + 4];
    buf[..4].copy_from_slice(&len);
    r.read_exact(&mut buf[4..])?;
    Ok(Some(buf))
}

fn control_frame(op: ControlOp, topic: &str, kind: Option<MessageKind>) -> Arc<[u8]> {
    let header = Header::new(kind.map_or(0, |k| k.id() as u32), 0);
    encode_control(op, topic, &header)
        .expect("topic names are validated before encoding")
        .into()
}

pub struct TcpBrokerServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    clients: Arc<Mutex<Vec<TcpStream>>>,
    accept: Option<JoinHandle<()>>,
}

impl TcpBrokerServer {
    pub fn bind(addr: &str, broker: Broker) -> Result<Self, BusError> {
        let bind_err = |e: io::Error| BusError::BindFailure {
            addr: addr.to_string(),
            reason: e.to_string(),
        };
        let listener = TcpListener::bind(addr).map_err(bind_err)?;
        let local = listener.local_addr().map_err(bind_err)?;
        listener.set_nonblocking(true).map_err(bind_err)?;
        let stop = Arc::new(AtomicBool::new(false));
        let clients = Arc::new(Mutex::new(Vec::new()));
        let (stop2, clients2) = (stop.clone(), clients.clone());
        let accept = std::thread::Builder::new()
            .name("broker-accept".into())
            .spawn(move || accept_loop(listener, broker, stop2, clients2))
            .map_err(bind_err)?;
        Ok(TcpBrokerServer {
            addr: local,
            stop,
            clients,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::Release);
        for c in self.clients.lock().unwrap().drain(..) {
            let _ = c.shutdown(Shutdown::Both);
        }
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for TcpBrokerServer {
    fn drop(&mut self) {
        self.stop_now();
    }
}

fn accept_loop(listener: TcpListener, broker: Broker, stop: Arc<AtomicBool>, clients: Arc<Mutex<Vec<TcpStream>>>) {
    while !stop.load(Ordering::Acquire) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let _ = stream.set_nonblocking(false);
                let _ = stream.set_nodelay(true);
                if let Ok(c) = stream.try_clone() {
                    clients.lock().unwrap().push(c);
                }
                let broker = broker.clone();
                let _ = std::thread::Builder::new()
                    .name(format!("broker-client-{peer}"))
                    .spawn(move || {
                        if let Err(reason) = serve_client(stream, broker) {
                            warn!("closing client {peer}: {reason}");
                        } else {
                            debug!("client {peer} disconnected");
                        }
                    });
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(10)),
            Err(e) => {
                warn!("accept failed: {e}");
                std::thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

struct ClientLink {
    notify: Arc<Notify>,
    control: BoundedQueue<Arc<[u8]>>,
    subs: Mutex<Vec<Subscription>>,
    closed: AtomicBool,
}

fn serve_client(stream: TcpStream, broker: Broker) -> Result<(), String> {
    let endpoint = broker.new_endpoint();
    let notify = Notify::new();
    let link = Arc::new(ClientLink {
        notify: notify.clone(),
        control: BoundedQueue::new(1 << 14, notify.clone()),
        subs: Mutex::new(Vec::new()),
        closed: AtomicBool::new(false),
    });
    for d in broker.topics() {
        link.control
            .push(control_frame(ControlOp::Advertise, &d.name, Some(d.kind)));
    }
    let weak: Weak<ClientLink> = Arc::downgrade(&link);
    broker.watch_topics(move |d| {
        if let Some(l) = weak.upgrade() {
            if !l.closed.load(Ordering::Acquire) {
                l.control
                    .push(control_frame(ControlOp::Advertise, &d.name, Some(d.kind)));
            }
        }
    });

    let out = stream.try_clone().map_err(|e| e.to_string())?;
    let link_w = link.clone();
    let writer = std::thread::spawn(move || write_loop(out, link_w));

    let result = read_loop(&stream, &broker, endpoint, &link);
    link.closed.store(true, Ordering::Release);
    link.notify.notify();
    let _ = stream.shutdown(Shutdown::Both);
    let _ = writer.join();
    link.subs.lock().unwrap().clear();
    result
}

fn read_loop(stream: &TcpStream, broker: &Broker, endpoint: EndpointId, link: &ClientLink) -> Result<(), String> {
    let mut input = io::BufReader::new(stream);
    loop {
        let raw = match read_frame(&mut input) {
            Ok(Some(raw)) => raw,
            Ok(None) => return Ok(()),
            Err(e) if link.closed.load(Ordering::Acquire) => {
                debug!("read ended after close: {e}");
                return Ok(());
            }
            Err(e) => return Err(format!("read failed: {e}")),
        };
        match deserialize_frame(&raw).map_err(|e| format!("malformed frame: {e}"))? {
            Frame::Control { op, topic, header } => {
                check_topic_name(&topic).map_err(|e| e.to_string())?;
                let kind = match header.seq {
                    0 => None,
                    id => Some(
                        u16::try_from(id)
                            .ok()
                            .and_then(MessageKind::from_id)
                            .ok_or_else(|| format!("unknown type id {id} in control frame"))?,
                    ),
                };
                match op {
                    ControlOp::Advertise => {
                        if let Some(k) = kind {
                            broker.bind(&topic, k).map_err(|e| e.to_string())?;
                        }
                    }
                    ControlOp::Subscribe => {
                        let sub = broker
                            .subscribe_with(endpoint, &topic, kind, broker.default_capacity(), link.notify.clone())
                            .map_err(|e| e.to_string())?;
                        link.subs.lock().unwrap().push(sub);
                    }
                }
            }
            Frame::Data { topic, msg } => {
                let env = Envelope::with_raw(topic.into(), msg, endpoint, raw.into());
                broker.route(env).map_err(|e| e.to_string())?;
            }
        }
    }
}

fn write_loop(mut out: TcpStream, link: Arc<ClientLink>) {
    let mut batch: Vec<Arc<[u8]>> = Vec::new();
    loop {
        let seen = link.notify.generation();
        if link.closed.load(Ordering::Acquire) {
            return;
        }
        batch.extend(link.control.drain());
        {
            let subs = link.subs.lock().unwrap();
            // Round-robin across topics so one busy topic cannot starve the rest.
            loop {
                let mut any = false;
                for s in subs.iter() {
                    if let Some(env) = s.try_recv() {
                        any = true;
                        match env.raw() {
                            Ok(r) => batch.push(r),
                            Err(e) => warn!("dropping unencodable message on {}: {e}", env.topic),
                        }
                    }
                }
                if !any || batch.len() >= 64 {
                    break;
                }
            }
        }
        if batch.is_empty() {
            link.notify.wait_past(seen, Duration::from_millis(100));
            continue;
        }
        for frame in batch.drain(..) {
            if out.write_all(&frame).is_err() {
                link.closed.store(true, Ordering::Release);
                let _ = out.shutdown(Shutdown::Both);
                return;
            }
        }
    }
}

#[derive(Default)]
struct ClientShared {
    subs: Mutex<HashMap<String, Vec<Arc<EnvelopeQueue>>>>,
    topics: Mutex<BTreeMap<String, MessageKind>>,
    closed: AtomicBool,
}

/// A remote endpoint of a [`TcpBrokerServer`].
pub struct TcpBusClient {
    stream: Mutex<TcpStream>,
    shared: Arc<ClientShared>,
    reader: Option<JoinHandle<()>>,
}

impl TcpBusClient {
    pub fn connect(addr: impl ToSocketAddrs + std::fmt::Display) -> Result<Self, BusError> {
        let stream = TcpStream::connect(&addr).map_err(|e| BusError::Connect {
            addr: addr.to_string(),
            reason: e.to_string(),
        })?;
        let _ = stream.set_nodelay(true);
        let shared = Arc::new(ClientShared::default());
        let input = stream.try_clone().map_err(BusError::Io)?;
        let shared2 = shared.clone();
        let reader = std::thread::spawn(move || client_read_loop(input, shared2));
        Ok(TcpBusClient {
            stream: Mutex::new(stream),
            shared,
            reader: Some(reader),
        })
    }

    fn send(&self, bytes: &[u8]) -> Result<(), BusError> {
        self.stream.lock().unwrap().write_all(bytes).map_err(BusError::Io)
    }

    pub fn advertise(&self, topic: &str, kind: MessageKind) -> Result<(), BusError> {
        check_topic_name(topic)?;
        self.send(&control_frame(ControlOp::Advertise, topic, Some(kind)))
    }

    pub fn subscribe(
        &self,
        topic: &str,
        kind: Option<MessageKind>,
        capacity: usize,
    ) -> Result<Arc<EnvelopeQueue>, BusError> {
        self.subscribe_notify(topic, kind, capacity, Notify::new())
    }

    pub fn subscribe_notify(
        &self,
        topic: &str,
        kind: Option<MessageKind>,
        capacity: usize,
        notify: Arc<Notify>,
    ) -> Result<Arc<EnvelopeQueue>, BusError> {
        check_topic_name(topic)?;
        let q = Arc::new(BoundedQueue::new(capacity, notify));
        self.shared
            .subs
            .lock()
            .unwrap()
            .entry(topic.to_string())
            .or_default()
            .push(q.clone());
        self.send(&control_frame(ControlOp::Subscribe, topic, kind))?;
        Ok(q)
    }

    /// Sends a message with its header as given.
    pub fn publish(&self, topic: &str, msg: &Message) -> Result<(), BusError> {
        let bytes = serialize_frame(topic, msg).map_err(BusError::Wire)?;
        self.send(&bytes)
    }

    pub fn publish_raw(&self, frame: &[u8]) -> Result<(), BusError> {
        self.send(frame)
    }

    /// Topics the broker has announced so far.
    pub fn known_topics(&self) -> Vec<(String, MessageKind)> {
        self.shared
            .topics
            .lock()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    }

    pub fn is_closed(&self) -> bool {
        self.shared.closed.load(Ordering::Acquire)
    }

    pub fn close(mut self) {
        self.close_now();
    }

    fn close_now(&mut self) {
        let _ = self.stream.lock().unwrap().shutdown(Shutdown::Both);
        if let Some(h) = self.reader.take() {
            let _ = h.join();
        }
    }
}

impl Drop for TcpBusClient {
    fn drop(&mut self) {
        self.close_now();
    }
}

fn client_read_loop(stream: TcpStream, shared: Arc<ClientShared>) {
    let mut input = io::BufReader::new(stream);
    while let Ok(Some(raw)) = read_frame(&mut input) {
        match deserialize_frame(&raw) {
            Ok(Frame::Data { topic, msg }) => {
                let subs = shared.subs.lock().unwrap();
                if let Some(qs) = subs.get(&topic) {
                    let env = Envelope::with_raw(topic.as_str().into(), msg, EndpointId(0), raw.into());
                    for q in qs {
                        q.push(env.clone());
                    }
                }
            }
            Ok(Frame::Control {
                op: ControlOp::Advertise,
                topic,
                header,
            }) => {
                if let Some(k) = u16::try_from(header.seq).ok().and_then(MessageKind::from_id) {
                    shared.topics.lock().unwrap().insert(topic, k);
                }
            }
            Ok(Frame::Control { .. }) => {}
            Err(e) => {
                warn!("broker sent a malformed frame: {e}");
                break;
            }
        }
    }
    shared.closed.store(true, Ordering::Release);
    for qs in shared.subs.lock().unwrap().values() {
        for q in qs {
            q.notifier().notify();
        }
    }
}
