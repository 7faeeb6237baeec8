//! In-process topic registry and fan-out.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use super::queue::{BoundedQueue, Notify};
use super::BusError;
use crate::msg::{serialize_frame, Message, MessageKind, WireError};

pub const DEFAULT_QUEUE_CAPACITY: usize = 16;

/// Identifies a publishing/subscribing party. Fan-out never delivers a
/// message back to the endpoint that published it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EndpointId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicDescriptor {
    pub name: String,
    pub kind: MessageKind,
}

/// A message in flight, shared by every subscriber it is delivered to.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub topic: Arc<str>,
    pub msg: Arc<Message>,
    pub origin: EndpointId,
    raw: Arc<OnceLock<Arc<[u8]>>>,
}

impl Envelope {
    pub fn new(topic: Arc<str>, msg: Message, origin: EndpointId) -> Self {
        Envelope {
            topic,
            msg: Arc::new(msg),
            origin,
            raw: Arc::new(OnceLock::new()),
        }
    }

    /// An envelope whose wire encoding is already known.
    pub fn with_raw(topic: Arc<str>, msg: Message, origin: EndpointId, raw: Arc<[u8]>) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(raw);
        Envelope {
            topic,
            msg: Arc::new(msg),
            origin,
            raw: Arc::new(cell),
        }
    }

    /// Wire frame bytes, encoded at most once per envelope.
    pub fn raw(&self) -> Result<Arc<[u8]>, WireError> {
        if let Some(r) = self.raw.get() {
            return Ok(r.clone());
        }
        let bytes: Arc<[u8]> = serialize_frame(&self.topic, &self.msg)?.into();
        Ok(self.raw.get_or_init(|| bytes).clone())
    }

    pub fn stamp_ns(&self) -> u64 {
        self.msg.stamp_ns()
    }
}

pub type EnvelopeQueue = BoundedQueue<Envelope>;

struct SubEntry {
    id: u64,
    endpoint: EndpointId,
    queue: Arc<EnvelopeQueue>,
}

type TopicWatcher = Arc<dyn Fn(&TopicDescriptor) + Send + Sync>;

#[derive(Default)]
struct State {
    topics: BTreeMap<String, MessageKind>,
    subs: HashMap<String, Vec<SubEntry>>,
    taps: Vec<SubEntry>,
    watchers: Vec<TopicWatcher>,
}

struct Inner {
    state: Mutex<State>,
    next_id: AtomicU64,
    default_capacity: usize,
}

/// Cheaply clonable handle to one routing domain.
#[derive(Clone)]
pub struct Broker {
    inner: Arc<Inner>,
}

impl Default for Broker {
    fn default() -> Self {
        Broker::new()
    }
}

pub fn check_topic_name(topic: &str) -> Result<(), BusError> {
    let ok = topic.len() > 1
        && topic.len() <= u16::MAX as usize
        && topic.starts_with('/')
        && !topic.chars().any(|c| c.is_whitespace() || c.is_control() || c == '#');
    if ok {
        Ok(())
    } else {
        Err(BusError::BadTopic(topic.to_string()))
    }
}

impl Broker {
    pub fn new() -> Self {
        Broker::with_capacity(DEFAULT_QUEUE_CAPACITY)
    }

    pub fn with_capacity(default_capacity: usize) -> Self {
        Broker {
            inner: Arc::new(Inner {
                state: Mutex::new(State::default()),
                next_id: AtomicU64::new(1),
                default_capacity: default_capacity.max(1),
            }),
        }
    }

    pub fn default_capacity(&self) -> usize {
        self.inner.default_capacity
    }

    pub fn new_endpoint(&self) -> EndpointId {
        EndpointId(self.inner.next_id.fetch_add(1, Ordering::Relaxed))
    }

    /// Binds `topic` to `kind`, notifying watchers the first time.
    pub fn bind(&self, topic: &str, kind: MessageKind) -> Result<TopicDescriptor, BusError> {
        check_topic_name(topic)?;
        let (desc, watchers) = {
            let mut st = self.inner.state.lock().unwrap();
            match st.topics.get(topic) {
                Some(&bound) if bound != kind => {
                    return Err(BusError::TypeConflict {
                        topic: topic.to_string(),
                        bound,
                        requested: kind,
                    })
                }
                Some(_) => {
                    return Ok(TopicDescriptor {
                        name: topic.to_string(),
                        kind,
                    })
                }
                None => {
                    st.topics.insert(topic.to_string(), kind);
                }
            }
            let desc = TopicDescriptor {
                name: topic.to_string(),
                kind,
            };
            (desc, st.watchers.clone())
        };
        for w in watchers {
            w(&desc);
        }
        Ok(desc)
    }

    pub fn advertise(&self, endpoint: EndpointId, topic: &str, kind: MessageKind) -> Result<Publisher, BusError> {
        self.bind(topic, kind)?;
        Ok(Publisher {
            broker: self.clone(),
            topic: topic.into(),
            kind,
            endpoint,
            seq: AtomicU32::new(0),
        })
    }

    /// Subscribes with the broker's default queue capacity.
    pub fn subscribe(&self, endpoint: EndpointId, topic: &str, kind: MessageKind) -> Result<Subscription, BusError> {
        self.subscribe_with(endpoint, topic, Some(kind), self.inner.default_capacity, Notify::new())
    }

    /// Full-control subscription. `kind = None` accepts whatever type the
    /// topic is (or later gets) bound to.
    pub fn subscribe_with(
        &self,
        endpoint: EndpointId,
        topic: &str,
        kind: Option<MessageKind>,
        capacity: usize,
        notify: Arc<Notify>,
    ) -> Result<Subscription, BusError> {
        match kind {
            Some(k) => {
                self.bind(topic, k)?;
            }
            None => check_topic_name(topic)?,
        }
        let id = self.inner.next_id.fetch_add(1, Ordering::Relaxed);
        let queue = Arc::new(BoundedQueue::new(capacity, notify));
        let mut st = self.inner.state.lock().unwrap();
        st.subs.entry(topic.to_string()).or_default().push(SubEntry {
            id,
            endpoint,
            queue: queue.clone(),
        });
        Ok(Subscription {
            broker: self.clone(),
            topic: Some(topic.to_string()),
            id,
            queue,
        })
    }

    /// Receives every message on every topic.
    pub fn tap(&self, endpoint: EndpointId, capacity: usize, notify: Arc<Notify>) -> Subscription {
        let id = self.inner.next_id.fetch_add(1, Ordering::Relaxed);
        let queue = Arc::new(BoundedQueue::new(capacity, notify));
        self.inner.state.lock().unwrap().taps.push(SubEntry {
            id,
            endpoint,
            queue: queue.clone(),
        });
        Subscription {
            broker: self.clone(),
            topic: None,
            id,
            queue,
        }
    }

    pub fn topics(&self) -> Vec<TopicDescriptor> {
        let st = self.inner.state.lock().unwrap();
        st.topics
            .iter()
            .map(|(name, kind)| TopicDescriptor {
                name: name.clone(),
                kind: *kind,
            })
            .collect()
    }

    pub fn topic_kind(&self, topic: &str) -> Option<MessageKind> {
        self.inner.state.lock().unwrap().topics.get(topic).copied()
    }

    /// Registers a callback fired once per newly bound topic.
    pub fn watch_topics(&self, f: impl Fn(&TopicDescriptor) + Send + Sync + 'static) {
        self.inner.state.lock().unwrap().watchers.push(Arc::new(f));
    }

    /// Routes an envelope to every matching subscriber except its origin.
    pub fn route(&self, env: Envelope) -> Result<usize, BusError> {
        let kind = env.msg.kind();
        self.bind(&env.topic, kind)?;
        let st = self.inner.state.lock().unwrap();
        let mut delivered = 0;
        if let Some(subs) = st.subs.get(&*env.topic) {
            for s in subs.iter().filter(|s| s.endpoint != env.origin) {
                s.queue.push(env.clone());
                delivered += 1;
            }
        }
        for s in st.taps.iter().filter(|s| s.endpoint != env.origin) {
            s.queue.push(env.clone());
            delivered += 1;
        }
        Ok(delivered)
    }

    fn unsubscribe(&self, topic: Option<&str>, id: u64) {
        let mut st = self.inner.state.lock().unwrap();
        match topic {
            Some(t) => {
                if let Some(v) = st.subs.get_mut(t) {
                    v.retain(|s| s.id != id);
                }
            }
            None => st.taps.retain(|s| s.id != id),
        }
    }
}

/// Publishing side of an advertised topic. Assigns monotone `seq` numbers.
pub struct Publisher {
    broker: Broker,
    topic: Arc<str>,
    kind: MessageKind,
    endpoint: EndpointId,
    seq: AtomicU32,
}

impl Publisher {
    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn kind(&self) -> MessageKind {
        self.kind
    }

    /// Stamps the next sequence number into the header and routes the message.
    pub fn publish(&self, mut msg: Message) -> Result<usize, BusError> {
        msg.header_mut().seq = self.seq.fetch_add(1, Ordering::Relaxed);
        self.publish_verbatim(msg)
    }

    /// Routes the message with its header untouched.
    pub fn publish_verbatim(&self, msg: Message) -> Result<usize, BusError> {
        if msg.kind() != self.kind {
            return Err(BusError::TypeConflict {
                topic: self.topic.to_string(),
                bound: self.kind,
                requested: msg.kind(),
            });
        }
        msg.validate().map_err(BusError::InvalidMessage)?;
        self.broker.route(Envelope::new(self.topic.clone(), msg, self.endpoint))
    }
}

/// Receiving side; unsubscribes on drop.
pub struct Subscription {
    broker: Broker,
    topic: Option<String>,
    id: u64,
    queue: Arc<EnvelopeQueue>,
}

impl Subscription {
    pub fn topic(&self) -> Option<&str> {
        self.topic.as_deref()
    }

    pub fn queue(&self) -> &Arc<EnvelopeQueue> {
        &self.queue
    }

    pub fn try_recv(&self) -> Option<Envelope> {
        self.queue.pop()
    }

    pub fn recv_timeout(&self, timeout: std::time::Duration) -> Option<Envelope> {
        self.queue.pop_timeout(timeout)
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        self.broker.unsubscribe(self.topic.as_deref(), self.id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msg::{Header, PointFoa};

    fn foa(i: u32) -> Message {
        Message::PointFoa(PointFoa {
            header: Header::new(0, i as u64),
            x: i,
            y: 0,
            score: 0.5,
        })
    }

    #[test]
    fn advertise_twice_and_conflict() {
        let b = Broker::new();
        let (n1, n2) = (b.new_endpoint(), b.new_endpoint());
        b.advertise(n1, "/img", MessageKind::Image).unwrap();
        b.advertise(n2, "/img", MessageKind::Image).unwrap();
        assert_eq!(b.topics().len(), 1);
        assert!(matches!(
            b.advertise(n2, "/img", MessageKind::Saliency),
            Err(BusError::TypeConflict { .. })
        ));
        assert!(matches!(
            b.subscribe(n2, "/img", MessageKind::Saliency),
            Err(BusError::TypeConflict { .. })
        ));
    }

    #[test]
    fn publish_without_subscribers_is_dropped() {
        let b = Broker::new();
        let p = b.advertise(b.new_endpoint(), "/foa", MessageKind::PointFoa).unwrap();
        assert_eq!(p.publish(foa(1)).unwrap(), 0);
    }

    #[test]
    fn late_binding_and_fan_out() {
        let b = Broker::new();
        let s1 = b.subscribe(b.new_endpoint(), "/foa", MessageKind::PointFoa).unwrap();
        let s2 = b.subscribe(b.new_endpoint(), "/foa", MessageKind::PointFoa).unwrap();
        let p = b.advertise(b.new_endpoint(), "/foa", MessageKind::PointFoa).unwrap();
        p.publish(foa(3)).unwrap();
        assert_eq!(s1.try_recv().unwrap().msg.stamp_ns(), 3);
        assert_eq!(s2.try_recv().unwrap().msg.stamp_ns(), 3);
    }

    #[test]
    fn capacity_16_keeps_last_16() {
        let b = Broker::new();
        let s = b.subscribe(b.new_endpoint(), "/foa", MessageKind::PointFoa).unwrap();
        let p = b.advertise(b.new_endpoint(), "/foa", MessageKind::PointFoa).unwrap();
        for i in 0..20 {
            p.publish(foa(i)).unwrap();
        }
        let got: Vec<u64> = std::iter::from_fn(|| s.try_recv()).map(|e| e.stamp_ns()).collect();
        assert_eq!(got, (4..20).collect::<Vec<_>>());
        assert_eq!(s.queue().dropped(), 4);
    }

    #[test]
    fn seq_is_monotone_and_sender_excluded() {
        let b = Broker::new();
        let me = b.new_endpoint();
        let own = b.subscribe(me, "/foa", MessageKind::PointFoa).unwrap();
        let other = b.subscribe(b.new_endpoint(), "/foa", MessageKind::PointFoa).unwrap();
        let p = b.advertise(me, "/foa", MessageKind::PointFoa).unwrap();
        for i in 0..3 {
            p.publish(foa(i)).unwrap();
        }
        assert!(own.try_recv().is_none());
        let seqs: Vec<u32> = std::iter::from_fn(|| other.try_recv())
            .map(|e| e.msg.header().seq)
            .collect();
        assert_eq!(seqs, vec![0, 1, 2]);
    }

    #[test]
    fn dropped_subscription_stops_delivery() {
        let b = Broker::new();
        let s = b.subscribe(b.new_endpoint(), "/foa", MessageKind::PointFoa).unwrap();
        let p = b.advertise(b.new_endpoint(), "/foa", MessageKind::PointFoa).unwrap();
        drop(s);
        assert_eq!(p.publish(foa(0)).unwrap(), 0);
    }

    #[test]
    fn bad_topic_names() {
        let b = Broker::new();
        for t in ["", "/", "img", "/a b"] {
            assert!(matches!(
                b.advertise(b.new_endpoint(), t, MessageKind::Image),
                Err(BusError::BadTopic(_))
            ));
        }
    }
}
