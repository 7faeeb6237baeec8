//! Publish-subscribe middleware: topic registry, in-process and TCP
//! transports, approximate-time synchronization and bag record/replay.

pub mod bag;
pub mod broker;
pub mod queue;
pub mod sync;
pub mod tcp;

pub use bag::{BagError, BagRecord, BagWriter, Clock, ManualClock, Recorder, Replayer, SystemClock};
pub use broker::{Broker, EndpointId, Envelope, Publisher, Subscription, TopicDescriptor, DEFAULT_QUEUE_CAPACITY};
pub use queue::{BoundedQueue, Notify};
pub use sync::{Stamped, SyncPolicy, Synchronizer};
pub use tcp::{TcpBrokerServer, TcpBusClient, DEFAULT_BROKER_ADDR};

use thiserror::Error;

use crate::msg::{MessageKind, WireError};

#[derive(Debug, Error)]
pub enum BusError {
    #[error("topic {topic} is bound to {bound}, not {requested}")]
    TypeConflict {
        topic: String,
        bound: MessageKind,
        requested: MessageKind,
    },
    #[error("malformed topic name {0:?}")]
    BadTopic(String),
    #[error("invalid message: {0}")]
    InvalidMessage(String),
    #[error("cannot bind {addr}: {reason}")]
    BindFailure { addr: String, reason: String },
    #[error("cannot connect to {addr}: {reason}")]
    Connect { addr: String, reason: String },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Io(std::io::Error),
}
