//! HTTP and WebSocket front end for a running pipeline.

pub mod json;
pub mod png;
pub mod server;

pub use json::{message_data, message_op};
pub use server::{graph_json, Gateway, GatewayHandle, Session, SESSION_QUEUE_DEPTH};
