//! Prototyping environment for visual attention pipelines.
//!
//! Nodes exchange typed messages over a publish-subscribe [`bus`]. An input
//! layer produces frames, the [`attention`] layer turns them into saliency
//! maps and foci of attention, and the [`task`] layer hands those to a
//! template tracker. [`eval`] scores runs against ground truth and
//! [`gateway`] exposes a live pipeline over HTTP and WebSocket.

pub mod attention;
pub mod bus;
pub mod config;
pub mod eval;
pub mod gateway;
pub mod input;
pub mod msg;
pub mod plane;
pub mod runtime;
pub mod task;
