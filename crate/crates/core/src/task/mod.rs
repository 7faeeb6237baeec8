//! Template tracking and the attention-to-tracker hand-off.

pub mod bridge;
pub mod ncc;
pub mod tracker;

pub use bridge::{Bridge, BridgeCommand, BridgePolicy, BridgeState};
pub use ncc::ncc_match;
pub use tracker::{gray_plane, TrackerCore};

use thiserror::Error;

use crate::msg::BoundingBox;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("template {template:?} does not fit in search window {window:?}")]
    WindowTooSmall { template: (u32, u32), window: BoundingBox },
    #[error("bbox {bbox:?} is not a valid box inside a {width}x{height} frame")]
    BadBox { bbox: BoundingBox, width: u32, height: u32 },
    #[error("{0}")]
    BadPolicy(String),
}
