//! Frame sources and preprocessing.

pub mod filter;
pub mod pnm;
pub mod scene;
pub mod sequence;

pub use filter::{gaussian_blur, resize_bilinear};
pub use scene::{Distractor, SceneConfig, SyntheticScene};
pub use sequence::SequenceSource;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("no frames found in {0}")]
    NoFramesFound(PathBuf),
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("{path}: frame is {found:?}, sequence is {expected:?}")]
    SizeMismatch {
        path: PathBuf,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("sigma {sigma} must be in (0, {limit}]")]
    BadSigma { sigma: f64, limit: f64 },
    #[error("{0}")]
    BadParam(String),
}
