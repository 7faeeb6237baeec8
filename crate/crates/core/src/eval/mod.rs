//! Ground truth, metrics and algorithm comparison.

pub mod compare;
pub mod gt;
pub mod metrics;

pub use compare::{observe, run_comparison, swap_attention_kind, GroundTruthSource, RunObservations};
pub use gt::{load_ground_truth, parse_ground_truth, GroundTruthSet};
pub use metrics::{compute_metrics, report_csv, report_table, FrameObservation, MetricsRow};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ground truth line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("ground truth frame {found} does not follow {prev}{}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    OrderViolation { line: Option<usize>, prev: u64, found: u64 },
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("no algorithms to compare")]
    EmptyComparison,
    #[error("cannot compare {algorithm}: {reason}")]
    BadAlgorithm { algorithm: String, reason: String },
    #[error("{algorithm}: {reason}")]
    Pipeline { algorithm: String, reason: String },
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
}
