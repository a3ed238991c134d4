//! Evaluation suite: detection average precision, clustering and retrieval
//! metrics, speaker recall, Hungarian matching of predictions to ground
//! truth, and dataset-level aggregation.

mod average_precision;
mod hungarian;
mod mutual_info;
mod report;
mod retrieval;

pub use average_precision::{average_precision, pooled_average_precision, DetClass, Detection};
pub use hungarian::{hungarian_match_boxes, matching_cost};
pub use mutual_info::clustering_metrics;
pub use report::{
    evaluate_dataset, recall_at_num_texts, sweep_tau, EvalConfig, EvalReport, GtMatch, PageMetrics,
    TauSweepPoint,
};
pub use retrieval::{retrieval_metrics, RetrievalMetrics};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("label lists differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty label lists")]
    EmptyLabels,
    #[error("similarity matrix is {rows}x{cols}, expected {n}x{n}")]
    ShapeMismatch { rows: usize, cols: usize, n: usize },
    #[error("page id mismatch: graph '{graph}' vs annotation '{annotation}'")]
    PageIdMismatch { graph: String, annotation: String },
    #[error("no pages to evaluate")]
    NoPages,
}
