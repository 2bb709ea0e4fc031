//! Walkability metrics: expansion ratios, average precision, and the
//! semantic-histogram KL comparison.
//!
//! All counts are in label-grid cells.

mod expansion;
mod precision;
mod semantic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expansion::{expansion_counts, expansion_metrics, ExpansionCounts, DEFAULT_THRESHOLD};
pub use precision::{average_precision, mean_ap};
pub use semantic::{
    kl_divergence, sample_locations, semantic_class_counts, semantic_histogram, ClassHistogram,
    PixelCoord, SemanticMap, DEFAULT_KL_EPSILON, DEFAULT_WINDOW,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("ground truth has no positive cells")]
    EmptyGroundTruth,
    #[error("no locations to histogram")]
    EmptyLocations,
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("location ({x}, {y}) is outside the {width}x{height} image")]
    LocationOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
}

impl From<crate::grid::GridError> for EvalError {
    fn from(e: crate::grid::GridError) -> Self {
        EvalError::ShapeMismatch(e.to_string())
    }
}

/// Ratios are normalized by the number of ground-truth positive cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Predicted positives (TP + FP).
    pub pred_total: Option<f64>,
    pub pred_valid_tp: Option<f64>,
    pub missing_fn: Option<f64>,
    /// Predicted positives not covered by ground truth.
    pub expansion: Option<f64>,
    pub map: Option<f64>,
    /// Nats.
    pub kl: Option<f64>,
}

impl MetricsReport {
    pub fn expansion(pred_total: f64, pred_valid_tp: f64, missing_fn: f64, expansion: f64) -> Self {
        Self {
            pred_total: Some(pred_total),
            pred_valid_tp: Some(pred_valid_tp),
            missing_fn: Some(missing_fn),
            expansion: Some(expansion),
            ..Default::default()
        }
    }

    /// Checks `tp + fn = 1` and `total = tp + expansion` within `tol`, for
    /// whichever fields are set.
    pub fn identities_hold(&self, tol: f64) -> bool {
        let a = match (self.pred_valid_tp, self.missing_fn) {
            (Some(tp), Some(fn_)) => (tp + fn_ - 1.0).abs() <= tol,
            _ => true,
        };
        let b = match (self.pred_total, self.pred_valid_tp, self.expansion) {
            (Some(t), Some(tp), Some(e)) => (t - (tp + e)).abs() <= tol,
            _ => true,
        };
        a && b
    }
}
