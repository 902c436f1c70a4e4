use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::truth::GroundTruth;
use crate::domain::iou;
use crate::engine::Timeline;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("UnknownLabel: {0:?} does not occur in the ground truth")]
    UnknownLabel(String),
}

/// Frame-level detection counts and the derived ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub iou_threshold: f64,
}

impl PrecisionRecall {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, iou_threshold: f64) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        PrecisionRecall { precision: ratio(tp, tp + fp), recall: ratio(tp, tp + fn_), tp, fp, fn_, iou_threshold }
    }
}

/// Scores every timeline frame against the query identity's visible box.
pub fn evaluate(
    timeline: &Timeline,
    truth: &GroundTruth,
    query_label: &str,
    iou_threshold: f64,
) -> Result<PrecisionRecall, EvalError> {
    if !truth.has_label(query_label) {
        return Err(EvalError::UnknownLabel(query_label.to_string()));
    }
    let (mut tp, mut fp) = (0, 0);
    for (frame, reported) in timeline.frame_boxes() {
        match truth.visible_box(frame, query_label) {
            Some(t) if iou(&reported, &t) >= iou_threshold => tp += 1,
            _ => fp += 1,
        }
    }
    let visible = truth.visible_frames(query_label).len();
    Ok(PrecisionRecall::from_counts(tp, fp, visible - tp, iou_threshold))
}
