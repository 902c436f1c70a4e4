//! Face detection behind a backend interface.
//!
//! Backends return candidate boxes; [`detect_all_faces`] applies the
//! region restriction (a detection belongs to a region when its box center
//! lies inside it) and the descending-score ordering every caller relies on.

mod external;
mod synthetic;
mod template;

pub use external::ExternalDetector;
pub use synthetic::{SyntheticDetector, SyntheticDetectorParams};
pub use template::{TemplateDetector, TemplateDetectorParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{iou, BoundingBox, Frame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("BackendFailure: {0}")]
    BackendFailure(String),
    #[error("NoFaceInSelection: no detected face overlaps the selected box {0:?}")]
    NoFaceInSelection(BoundingBox),
    #[error("region {0:?} does not intersect the frame")]
    RegionOutsideFrame(BoundingBox),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub score: f64,
}

pub trait DetectorBackend: Send + Sync {
    fn name(&self) -> &str;

    fn supports_region_restriction(&self) -> bool;

    /// Raw detections for `frame`. Backends that support region restriction
    /// may skip work outside `region`; filtering and ordering are applied by
    /// [`detect_all_faces`].
    fn detect(&self, frame: &Frame, region: Option<&BoundingBox>) -> Result<Vec<Detection>, DetectError>;
}

/// All faces in `frame`, or only those centered inside `region`, sorted by
/// descending score (stable for ties).
pub fn detect_all_faces(
    backend: &dyn DetectorBackend,
    frame: &Frame,
    region: Option<&BoundingBox>,
) -> Result<Vec<Detection>, DetectError> {
    let region = match region {
        Some(r) => Some(
            r.clamp_to(frame.width(), frame.height())
                .ok_or(DetectError::RegionOutsideFrame(*r))?,
        ),
        None => None,
    };
    let mut dets: Vec<Detection> = backend
        .detect(frame, region.as_ref())?
        .into_iter()
        .filter(|d| {
            let (cx, cy) = d.bbox.center();
            region.is_none_or(|r| r.contains_point(cx, cy))
        })
        .map(|d| Detection { score: d.score.clamp(0.0, 1.0), ..d })
        .collect();
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(dets)
}

/// Resolves the user's rough selection to a detector box: the detection with
/// maximal IoU against `user_box` (ties broken by score), searched inside
/// `user_box` scaled by `search_scale`.
pub fn localize_query(
    backend: &dyn DetectorBackend,
    frame: &Frame,
    user_box: &BoundingBox,
    search_scale: f64,
) -> Result<Detection, DetectError> {
    let region = user_box.scale_about_center(search_scale.max(1.0));
    let dets = detect_all_faces(backend, frame, Some(&region))?;
    let mut best: Option<(f64, Detection)> = None;
    for d in dets {
        let overlap = iou(&d.bbox, user_box);
        if overlap <= 0.0 {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bo, bd)) => overlap > *bo || (overlap == *bo && d.score > bd.score),
        };
        if better {
            best = Some((overlap, d));
        }
    }
    best.map(|(_, d)| d).ok_or(DetectError::NoFaceInSelection(*user_box))
}

/// Greedy non-maximum suppression: keeps detections in descending score
/// order, dropping any whose IoU with an already kept one exceeds
/// `iou_threshold`.
pub fn non_max_suppression(mut dets: Vec<Detection>, iou_threshold: f64) -> Vec<Detection> {
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept: Vec<Detection> = Vec::new();
    for d in dets {
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= iou_threshold) {
            kept.push(d);
        }
    }
    kept
}
