//! Synthetic benchmark: scripted scenarios with exact ground truth, the
//! backends that read them, and frame-level precision/recall.

mod corpus;
mod eval;
mod scenario;
mod truth;

pub use corpus::{absence_case, corpus, corpus_config, CorpusCase};
pub use eval::{evaluate, EvalError, PrecisionRecall, DEFAULT_IOU_THRESHOLD};
pub use scenario::{
    generate_scenario, identity_texture, reference_gallery, IdentitySpec, InvalidSpec, MotionSegment, NoiseSpec,
    Scenario, ScenarioEvent, ScenarioEventKind, ScenarioSpec,
};
pub use truth::{GroundTruth, TruthEntry};

use crate::detect::{SyntheticDetector, SyntheticDetectorParams};
use crate::domain::Frame;
use crate::verify::{preprocess_face, FaceChip, SyntheticEmbedder, VerifyError};

/// Reference chips of every identity in `spec`, preprocessed like live
/// crops.
pub fn gallery_chips(spec: &ScenarioSpec, mean_image: Option<&FaceChip>) -> Result<Vec<(String, FaceChip)>, VerifyError> {
    reference_gallery(spec)
        .into_iter()
        .map(|(label, img)| {
            let bounds = img.bounds();
            let frame = Frame::new(0, spec.frame_rate, img);
            Ok((label, preprocess_face(&frame, &bounds, mean_image)?))
        })
        .collect()
}

/// Embedder recognizing the scenario's identities. `sigma` defaults to the
/// spec's `noise.embed_sigma`.
pub fn synthetic_embedder(
    spec: &ScenarioSpec,
    dim: usize,
    sigma: Option<f64>,
    mean_image: Option<&FaceChip>,
) -> Result<SyntheticEmbedder, VerifyError> {
    SyntheticEmbedder::new(gallery_chips(spec, mean_image)?, dim, sigma.unwrap_or(spec.noise.embed_sigma), spec.seed)
}

/// Detector reading `truth` with the spec's miss and jitter noise.
pub fn synthetic_detector(spec: &ScenarioSpec, truth: &GroundTruth) -> SyntheticDetector {
    SyntheticDetector::new(
        truth.clone(),
        SyntheticDetectorParams {
            miss_rate: spec.noise.detector_miss,
            jitter: spec.noise.detector_jitter,
            false_positive_rate: 0.0,
            seed: spec.seed,
        },
    )
}
