//! The long-term tracking state machine.
//!
//! After a bootstrap that turns the user's selection into an averaged query
//! embedding, the engine alternates between three states:
//!
//! - TRACKING follows the face frame by frame with the patch tracker. A
//!   jump of the box center beyond `distance_threshold` box diagonals, or the
//!   tracker reporting the target lost, interrupts tracking. So does an
//!   optional periodic check.
//! - VERIFYING embeds the latest box and compares it with the query. A pass
//!   resumes tracking. A fail drops that frame, closes the open segment and
//!   starts detection at the same frame.
//! - DETECTING runs the detector (first around the last confirmed box, later
//!   on the whole frame) and verifies candidates in score order. The first
//!   accepted candidate opens a new segment and restarts the tracker;
//!   otherwise the engine skips `skip_frames` frames and sweeps again.
//!
//! Every step is recorded as an [`EngineEvent`].

mod annotate;
mod timeline;

pub use annotate::{annotate, draw_box, AnnotateError, HIGHLIGHT};
pub use timeline::{read_trace, write_trace, EngineEvent, EventKind, Timeline, TimelineSegment};

use thiserror::Error;

use crate::detect::{detect_all_faces, localize_query, DetectError, DetectorBackend};
use crate::domain::{center_distance, BoundingBox, DomainError, EngineConfig, Frame};
use crate::track::{TrackError, TrackerState};
use crate::verify::{build_query, cosine_similarity, embed, preprocess_face, verify, EmbedderBackend, FaceChip, QueryProfile, Verdict, VerifyError};
use crate::videoio::{VideoError, VideoSource};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("NoFaceInSelection: no detected face overlaps the selected box {0:?}")]
    NoFaceInSelection(BoundingBox),
    #[error("VideoTooShort: query frame {query_frame} plus {bootstrap_frames} bootstrap frames needs more than {frame_count} frames")]
    VideoTooShort { query_frame: usize, bootstrap_frames: usize, frame_count: usize },
    #[error("invalid engine config: {0}")]
    Config(#[from] DomainError),
    #[error(transparent)]
    Video(#[from] VideoError),
    #[error(transparent)]
    Detect(DetectError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Track(#[from] TrackError),
}

impl From<DetectError> for EngineError {
    fn from(e: DetectError) -> Self {
        match e {
            DetectError::NoFaceInSelection(b) => EngineError::NoFaceInSelection(b),
            other => EngineError::Detect(other),
        }
    }
}

impl EngineError {
    /// Failures caused by the query selection rather than by I/O or
    /// configuration.
    pub fn is_bootstrap_failure(&self) -> bool {
        matches!(self, EngineError::NoFaceInSelection(_) | EngineError::VideoTooShort { .. })
    }
}

/// The detection and verification components an engine run uses.
#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub detector: &'a dyn DetectorBackend,
    pub embedder: &'a dyn EmbedderBackend,
    pub mean_image: Option<&'a FaceChip>,
}

impl Backends<'_> {
    pub fn embed_box(&self, frame: &Frame, bbox: &BoundingBox) -> Result<crate::domain::Embedding, VerifyError> {
        embed(self.embedder, &preprocess_face(frame, bbox, self.mean_image)?)
    }

    pub fn verify_box(&self, frame: &Frame, bbox: &BoundingBox, query: &QueryProfile, threshold: f64) -> Result<Verdict, VerifyError> {
        verify(&self.embed_box(frame, bbox)?, query, threshold)
    }
}

/// Result of the bootstrap phase.
#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub query: QueryProfile,
    pub tracker: TrackerState,
    /// First frame handled by the main loop; its box is the last entry of
    /// `boxes`.
    pub resume_frame: usize,
    /// Boxes for frames `query_frame..=resume_frame`.
    pub boxes: Vec<BoundingBox>,
    /// Cosine of each bootstrap embedding with the averaged query.
    pub scores: Vec<f64>,
    pub events: Vec<EngineEvent>,
}

/// Localizes the query face, tracks it for `bootstrap_frames` frames while
/// embedding each of them, and averages the embeddings into the query.
pub fn bootstrap(
    video: &dyn VideoSource,
    query_frame: usize,
    user_box: &BoundingBox,
    backends: &Backends,
    config: &EngineConfig,
) -> Result<BootstrapResult, EngineError> {
    config.validate()?;
    let n = video.frame_count();
    let b = config.bootstrap_frames;
    if query_frame + b >= n {
        return Err(EngineError::VideoTooShort { query_frame, bootstrap_frames: b, frame_count: n });
    }
    let first = video.read_frame(query_frame)?;
    let located = localize_query(backends.detector, &first, user_box, config.search_region_scale)?;
    let mut tracker = TrackerState::with_config(&first, &located.bbox, &config.tracker)?;
    let mut boxes = vec![located.bbox];
    let mut embeddings = vec![backends.embed_box(&first, &located.bbox)?];
    let mut tracked = Vec::new();
    for f in query_frame + 1..=query_frame + b {
        let frame = video.read_frame(f)?;
        let step = tracker.track_one_frame(&frame, config.tracker.search_radius, &config.tracker)?;
        boxes.push(step.bbox);
        tracked.push(EngineEvent { frame: f, kind: EventKind::Tracked { bbox: step.bbox, confidence: step.confidence } });
        if f < query_frame + b {
            embeddings.push(backends.embed_box(&frame, &step.bbox)?);
        }
    }
    let mut query = build_query(&embeddings)?;
    query.source_frames = (query_frame..query_frame + b).collect();
    let scores = embeddings
        .iter()
        .map(|e| cosine_similarity(e, &query.embedding))
        .collect::<Result<Vec<_>, _>>()?;
    let mut events = vec![EngineEvent {
        frame: query_frame,
        kind: EventKind::Bootstrap { bbox: located.bbox, score: mean(&scores) },
    }];
    events.extend(tracked);
    Ok(BootstrapResult { query, tracker, resume_frame: query_frame + b, boxes, scores, events })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub timeline: Timeline,
    pub trace: Vec<EngineEvent>,
    pub query: QueryProfile,
}

struct OpenSegment {
    start: usize,
    boxes: Vec<BoundingBox>,
    scores: Vec<f64>,
}

impl OpenSegment {
    fn close(self) -> TimelineSegment {
        TimelineSegment {
            start: self.start,
            end: self.start + self.boxes.len() - 1,
            boxes: self.boxes,
            mean_score: mean(&self.scores),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Tracking,
    Verifying,
    Detecting { localized: bool },
}

/// Runs the full state machine from the user's selection to the end of the
/// video.
pub fn run(
    video: &dyn VideoSource,
    query_frame: usize,
    user_box: &BoundingBox,
    backends: &Backends,
    config: &EngineConfig,
) -> Result<RunOutput, EngineError> {
    let boot = bootstrap(video, query_frame, user_box, backends, config)?;
    let n = video.frame_count();
    let threshold = config.similarity_threshold;
    let query = boot.query;
    let mut trace = boot.events;
    let mut tracker = boot.tracker;
    let mut segments = Vec::new();
    let mut open = Some(OpenSegment { start: query_frame, boxes: boot.boxes, scores: boot.scores });
    let mut last_confirmed = *open.as_ref().and_then(|s| s.boxes.last()).expect("bootstrap yields boxes");
    let mut f = boot.resume_frame;
    let mut since_check = 0usize;
    let mut state = State::Tracking;

    loop {
        match state {
            State::Tracking => {
                if f + 1 >= n {
                    trace.push(EngineEvent { frame: n, kind: EventKind::EndOfVideo });
                    break;
                }
                let seg = open.as_mut().expect("open segment while tracking");
                let prev = *seg.boxes.last().expect("segment is never empty");
                f += 1;
                let frame = video.read_frame(f)?;
                let step = tracker.track_one_frame(&frame, config.tracker.search_radius, &config.tracker)?;
                seg.boxes.push(step.bbox);
                let distance = center_distance(&prev, &step.bbox, &prev);
                if step.lost || distance > config.distance_threshold {
                    trace.push(EngineEvent {
                        frame: f,
                        kind: EventKind::DistanceJump {
                            bbox: step.bbox,
                            distance: (!step.lost).then_some(distance),
                            confidence: step.confidence,
                            lost: step.lost,
                        },
                    });
                    state = State::Verifying;
                } else {
                    trace.push(EngineEvent { frame: f, kind: EventKind::Tracked { bbox: step.bbox, confidence: step.confidence } });
                    since_check += 1;
                    if config.periodic_verify_interval.is_some_and(|v| since_check >= v) {
                        state = State::Verifying;
                    }
                }
            }
            State::Verifying => {
                let seg = open.as_mut().expect("open segment while verifying");
                let bbox = *seg.boxes.last().expect("segment is never empty");
                let frame = video.read_frame(f)?;
                let verdict = backends.verify_box(&frame, &bbox, &query, threshold)?;
                since_check = 0;
                if verdict.accepted {
                    trace.push(EngineEvent { frame: f, kind: EventKind::VerifyPass { bbox, score: verdict.score } });
                    seg.scores.push(verdict.score);
                    last_confirmed = bbox;
                    state = State::Tracking;
                } else {
                    trace.push(EngineEvent { frame: f, kind: EventKind::VerifyFail { bbox, score: verdict.score } });
                    seg.boxes.pop();
                    let seg = open.take().expect("open segment while verifying");
                    if let Some(&b) = seg.boxes.last() {
                        last_confirmed = b;
                    }
                    segments.push(seg.close());
                    state = State::Detecting { localized: true };
                }
            }
            State::Detecting { localized } => {
                if f >= n {
                    trace.push(EngineEvent { frame: n, kind: EventKind::EndOfVideo });
                    break;
                }
                let frame = video.read_frame(f)?;
                let region = localized.then(|| last_confirmed.scale_about_center(config.search_region_scale));
                let dets = detect_all_faces(backends.detector, &frame, region.as_ref())?;
                trace.push(EngineEvent { frame: f, kind: EventKind::DetectSweep { region, detections: dets.len() } });
                let mut found = None;
                for d in &dets {
                    let verdict = backends.verify_box(&frame, &d.bbox, &query, threshold)?;
                    if verdict.accepted {
                        trace.push(EngineEvent { frame: f, kind: EventKind::Reappear { bbox: d.bbox, score: verdict.score } });
                        found = Some((d.bbox, verdict.score));
                        break;
                    }
                    trace.push(EngineEvent { frame: f, kind: EventKind::VerifyFail { bbox: d.bbox, score: verdict.score } });
                }
                match found {
                    Some((bbox, score)) => {
                        tracker = TrackerState::with_config(&frame, &bbox, &config.tracker)?;
                        let bbox = tracker.last_box;
                        open = Some(OpenSegment { start: f, boxes: vec![bbox], scores: vec![score] });
                        last_confirmed = bbox;
                        since_check = 0;
                        state = State::Tracking;
                    }
                    None => {
                        let to = f + config.skip_frames;
                        trace.push(EngineEvent { frame: f, kind: EventKind::Skip { to } });
                        f = to;
                        state = State::Detecting { localized: false };
                    }
                }
            }
        }
    }
    if let Some(seg) = open.take() {
        segments.push(seg.close());
    }
    let timeline = Timeline { query_frame, config: config.clone(), segments };
    debug_assert!(timeline.validate().is_ok());
    Ok(RunOutput { timeline, trace, query })
}
