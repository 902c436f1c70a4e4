//! Shared helpers for integration tests, including an independent reference
//! interpreter of the tracking algorithm written as the original nested
//! loops rather than as a state machine.

#![allow(dead_code)]

use std::collections::BTreeMap;

use facetrack::bench::{generate_scenario, synthetic_detector, synthetic_embedder, CorpusCase, Scenario};
use facetrack::detect::{detect_all_faces, localize_query, SyntheticDetector};
use facetrack::domain::{center_distance, BoundingBox, EngineConfig};
use facetrack::engine::{run, Backends, RunOutput};
use facetrack::track::TrackerState;
use facetrack::verify::{build_query, embed, preprocess_face, verify, SyntheticEmbedder};
use facetrack::videoio::VideoSource;

pub const TEST_DIM: usize = 64;

pub struct Prepared {
    pub scenario: Scenario,
    pub detector: SyntheticDetector,
    pub embedder: SyntheticEmbedder,
}

impl Prepared {
    pub fn new(case: &CorpusCase, dim: usize) -> Self {
        let scenario = generate_scenario(&case.spec).expect("corpus spec is valid");
        let detector = synthetic_detector(&case.spec, &scenario.truth);
        let embedder = synthetic_embedder(&case.spec, dim, None, None).expect("embedder builds");
        Prepared { scenario, detector, embedder }
    }

    pub fn backends(&self) -> Backends<'_> {
        Backends { detector: &self.detector, embedder: &self.embedder, mean_image: None }
    }

    pub fn run(&self, case: &CorpusCase) -> RunOutput {
        run(&self.scenario.video, case.query_frame, &case.user_box(), &self.backends(), &case.config)
            .unwrap_or_else(|e| panic!("{}: {e}", case.name))
    }
}

/// What the reference interpreter observed: the `(frame, kind)` sequence
/// and the box reported for every frame attributed to the query.
#[derive(Debug, Default)]
pub struct Reference {
    pub events: Vec<(usize, &'static str)>,
    pub reported: BTreeMap<usize, BoundingBox>,
}

/// Literal walk of the algorithm: bootstrap loop, then an outer loop over
/// the video containing the inner tracking loop, the verification test and
/// the detect-verify-skip loop.
pub fn reference_run(
    video: &dyn VideoSource,
    query_frame: usize,
    user_box: &BoundingBox,
    backends: &Backends,
    cfg: &EngineConfig,
) -> Reference {
    let n = video.frame_count();
    let tc = &cfg.tracker;
    let mut out = Reference::default();
    let mut detected_face: BTreeMap<usize, BoundingBox> = BTreeMap::new();
    let extract = |f: usize, b: &BoundingBox| {
        let frame = video.read_frame(f).unwrap();
        embed(backends.embedder, &preprocess_face(&frame, b, backends.mean_image).unwrap()).unwrap()
    };

    // bootstrap: locate the selection, track B frames, embed frames f..f+B-1
    let mut f = query_frame;
    let first = video.read_frame(f).unwrap();
    let face = localize_query(backends.detector, &first, user_box, cfg.search_region_scale).unwrap();
    detected_face.insert(f, face.bbox);
    out.events.push((f, "Bootstrap"));
    out.reported.insert(f, face.bbox);
    let mut tracker = TrackerState::with_config(&first, &face.bbox, tc).unwrap();
    let mut feature_vectors = Vec::new();
    for _ in 0..cfg.bootstrap_frames {
        feature_vectors.push(extract(f, &detected_face[&f]));
        let step = tracker.track_one_frame(&video.read_frame(f + 1).unwrap(), tc.search_radius, tc).unwrap();
        detected_face.insert(f + 1, step.bbox);
        out.events.push((f + 1, "Tracked"));
        out.reported.insert(f + 1, step.bbox);
        f += 1;
    }
    let query = build_query(&feature_vectors).unwrap();

    let mut continue_tracking = true;
    let mut since_check = 0;
    while f < n {
        while continue_tracking {
            if f + 1 >= n {
                out.events.push((n, "EndOfVideo"));
                return out;
            }
            let step = tracker.track_one_frame(&video.read_frame(f + 1).unwrap(), tc.search_radius, tc).unwrap();
            detected_face.insert(f + 1, step.bbox);
            out.reported.insert(f + 1, step.bbox);
            let d = center_distance(&detected_face[&f], &detected_face[&(f + 1)], &detected_face[&f]);
            if step.lost || d > cfg.distance_threshold {
                continue_tracking = false;
                out.events.push((f + 1, "DistanceJump"));
            } else {
                out.events.push((f + 1, "Tracked"));
                since_check += 1;
                if cfg.periodic_verify_interval.is_some_and(|v| since_check >= v) {
                    continue_tracking = false;
                }
            }
            f += 1;
        }

        since_check = 0;
        let verdict = verify(&extract(f, &detected_face[&f]), &query, cfg.similarity_threshold).unwrap();
        if verdict.score > cfg.similarity_threshold {
            out.events.push((f, "VerifyPass"));
            continue_tracking = true;
            continue;
        }
        out.events.push((f, "VerifyFail"));
        out.reported.remove(&f);
        let last_confirmed = detected_face[&(f - 1)];

        let mut region = Some(last_confirmed.scale_about_center(cfg.search_region_scale));
        loop {
            if f >= n {
                out.events.push((n, "EndOfVideo"));
                return out;
            }
            let frame = video.read_frame(f).unwrap();
            let face_list = detect_all_faces(backends.detector, &frame, region.as_ref()).unwrap();
            out.events.push((f, "DetectSweep"));
            let mut if_reappear = false;
            for face in &face_list {
                let score = verify(&extract(f, &face.bbox), &query, cfg.similarity_threshold).unwrap().score;
                if score > cfg.similarity_threshold {
                    out.events.push((f, "Reappear"));
                    continue_tracking = true;
                    detected_face.insert(f, face.bbox);
                    out.reported.insert(f, face.bbox);
                    tracker = TrackerState::with_config(&frame, &face.bbox, tc).unwrap();
                    if_reappear = true;
                    break;
                }
                out.events.push((f, "VerifyFail"));
            }
            if if_reappear {
                break;
            }
            out.events.push((f, "Skip"));
            f += cfg.skip_frames;
            region = None;
        }
    }
    out.events.push((n, "EndOfVideo"));
    out
}

pub fn trace_kinds(out: &RunOutput) -> Vec<(usize, &'static str)> {
    out.trace.iter().map(|e| (e.frame, e.kind.name())).collect()
}
