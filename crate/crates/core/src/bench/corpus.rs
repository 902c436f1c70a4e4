//! A fixed set of seeded scenarios exercising every engine branch: steady
//! tracking, motion, hard cuts, occlusions, distractors, long absences and
//! identity swaps.

use super::scenario::{IdentitySpec, MotionSegment, NoiseSpec, ScenarioEvent, ScenarioEventKind, ScenarioSpec};
use crate::domain::{BoundingBox, EngineConfig};

#[derive(Debug, Clone)]
pub struct CorpusCase {
    pub name: &'static str,
    pub spec: ScenarioSpec,
    pub query_label: String,
    pub query_frame: usize,
    pub config: EngineConfig,
}

impl CorpusCase {
    /// The query identity's box at the query frame, used as the user
    /// selection.
    pub fn user_box(&self) -> BoundingBox {
        self.spec
            .ground_truth()
            .visible_box(self.query_frame, &self.query_label)
            .expect("corpus query identity is visible at the query frame")
    }

    /// Same case with the given scenario noise.
    pub fn with_noise(&self, noise: NoiseSpec) -> CorpusCase {
        let mut c = self.clone();
        c.spec.noise = noise;
        c
    }
}

fn seg(start: usize, end: usize, x: i32, y: i32, v: [f64; 2]) -> MotionSegment {
    MotionSegment { start, end, start_box: BoundingBox::new(x, y, 32, 32), velocity: v }
}

fn ident(label: &str, appearance_seed: u64, segments: Vec<MotionSegment>) -> IdentitySpec {
    IdentitySpec { label: label.into(), segments, appearance_seed }
}

fn cut(frame: usize) -> ScenarioEvent {
    ScenarioEvent { frame, kind: ScenarioEventKind::HardCut }
}

fn occlude(frame: usize, label: &str, start: bool) -> ScenarioEvent {
    let label = label.to_string();
    let kind = if start { ScenarioEventKind::OcclusionStart { label } } else { ScenarioEventKind::OcclusionEnd { label } };
    ScenarioEvent { frame, kind }
}

fn spec(duration: usize, seed: u64, identities: Vec<IdentitySpec>, events: Vec<ScenarioEvent>) -> ScenarioSpec {
    ScenarioSpec {
        duration_frames: duration,
        dimensions: [128, 96],
        frame_rate: 29.0,
        identities,
        events,
        noise: NoiseSpec::default(),
        seed,
    }
}

/// Engine settings shared by the corpus: defaults with a smaller tracker
/// search window, ample for the scripted speeds.
pub fn corpus_config() -> EngineConfig {
    let mut c = EngineConfig::default();
    c.tracker.search_radius = 8;
    c
}

fn case(name: &'static str, spec: ScenarioSpec, query_frame: usize) -> CorpusCase {
    CorpusCase { name, spec, query_label: "A".into(), query_frame, config: corpus_config() }
}

/// Identity A present for the first 10 frames, then absent for `absent`
/// frames, then present again until the end.
pub fn absence_case(absent: usize, skip_frames: usize, seed: u64) -> CorpusCase {
    let back = 10 + absent;
    let s = spec(
        back + 40,
        seed,
        vec![ident("A", 1, vec![seg(0, 9, 20, 20, [0.0, 0.0]), seg(back, back + 39, 60, 40, [0.0, 0.0])])],
        vec![cut(10), cut(back)],
    );
    let mut c = case("long_absence", s, 0);
    c.config.skip_frames = skip_frames;
    c
}

pub fn corpus() -> Vec<CorpusCase> {
    let mut cases = vec![
        case("static", spec(300, 11, vec![ident("A", 1, vec![seg(0, 299, 40, 30, [0.0, 0.0])])], vec![]), 10),
        case(
            "linear_motion",
            spec(200, 12, vec![ident("A", 2, vec![seg(0, 199, 4, 10, [0.4, 0.2])])], vec![]),
            5,
        ),
        case(
            "cut_and_return",
            spec(
                300,
                13,
                vec![ident("A", 3, vec![seg(0, 99, 20, 20, [0.0, 0.0]), seg(200, 299, 70, 40, [0.0, 0.0])])],
                vec![cut(100), cut(200)],
            ),
            10,
        ),
        case(
            "occlusion",
            spec(
                300,
                14,
                vec![ident("A", 4, vec![seg(0, 299, 48, 32, [0.0, 0.0])])],
                vec![occlude(80, "A", true), occlude(150, "A", false)],
            ),
            10,
        ),
        case(
            "distractor",
            spec(
                250,
                15,
                vec![
                    ident("A", 5, vec![seg(0, 249, 10, 10, [0.1, 0.0])]),
                    ident("B", 6, vec![seg(0, 249, 80, 50, [-0.1, 0.0])]),
                ],
                vec![],
            ),
            0,
        ),
        case(
            "swap_after_cut",
            spec(
                300,
                16,
                vec![
                    ident("A", 7, vec![seg(0, 119, 40, 30, [0.0, 0.0]), seg(230, 299, 80, 10, [0.0, 0.0])]),
                    ident("B", 8, vec![seg(120, 299, 40, 30, [0.0, 0.0])]),
                ],
                vec![cut(120)],
            ),
            20,
        ),
        case(
            "reappear_among_distractors",
            spec(
                400,
                17,
                vec![
                    ident("A", 9, vec![seg(0, 99, 10, 50, [0.0, 0.0]), seg(250, 399, 90, 10, [-0.2, 0.1])]),
                    ident("B", 10, vec![seg(100, 399, 10, 50, [0.0, 0.0])]),
                    ident("C", 11, vec![seg(150, 399, 50, 10, [0.0, 0.2])]),
                ],
                vec![cut(100), cut(250)],
            ),
            10,
        ),
        case(
            "fast_motion",
            spec(150, 18, vec![ident("A", 12, vec![seg(0, 149, 2, 30, [0.6, 0.0])])], vec![]),
            0,
        ),
        case(
            "flicker",
            spec(
                300,
                19,
                vec![ident("A", 13, vec![seg(0, 299, 30, 30, [0.0, 0.0])])],
                (0..5).flat_map(|k| [occlude(40 + 50 * k, "A", true), occlude(60 + 50 * k, "A", false)]).collect(),
            ),
            5,
        ),
        case(
            "late_query",
            spec(
                600,
                20,
                vec![
                    ident("A", 14, vec![seg(300, 599, 60, 20, [0.0, 0.05])]),
                    ident("B", 15, vec![seg(0, 599, 10, 50, [0.0, 0.0])]),
                ],
                vec![cut(300), cut(450)],
            ),
            305,
        ),
    ];

    let mut periodic = case(
        "periodic_checks",
        spec(
            240,
            21,
            vec![ident("A", 16, vec![seg(0, 239, 20, 20, [0.2, 0.1])])],
            vec![occlude(100, "A", true), occlude(130, "A", false)],
        ),
        0,
    );
    periodic.config.periodic_verify_interval = Some(25);
    cases.push(periodic);

    let mut short_skip = case(
        "short_skip",
        spec(
            300,
            22,
            vec![ident("A", 17, vec![seg(0, 79, 20, 20, [0.0, 0.0]), seg(143, 299, 60, 50, [0.0, 0.0])])],
            vec![cut(80), cut(143)],
        ),
        0,
    );
    short_skip.config.skip_frames = 10;
    cases.push(short_skip);

    cases.push(absence_case(240, 60, 23));
    cases
}
