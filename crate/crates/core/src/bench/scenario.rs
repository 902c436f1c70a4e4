//! Scripted synthetic videos: textured identities moving linearly over a
//! noise background, with hard cuts and occlusions, plus exact ground truth.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::truth::{GroundTruth, TruthEntry};
use crate::domain::{BoundingBox, RgbImage};
use crate::seeding::{hash_str, mix_seed};
use crate::videoio::MemoryVideo;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("InvalidSpec at {path}: {reason}")]
pub struct InvalidSpec {
    pub path: String,
    pub reason: String,
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> InvalidSpec {
    InvalidSpec { path: path.into(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub duration_frames: usize,
    /// `[width, height]` in pixels.
    pub dimensions: [u32; 2],
    pub frame_rate: f64,
    pub identities: Vec<IdentitySpec>,
    #[serde(default)]
    pub events: Vec<ScenarioEvent>,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitySpec {
    pub label: String,
    pub segments: Vec<MotionSegment>,
    pub appearance_seed: u64,
}

/// The identity is on screen for frames `start..=end`, its box moving by
/// `velocity` pixels per frame from `start_box`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSegment {
    pub start: usize,
    pub end: usize,
    pub start_box: BoundingBox,
    #[serde(default)]
    pub velocity: [f64; 2],
}

impl MotionSegment {
    pub fn contains(&self, frame: usize) -> bool {
        (self.start..=self.end).contains(&frame)
    }

    /// Unclamped box at `frame` (positions rounded to the nearest pixel).
    pub fn box_at(&self, frame: usize) -> BoundingBox {
        let t = frame as f64 - self.start as f64;
        self.start_box.translate((self.velocity[0] * t).round() as i32, (self.velocity[1] * t).round() as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub frame: usize,
    #[serde(flatten)]
    pub kind: ScenarioEventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioEventKind {
    /// Switches to a new background texture from this frame on.
    HardCut,
    /// The identity is painted over by a gray block from this frame on.
    OcclusionStart { label: String },
    OcclusionEnd { label: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub detector_miss: f64,
    /// Maximum detector box offset in pixels.
    pub detector_jitter: u32,
    /// Relative norm of the synthetic embedder noise.
    pub embed_sigma: f64,
    /// Amplitude of uniform per-pixel sensor noise added to every frame.
    pub pixel_noise: u8,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { detector_miss: 0.0, detector_jitter: 0, embed_sigma: 0.0, pixel_noise: 0 }
    }
}

const OCCLUDER_GRAY: [u8; 3] = [128, 128, 128];
const TEXTURE_CELLS: u32 = 8;
const MIN_IDENTITY_SIDE: u32 = 8;

impl ScenarioSpec {
    pub fn width(&self) -> u32 {
        self.dimensions[0]
    }

    pub fn height(&self) -> u32 {
        self.dimensions[1]
    }

    pub fn identity(&self, label: &str) -> Option<&IdentitySpec> {
        self.identities.iter().find(|i| i.label == label)
    }

    pub fn validate(&self) -> Result<(), InvalidSpec> {
        if self.duration_frames == 0 {
            return Err(invalid("duration_frames", "must be positive"));
        }
        if self.width() == 0 || self.height() == 0 {
            return Err(invalid("dimensions", "width and height must be positive"));
        }
        if !(self.frame_rate > 0.0) {
            return Err(invalid("frame_rate", "must be positive"));
        }
        let n = &self.noise;
        if !(0.0..=1.0).contains(&n.detector_miss) {
            return Err(invalid("noise.detector_miss", "must be a probability"));
        }
        if !(n.embed_sigma >= 0.0) {
            return Err(invalid("noise.embed_sigma", "must be non-negative"));
        }
        let mut labels = HashSet::new();
        for identity in &self.identities {
            let base = format!("identities[{:?}]", identity.label);
            if !labels.insert(identity.label.as_str()) {
                return Err(invalid(base, "duplicate label"));
            }
            let mut spans: Vec<(usize, usize)> = Vec::new();
            for (si, seg) in identity.segments.iter().enumerate() {
                let path = format!("{base}.segments[{si}]");
                if seg.start > seg.end {
                    return Err(invalid(format!("{path}.start"), "start exceeds end"));
                }
                if seg.end >= self.duration_frames {
                    return Err(invalid(
                        format!("{path}.end"),
                        format!("frame {} outside [0, {})", seg.end, self.duration_frames),
                    ));
                }
                if seg.start_box.w < MIN_IDENTITY_SIDE || seg.start_box.h < MIN_IDENTITY_SIDE {
                    return Err(invalid(format!("{path}.start_box"), format!("sides must be at least {MIN_IDENTITY_SIDE} px")));
                }
                if spans.iter().any(|&(s, e)| seg.start <= e && s <= seg.end) {
                    return Err(invalid(path, "overlaps another segment of the same identity"));
                }
                spans.push((seg.start, seg.end));
                for f in seg.start..=seg.end {
                    let b = seg.box_at(f);
                    let inside = b.clamp_to(self.width(), self.height()).map_or(0, |c| c.area());
                    if inside * 2 < b.area() {
                        return Err(invalid(
                            format!("{path}.velocity"),
                            format!("box {b:?} at frame {f} is less than half inside the frame"),
                        ));
                    }
                }
            }
        }
        for (ei, ev) in self.events.iter().enumerate() {
            if ev.frame >= self.duration_frames {
                return Err(invalid(format!("events[{ei}].frame"), "outside the video"));
            }
            if let ScenarioEventKind::OcclusionStart { label } | ScenarioEventKind::OcclusionEnd { label } = &ev.kind {
                if !labels.contains(label.as_str()) {
                    return Err(invalid(format!("events[{ei}].label"), format!("unknown identity {label:?}")));
                }
            }
        }
        Ok(())
    }

    fn sorted_events(&self) -> Vec<&ScenarioEvent> {
        let mut ev: Vec<_> = self.events.iter().collect();
        ev.sort_by_key(|e| e.frame);
        ev
    }

    pub fn occluded(&self, label: &str, frame: usize) -> bool {
        let mut state = false;
        for ev in self.sorted_events().into_iter().take_while(|e| e.frame <= frame) {
            match &ev.kind {
                ScenarioEventKind::OcclusionStart { label: l } if l == label => state = true,
                ScenarioEventKind::OcclusionEnd { label: l } if l == label => state = false,
                _ => {}
            }
        }
        state
    }

    pub fn cut_epoch(&self, frame: usize) -> usize {
        self.events
            .iter()
            .filter(|e| e.frame <= frame && e.kind == ScenarioEventKind::HardCut)
            .count()
    }

    /// Ground truth implied by the spec's geometry alone.
    pub fn ground_truth(&self) -> GroundTruth {
        let mut truth = GroundTruth::default();
        for f in 0..self.duration_frames {
            for identity in &self.identities {
                if let Some(seg) = identity.segments.iter().find(|s| s.contains(f)) {
                    if let Some(b) = seg.box_at(f).clamp_to(self.width(), self.height()) {
                        truth.push(
                            f,
                            TruthEntry { label: identity.label.clone(), bbox: b, visible: !self.occluded(&identity.label, f) },
                        );
                    }
                }
            }
        }
        truth.ensure_frames(self.duration_frames);
        truth
    }
}

/// Seeded 8x8-cell color pattern for an identity, rendered at `w` x `h`.
pub fn identity_texture(spec: &ScenarioSpec, identity: &IdentitySpec, w: u32, h: u32) -> RgbImage {
    let seed = mix_seed(mix_seed(spec.seed, identity.appearance_seed), hash_str(&identity.label));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: Vec<[u8; 3]> = (0..TEXTURE_CELLS * TEXTURE_CELLS)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();
    let mut img = RgbImage::filled(w, h, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            let (cx, cy) = (x * TEXTURE_CELLS / w, y * TEXTURE_CELLS / h);
            img.put_pixel(x, y, cells[(cy * TEXTURE_CELLS + cx) as usize]);
        }
    }
    img
}

fn background(spec: &ScenarioSpec, epoch: usize) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0xB6 + epoch as u64));
    let (w, h) = (spec.width(), spec.height());
    let bw = w.div_ceil(2);
    let blocks: Vec<[u8; 3]> = (0..bw * h.div_ceil(2))
        .map(|_| [rng.random_range(40..=215), rng.random_range(40..=215), rng.random_range(40..=215)])
        .collect();
    let mut img = RgbImage::filled(w, h, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            img.put_pixel(x, y, blocks[((y / 2) * bw + x / 2) as usize]);
        }
    }
    img
}

pub struct Scenario {
    pub video: MemoryVideo,
    pub truth: GroundTruth,
}

pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario, InvalidSpec> {
    spec.validate()?;
    let truth = spec.ground_truth();
    let max_epoch = spec.cut_epoch(spec.duration_frames);
    let backgrounds: Vec<RgbImage> = (0..=max_epoch).map(|e| background(spec, e)).collect();
    let mut frames = Vec::with_capacity(spec.duration_frames);
    for f in 0..spec.duration_frames {
        let mut img = backgrounds[spec.cut_epoch(f)].clone();
        for identity in &spec.identities {
            let Some(seg) = identity.segments.iter().find(|s| s.contains(f)) else {
                continue;
            };
            let b = seg.box_at(f);
            if spec.occluded(&identity.label, f) {
                img.fill_box(&b, OCCLUDER_GRAY);
            } else {
                img.paste(&identity_texture(spec, identity, b.w, b.h), b.x, b.y);
            }
        }
        let a = spec.noise.pixel_noise as i16;
        if a > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed ^ 0x9157, f as u64));
            for v in img.as_raw_mut() {
                *v = (*v as i16 + rng.random_range(-a..=a)).clamp(0, 255) as u8;
            }
        }
        frames.push(img);
    }
    let video = MemoryVideo::new(frames, spec.frame_rate).map_err(|e| invalid("duration_frames", e.to_string()))?;
    Ok(Scenario { video, truth })
}

/// Each identity's texture at the size of its first segment's box.
pub fn reference_gallery(spec: &ScenarioSpec) -> Vec<(String, RgbImage)> {
    spec.identities
        .iter()
        .filter_map(|identity| {
            let b = identity.segments.first()?.start_box;
            Some((identity.label.clone(), identity_texture(spec, identity, b.w, b.h)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::videoio::VideoSource;

    fn one(seg: MotionSegment) -> ScenarioSpec {
        ScenarioSpec {
            duration_frames: 100,
            dimensions: [128, 96],
            frame_rate: 29.0,
            identities: vec![IdentitySpec { label: "A".into(), segments: vec![seg], appearance_seed: 1 }],
            events: vec![],
            noise: NoiseSpec::default(),
            seed: 5,
        }
    }

    #[test]
    fn static_identity_box_every_frame() {
        let b = BoundingBox::new(20, 20, 32, 32);
        let spec = one(MotionSegment { start: 0, end: 99, start_box: b, velocity: [0.0, 0.0] });
        let s = generate_scenario(&spec).unwrap();
        assert_eq!(s.video.frame_count(), 100);
        for f in 0..100 {
            assert_eq!(s.truth.visible_box(f, "A"), Some(b));
        }
    }

    #[test]
    fn linear_motion() {
        let spec = one(MotionSegment { start: 0, end: 60, start_box: BoundingBox::new(10, 10, 32, 32), velocity: [1.0, 0.0] });
        let truth = generate_scenario(&spec).unwrap().truth;
        assert_eq!(truth.visible_box(50, "A"), Some(BoundingBox::new(60, 10, 32, 32)));
    }

    #[test]
    fn deterministic_and_seed_changes_texture_only() {
        let spec = one(MotionSegment { start: 5, end: 80, start_box: BoundingBox::new(10, 10, 32, 32), velocity: [0.5, 0.25] });
        let a = generate_scenario(&spec).unwrap();
        let b = generate_scenario(&spec).unwrap();
        assert_eq!(a.video.frames(), b.video.frames());
        let other = ScenarioSpec { seed: 6, ..spec.clone() };
        let c = generate_scenario(&other).unwrap();
        assert_eq!(a.truth, c.truth);
        assert_ne!(a.video.frames(), c.video.frames());
    }

    #[test]
    fn occlusion_paints_gray_and_hides() {
        let mut spec = one(MotionSegment { start: 0, end: 99, start_box: BoundingBox::new(20, 20, 32, 32), velocity: [0.0, 0.0] });
        spec.events = vec![
            ScenarioEvent { frame: 30, kind: ScenarioEventKind::OcclusionStart { label: "A".into() } },
            ScenarioEvent { frame: 40, kind: ScenarioEventKind::OcclusionEnd { label: "A".into() } },
        ];
        let s = generate_scenario(&spec).unwrap();
        assert!(s.truth.visible_box(29, "A").is_some());
        assert!(s.truth.visible_box(30, "A").is_none());
        assert!(!s.truth.entries(35)[0].visible);
        assert!(s.truth.visible_box(40, "A").is_some());
        assert_eq!(s.video.frames()[35].pixel(30, 30), OCCLUDER_GRAY);
    }

    #[test]
    fn hard_cut_changes_background() {
        let mut spec = one(MotionSegment { start: 0, end: 10, start_box: BoundingBox::new(20, 20, 32, 32), velocity: [0.0, 0.0] });
        spec.events = vec![ScenarioEvent { frame: 50, kind: ScenarioEventKind::HardCut }];
        let s = generate_scenario(&spec).unwrap();
        assert_eq!(s.video.frames()[48], s.video.frames()[49]);
        assert_ne!(s.video.frames()[49], s.video.frames()[50]);
    }

    #[test]
    fn validation_names_offending_field() {
        let spec = one(MotionSegment { start: 0, end: 100, start_box: BoundingBox::new(20, 20, 32, 32), velocity: [0.0, 0.0] });
        let err = spec.validate().unwrap_err();
        assert_eq!(err.path, "identities[\"A\"].segments[0].end");
        let spec = one(MotionSegment { start: 0, end: 99, start_box: BoundingBox::new(20, 20, 32, 32), velocity: [2.0, 0.0] });
        assert!(spec.validate().unwrap_err().path.ends_with("velocity"));
    }

    #[test]
    fn spec_json_round_trip() {
        let mut spec = one(MotionSegment { start: 0, end: 9, start_box: BoundingBox::new(1, 2, 32, 32), velocity: [0.5, -0.25] });
        spec.events = vec![
            ScenarioEvent { frame: 3, kind: ScenarioEventKind::HardCut },
            ScenarioEvent { frame: 4, kind: ScenarioEventKind::OcclusionStart { label: "A".into() } },
        ];
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains(r#"{"frame":3,"kind":"hard_cut"}"#));
        let back: ScenarioSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
