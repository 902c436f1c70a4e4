use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DetectError, Detection, DetectorBackend};
use crate::bench::GroundTruth;
use crate::domain::{BoundingBox, Frame};
use crate::seeding::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticDetectorParams {
    /// Probability that a visible face is not reported.
    pub miss_rate: f64,
    /// Maximum absolute box offset in pixels, applied per axis.
    pub jitter: u32,
    /// Probability of one spurious box per frame.
    pub false_positive_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticDetectorParams {
    fn default() -> Self {
        SyntheticDetectorParams { miss_rate: 0.0, jitter: 0, false_positive_rate: 0.0, seed: 0 }
    }
}

/// Detector that reads scenario ground truth and perturbs it with seeded
/// misses, jitter and false positives. Noise depends only on the seed and
/// the frame index.
#[derive(Debug, Clone)]
pub struct SyntheticDetector {
    truth: GroundTruth,
    params: SyntheticDetectorParams,
}

impl SyntheticDetector {
    pub fn new(truth: GroundTruth, params: SyntheticDetectorParams) -> Self {
        SyntheticDetector { truth, params }
    }

    fn noiseless(&self) -> bool {
        self.params.miss_rate == 0.0 && self.params.jitter == 0
    }
}

impl DetectorBackend for SyntheticDetector {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn supports_region_restriction(&self) -> bool {
        true
    }

    fn detect(&self, frame: &Frame, _region: Option<&BoundingBox>) -> Result<Vec<Detection>, DetectError> {
        let (fw, fh) = (frame.width(), frame.height());
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.params.seed, frame.index as u64));
        let mut out = Vec::new();
        for entry in self.truth.entries(frame.index).iter().filter(|e| e.visible) {
            // draw every variate unconditionally so one face's noise does
            // not shift the stream for the next
            let missed = rng.random::<f64>() < self.params.miss_rate;
            let j = self.params.jitter as i32;
            let (dx, dy) = (rng.random_range(-j..=j), rng.random_range(-j..=j));
            let score_draw: f64 = rng.random();
            if missed {
                continue;
            }
            let Some(b) = entry.bbox.translate(dx, dy).clamp_to(fw, fh) else {
                continue;
            };
            let score = if self.noiseless() { 1.0 } else { 1.0 - 0.4 * score_draw };
            out.push(Detection { bbox: b, score });
        }
        if rng.random::<f64>() < self.params.false_positive_rate {
            let size = rng.random_range(16..=48u32).min(fw).min(fh);
            let x = rng.random_range(0..=(fw - size)) as i32;
            let y = rng.random_range(0..=(fh - size)) as i32;
            out.push(Detection { bbox: BoundingBox::new(x, y, size, size), score: rng.random_range(0.3..0.7) });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::TruthEntry;
    use crate::detect::detect_all_faces;
    use crate::domain::RgbImage;

    fn truth() -> GroundTruth {
        let mut t = GroundTruth::default();
        t.push(0, TruthEntry { label: "A".into(), bbox: BoundingBox::new(10, 10, 32, 32), visible: true });
        t.push(0, TruthEntry { label: "B".into(), bbox: BoundingBox::new(80, 60, 32, 32), visible: true });
        t.push(0, TruthEntry { label: "C".into(), bbox: BoundingBox::new(50, 5, 32, 32), visible: false });
        t.push(1, TruthEntry { label: "A".into(), bbox: BoundingBox::new(10, 10, 32, 32), visible: true });
        t.ensure_frames(3);
        t
    }

    fn frame(i: usize) -> Frame {
        Frame::new(i, 29.0, RgbImage::filled(128, 128, [0, 0, 0]))
    }

    #[test]
    fn perfect_detector_returns_visible_truth() {
        let d = SyntheticDetector::new(truth(), SyntheticDetectorParams::default());
        let got = detect_all_faces(&d, &frame(0), None).unwrap();
        assert_eq!(
            got,
            vec![
                Detection { bbox: BoundingBox::new(10, 10, 32, 32), score: 1.0 },
                Detection { bbox: BoundingBox::new(80, 60, 32, 32), score: 1.0 },
            ]
        );
        assert!(detect_all_faces(&d, &frame(2), None).unwrap().is_empty());
    }

    #[test]
    fn region_keeps_only_identity_inside() {
        let d = SyntheticDetector::new(truth(), SyntheticDetectorParams::default());
        let region = BoundingBox::new(0, 0, 60, 60);
        let got = detect_all_faces(&d, &frame(0), Some(&region)).unwrap();
        assert_eq!(got, vec![Detection { bbox: BoundingBox::new(10, 10, 32, 32), score: 1.0 }]);
    }

    #[test]
    fn noisy_detector_is_deterministic_and_bounded() {
        let params = SyntheticDetectorParams { miss_rate: 0.3, jitter: 3, false_positive_rate: 0.5, seed: 11 };
        let d = SyntheticDetector::new(truth(), params);
        for i in 0..3 {
            let a = detect_all_faces(&d, &frame(i), None).unwrap();
            assert_eq!(a, detect_all_faces(&d, &frame(i), None).unwrap());
            assert!(a.iter().all(|x| (0.0..=1.0).contains(&x.score)));
            assert!(a.windows(2).all(|w| w[0].score >= w[1].score));
        }
    }
}
