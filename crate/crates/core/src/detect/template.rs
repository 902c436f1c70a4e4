use serde::{Deserialize, Serialize};

use super::{non_max_suppression, DetectError, Detection, DetectorBackend};
use crate::domain::{BoundingBox, Frame, RgbImage};
use crate::raster::{placements, GrayImage, IntegralImage, Template};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateDetectorParams {
    pub ncc_threshold: f64,
    pub nms_iou: f64,
    /// Template scale factors searched at every frame.
    pub scales: Vec<f64>,
}

impl Default for TemplateDetectorParams {
    fn default() -> Self {
        TemplateDetectorParams { ncc_threshold: 0.8, nms_iou: 0.3, scales: vec![1.0] }
    }
}

/// Multi-scale NCC matching of a gallery of face templates, followed by
/// greedy non-maximum suppression.
#[derive(Debug, Clone)]
pub struct TemplateDetector {
    templates: Vec<Template>,
    params: TemplateDetectorParams,
}

impl TemplateDetector {
    pub fn new(gallery: &[RgbImage], params: TemplateDetectorParams) -> Result<Self, DetectError> {
        if gallery.is_empty() {
            return Err(DetectError::BackendFailure("template gallery is empty".into()));
        }
        if params.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(DetectError::BackendFailure("template scales must be positive".into()));
        }
        let mut templates = Vec::new();
        for img in gallery {
            let gray = GrayImage::from_rgb(img);
            for &s in &params.scales {
                let w = ((gray.width as f64 * s).round() as usize).max(2);
                let h = ((gray.height as f64 * s).round() as usize).max(2);
                templates.push(Template::from_image(&gray.resize(w, h)));
            }
        }
        Ok(TemplateDetector { templates, params })
    }
}

impl DetectorBackend for TemplateDetector {
    fn name(&self) -> &str {
        "template"
    }

    fn supports_region_restriction(&self) -> bool {
        true
    }

    fn detect(&self, frame: &Frame, region: Option<&BoundingBox>) -> Result<Vec<Detection>, DetectError> {
        let gray = GrayImage::from_rgb(&frame.image);
        let integral = IntegralImage::new(&gray);
        let mut candidates = Vec::new();
        for t in &self.templates {
            for (x, y) in placements(gray.width, gray.height, t.width, t.height, region) {
                let score = t.ncc_at(&gray, &integral, x, y);
                if score >= self.params.ncc_threshold {
                    candidates.push(Detection {
                        bbox: BoundingBox::new(x as i32, y as i32, t.width as u32, t.height as u32),
                        score,
                    });
                }
            }
        }
        Ok(non_max_suppression(candidates, self.params.nms_iou))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::detect_all_faces;
    use crate::domain::iou;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_image(w: u32, h: u32, seed: u64, lo: u8, hi: u8) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h * 3).map(|_| rng.random_range(lo..=hi)).collect();
        RgbImage::from_raw(w, h, data).unwrap()
    }

    #[test]
    fn finds_exact_pasted_template() {
        let face = noise_image(24, 24, 1, 0, 255);
        let mut canvas = noise_image(96, 80, 2, 90, 160);
        canvas.paste(&face, 41, 17);
        let det = TemplateDetector::new(&[face], TemplateDetectorParams::default()).unwrap();
        let frame = Frame::new(0, 29.0, canvas);
        let got = detect_all_faces(&det, &frame, None).unwrap();
        assert!(!got.is_empty());
        assert_eq!(iou(&got[0].bbox, &BoundingBox::new(41, 17, 24, 24)), 1.0);
        assert!((got[0].score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn region_restriction_is_subset() {
        let face = noise_image(16, 16, 3, 0, 255);
        let mut canvas = noise_image(96, 64, 4, 100, 140);
        canvas.paste(&face, 5, 5);
        canvas.paste(&face, 60, 30);
        let det = TemplateDetector::new(&[face], TemplateDetectorParams::default()).unwrap();
        let frame = Frame::new(0, 29.0, canvas);
        let all = detect_all_faces(&det, &frame, None).unwrap();
        assert_eq!(all.len(), 2);
        let region = BoundingBox::new(40, 20, 56, 44);
        let some = detect_all_faces(&det, &frame, Some(&region)).unwrap();
        assert_eq!(some.len(), 1);
        assert!(all.contains(&some[0]));
        assert_eq!(some[0].bbox, BoundingBox::new(60, 30, 16, 16));
    }

    #[test]
    fn background_only_yields_nothing() {
        let face = noise_image(16, 16, 5, 0, 255);
        let det = TemplateDetector::new(&[face], TemplateDetectorParams::default()).unwrap();
        let frame = Frame::new(0, 29.0, noise_image(64, 64, 6, 0, 255));
        assert!(detect_all_faces(&det, &frame, None).unwrap().is_empty());
    }

    #[test]
    fn second_scale_matches_enlarged_face() {
        let face = RgbImage::from_raw(
            8,
            8,
            (0..64).flat_map(|i| if (i / 8 + i % 8) % 2 == 0 { [250, 250, 250] } else { [5, 5, 5] }).collect(),
        )
        .unwrap();
        // nearest-neighbour 2x enlargement of the checkerboard
        let mut big = RgbImage::filled(16, 16, [0, 0, 0]);
        for y in 0..16 {
            for x in 0..16 {
                big.put_pixel(x, y, face.pixel(x / 2, y / 2));
            }
        }
        let mut canvas = RgbImage::filled(64, 64, [128, 128, 128]);
        canvas.paste(&big, 20, 30);
        let params = TemplateDetectorParams { scales: vec![1.0, 2.0], ncc_threshold: 0.7, ..Default::default() };
        let det = TemplateDetector::new(&[face], params).unwrap();
        let got = detect_all_faces(&det, &Frame::new(0, 1.0, canvas), None).unwrap();
        assert!(got.iter().any(|d| iou(&d.bbox, &BoundingBox::new(20, 30, 16, 16)) > 0.8));
    }
}
