//! Domain types shared across the pipeline: boxes, images, frames,
//! embeddings and the engine configuration, plus the elementary geometry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("EmptyCrop: box {0:?} does not intersect the {1}x{2} frame")]
    EmptyCrop(BoundingBox, u32, u32),
    #[error("invalid box [{0}, {1}, {2}, {3}]: width and height must be positive")]
    InvalidBox(i64, i64, i64, i64),
    #[error("pixel buffer of length {len} does not match {width}x{height}x3")]
    BufferSize { width: u32, height: u32, len: usize },
    #[error("image dimensions must be at least 1x1, got {0}x{1}")]
    ZeroDimension(u32, u32),
    #[error("invalid engine config: {0}")]
    InvalidConfig(String),
}

/// Axis-aligned pixel rectangle. `(x, y)` is the top-left corner; the right
/// and bottom edges (`x + w`, `y + h`) are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[i64; 4]")]
pub struct BoundingBox {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl TryFrom<[i64; 4]> for BoundingBox {
    type Error = DomainError;

    fn try_from([x, y, w, h]: [i64; 4]) -> Result<Self, Self::Error> {
        let invalid = || DomainError::InvalidBox(x, y, w, h);
        if w <= 0 || h <= 0 {
            return Err(invalid());
        }
        Ok(BoundingBox {
            x: i32::try_from(x).map_err(|_| invalid())?,
            y: i32::try_from(y).map_err(|_| invalid())?,
            w: u32::try_from(w).map_err(|_| invalid())?,
            h: u32::try_from(h).map_err(|_| invalid())?,
        })
    }
}

impl From<BoundingBox> for [i64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x as i64, b.y as i64, b.w as i64, b.h as i64]
    }
}

impl BoundingBox {
    /// Panics when `w` or `h` is not positive; use [`BoundingBox::try_new`]
    /// for untrusted input.
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Self {
        Self::try_new(x, y, w, h).expect("bounding box must have positive width and height")
    }

    pub fn try_new(x: i32, y: i32, w: u32, h: u32) -> Result<Self, DomainError> {
        if w == 0 || h == 0 {
            return Err(DomainError::InvalidBox(x as i64, y as i64, w as i64, h as i64));
        }
        Ok(BoundingBox { x, y, w, h })
    }

    pub fn right(&self) -> i64 {
        self.x as i64 + self.w as i64
    }

    pub fn bottom(&self) -> i64 {
        self.y as i64 + self.h as i64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    pub fn diagonal(&self) -> f64 {
        (self.w as f64).hypot(self.h as f64)
    }

    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x as f64 && px < self.right() as f64 && py >= self.y as f64 && py < self.bottom() as f64
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x0 = (self.x as i64).max(other.x as i64);
        let y0 = (self.y as i64).max(other.y as i64);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| BoundingBox {
            x: x0 as i32,
            y: y0 as i32,
            w: (x1 - x0) as u32,
            h: (y1 - y0) as u32,
        })
    }

    /// The part of the box inside a `width` x `height` frame.
    pub fn clamp_to(&self, width: u32, height: u32) -> Option<BoundingBox> {
        self.intersection(&BoundingBox { x: 0, y: 0, w: width, h: height })
    }

    pub fn translate(&self, dx: i32, dy: i32) -> BoundingBox {
        BoundingBox { x: self.x + dx, y: self.y + dy, ..*self }
    }

    /// Same center, both sides multiplied by `factor` (rounded, at least 1 px).
    pub fn scale_about_center(&self, factor: f64) -> BoundingBox {
        let (cx, cy) = self.center();
        let w = ((self.w as f64 * factor).round() as u32).max(1);
        let h = ((self.h as f64 * factor).round() as u32).max(1);
        BoundingBox {
            x: (cx - w as f64 / 2.0).round() as i32,
            y: (cy - h as f64 / 2.0).round() as i32,
            w,
            h,
        }
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection(b).map_or(0, |i| i.area());
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Euclidean distance between box centers divided by the diagonal of
/// `normalize_by`.
pub fn center_distance(a: &BoundingBox, b: &BoundingBox, normalize_by: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by) / normalize_by.diagonal()
}

/// Row-major interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, DomainError> {
        if width == 0 || height == 0 {
            return Err(DomainError::ZeroDimension(width, height));
        }
        if data.len() != width as usize * height as usize * 3 {
            return Err(DomainError::BufferSize { width, height, len: data.len() });
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        RgbImage { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn as_raw_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn put_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn bounds(&self) -> BoundingBox {
        BoundingBox::new(0, 0, self.width, self.height)
    }

    /// Copies `src` with its top-left corner at `(x, y)`; parts falling
    /// outside this image are dropped.
    pub fn paste(&mut self, src: &RgbImage, x: i32, y: i32) {
        let target = BoundingBox::new(x, y, src.width, src.height);
        let Some(visible) = target.clamp_to(self.width, self.height) else {
            return;
        };
        let sx0 = (visible.x - x) as usize;
        let sy0 = (visible.y - y) as usize;
        let row_len = visible.w as usize * 3;
        for row in 0..visible.h as usize {
            let s = ((sy0 + row) * src.width as usize + sx0) * 3;
            let d = self.offset(visible.x as u32, visible.y as u32 + row as u32);
            self.data[d..d + row_len].copy_from_slice(&src.data[s..s + row_len]);
        }
    }

    pub fn fill_box(&mut self, b: &BoundingBox, rgb: [u8; 3]) {
        if let Some(v) = b.clamp_to(self.width, self.height) {
            for y in v.y as u32..v.bottom() as u32 {
                for x in v.x as u32..v.right() as u32 {
                    self.put_pixel(x, y, rgb);
                }
            }
        }
    }

    /// Luma (0.299 R + 0.587 G + 0.114 B) per pixel.
    pub fn to_luma(&self) -> Vec<f32> {
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32)
            .collect()
    }
}

/// One decoded video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub timestamp_s: f64,
    pub image: RgbImage,
}

impl Frame {
    pub fn new(index: usize, frame_rate: f64, image: RgbImage) -> Self {
        Frame { index, timestamp_s: index as f64 / frame_rate, image }
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }
}

/// Sub-image of `frame` under `bbox`, clamped to the frame bounds.
pub fn crop(frame: &Frame, bbox: &BoundingBox) -> Result<RgbImage, DomainError> {
    crop_image(&frame.image, bbox)
}

pub fn crop_image(image: &RgbImage, bbox: &BoundingBox) -> Result<RgbImage, DomainError> {
    let v = bbox
        .clamp_to(image.width(), image.height())
        .ok_or(DomainError::EmptyCrop(*bbox, image.width(), image.height()))?;
    let row_len = v.w as usize * 3;
    let mut data = Vec::with_capacity(row_len * v.h as usize);
    for y in v.y as u32..v.bottom() as u32 {
        let o = image.offset(v.x as u32, y);
        data.extend_from_slice(&image.as_raw()[o..o + row_len]);
    }
    RgbImage::from_raw(v.w, v.h, data)
}

/// Feature vector produced by an embedder backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
}

pub const DEFAULT_EMBEDDING_DIM: usize = 4096;

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Embedding { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Parameters of the short-term patch tracker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub grid_rows: u32,
    pub grid_cols: u32,
    /// Per-patch search window half-width in pixels.
    pub search_radius: u32,
    /// Weight of the previous reliability in the moving average.
    pub reliability_ema: f64,
    pub refresh_threshold: f64,
    /// Below this confidence the tracker reports the target as lost.
    pub loss_confidence: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            grid_rows: 3,
            grid_cols: 3,
            search_radius: 16,
            reliability_ema: 0.7,
            refresh_threshold: 0.8,
            loss_confidence: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Cosine score a candidate must strictly exceed to be accepted.
    pub similarity_threshold: f64,
    /// Center displacement between consecutive tracked boxes, in units of
    /// the previous box diagonal, above which tracking is interrupted.
    pub distance_threshold: f64,
    pub skip_frames: usize,
    pub bootstrap_frames: usize,
    pub frame_rate: f64,
    /// Size of the localized detection window relative to the last box.
    pub search_region_scale: f64,
    pub periodic_verify_interval: Option<usize>,
    pub tracker: TrackerConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            similarity_threshold: 0.70,
            distance_threshold: 0.25,
            skip_frames: 60,
            bootstrap_frames: 5,
            frame_rate: 29.0,
            search_region_scale: 3.0,
            periodic_verify_interval: None,
            tracker: TrackerConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |msg: &str| Err(DomainError::InvalidConfig(msg.to_string()));
        if !(self.similarity_threshold > -1.0 && self.similarity_threshold <= 1.0) {
            return bad("similarity_threshold must lie in (-1, 1]");
        }
        if !(self.distance_threshold > 0.0) {
            return bad("distance_threshold must be positive");
        }
        if self.skip_frames == 0 {
            return bad("skip_frames must be positive");
        }
        if self.bootstrap_frames == 0 {
            return bad("bootstrap_frames must be positive");
        }
        if !(self.frame_rate > 0.0) {
            return bad("frame_rate must be positive");
        }
        if !(self.search_region_scale >= 1.0) {
            return bad("search_region_scale must be at least 1");
        }
        if self.periodic_verify_interval == Some(0) {
            return bad("periodic_verify_interval must be positive when set");
        }
        let t = &self.tracker;
        if t.grid_rows == 0 || t.grid_cols == 0 {
            return bad("tracker grid must have at least one row and column");
        }
        if !(0.0..=1.0).contains(&t.reliability_ema) || !(0.0..=1.0).contains(&t.loss_confidence) {
            return bad("tracker reliability_ema and loss_confidence must lie in [0, 1]");
        }
        Ok(())
    }
}
