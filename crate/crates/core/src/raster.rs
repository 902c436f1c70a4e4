//! Grayscale rasters, bilinear resampling and normalized cross-correlation
//! shared by the template detector and the patch tracker.

use crate::domain::{BoundingBox, RgbImage};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn from_rgb(image: &RgbImage) -> Self {
        GrayImage {
            width: image.width() as usize,
            height: image.height() as usize,
            data: image.to_luma(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Copies the `w` x `h` window at `(x, y)`; the window must lie inside.
    pub fn window(&self, x: usize, y: usize, w: usize, h: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(w * h);
        for row in y..y + h {
            out.extend_from_slice(&self.data[row * self.width + x..row * self.width + x + w]);
        }
        out
    }

    pub fn resize(&self, w: usize, h: usize) -> GrayImage {
        GrayImage {
            width: w,
            height: h,
            data: resize_bilinear(&self.data, self.width, self.height, 1, w, h),
        }
    }
}

/// Bilinear resampling of an interleaved `channels`-channel raster, using
/// pixel-center alignment (a same-size resize is the identity).
pub fn resize_bilinear(src: &[f32], sw: usize, sh: usize, channels: usize, dw: usize, dh: usize) -> Vec<f32> {
    assert_eq!(src.len(), sw * sh * channels);
    let mut out = vec![0f32; dw * dh * channels];
    let sx = sw as f64 / dw as f64;
    let sy = sh as f64 / dh as f64;
    let axis = |d: usize, scale: f64, n: usize| {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, (s - i0 as f64) as f32)
    };
    let xs: Vec<_> = (0..dw).map(|x| axis(x, sx, sw)).collect();
    for y in 0..dh {
        let (y0, y1, fy) = axis(y, sy, sh);
        for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
            for c in 0..channels {
                let p = |xx: usize, yy: usize| src[(yy * sw + xx) * channels + c];
                let top = p(x0, y0) + (p(x1, y0) - p(x0, y0)) * fx;
                let bottom = p(x0, y1) + (p(x1, y1) - p(x0, y1)) * fx;
                out[(y * dw + x) * channels + c] = top + (bottom - top) * fy;
            }
        }
    }
    out
}

/// Summed-area tables of pixel values and squared values.
pub struct IntegralImage {
    stride: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl IntegralImage {
    pub fn new(img: &GrayImage) -> Self {
        let stride = img.width + 1;
        let mut sum = vec![0f64; stride * (img.height + 1)];
        let mut sq = vec![0f64; stride * (img.height + 1)];
        for y in 0..img.height {
            let (mut rs, mut rq) = (0f64, 0f64);
            for x in 0..img.width {
                let v = img.get(x, y) as f64;
                rs += v;
                rq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + rs;
                sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + rq;
            }
        }
        IntegralImage { stride, sum, sq }
    }

    fn rect(table: &[f64], stride: usize, x: usize, y: usize, w: usize, h: usize) -> f64 {
        table[(y + h) * stride + x + w] - table[y * stride + x + w] - table[(y + h) * stride + x]
            + table[y * stride + x]
    }

    pub fn window_stats(&self, x: usize, y: usize, w: usize, h: usize) -> (f64, f64) {
        (
            Self::rect(&self.sum, self.stride, x, y, w, h),
            Self::rect(&self.sq, self.stride, x, y, w, h),
        )
    }
}

/// A grayscale template prepared for zero-mean normalized cross-correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
    centered: Vec<f64>,
    norm: f64,
}

const FLAT_EPS: f64 = 1e-6;

impl Template {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Self {
        assert_eq!(pixels.len(), width * height);
        let mean = pixels.iter().map(|&v| v as f64).sum::<f64>() / pixels.len() as f64;
        let centered: Vec<f64> = pixels.iter().map(|&v| v as f64 - mean).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        Template { width, height, pixels, centered, norm }
    }

    pub fn from_image(img: &GrayImage) -> Self {
        Template::new(img.width, img.height, img.data.clone())
    }

    /// True when the template has (numerically) no intensity variation, in
    /// which case every correlation is defined as 0.
    pub fn is_flat(&self) -> bool {
        self.norm * self.norm / (self.width * self.height) as f64 <= FLAT_EPS
    }

    /// Zero-mean NCC of the template against the window at `(x, y)`. Flat
    /// windows or templates score 0.
    pub fn ncc_at(&self, img: &GrayImage, integral: &IntegralImage, x: usize, y: usize) -> f64 {
        if self.is_flat() {
            return 0.0;
        }
        let n = (self.width * self.height) as f64;
        let (s, sq) = integral.window_stats(x, y, self.width, self.height);
        let var = sq - s * s / n;
        if var / n <= FLAT_EPS {
            return 0.0;
        }
        let mut dot = 0f64;
        for row in 0..self.height {
            let base = (y + row) * img.width + x;
            let img_row = &img.data[base..base + self.width];
            let t_row = &self.centered[row * self.width..(row + 1) * self.width];
            dot += img_row.iter().zip(t_row).map(|(&a, &b)| a as f64 * b).sum::<f64>();
        }
        (dot / (self.norm * var.sqrt())).clamp(-1.0, 1.0)
    }
}

/// Top-left positions at which a `tw` x `th` template fits inside `img`
/// with its center in `region` (whole image when `None`).
pub fn placements(
    img_w: usize,
    img_h: usize,
    tw: usize,
    th: usize,
    region: Option<&BoundingBox>,
) -> impl Iterator<Item = (usize, usize)> {
    let max_x = img_w.checked_sub(tw);
    let max_y = img_h.checked_sub(th);
    let region = region.copied();
    let (xs, ys) = match (max_x, max_y) {
        (Some(mx), Some(my)) => (0..=mx, 0..=my),
        #[allow(clippy::reversed_empty_ranges)]
        _ => (1..=0, 1..=0),
    };
    ys.flat_map(move |y| xs.clone().map(move |x| (x, y))).filter(move |&(x, y)| {
        region.is_none_or(|r| r.contains_point(x as f64 + tw as f64 / 2.0, y as f64 + th as f64 / 2.0))
    })
}
