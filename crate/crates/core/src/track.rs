//! Short-term tracker following a face box with a grid of patches.
//!
//! Each patch is matched independently by normalized cross-correlation in
//! a window around its previous location. The box moves by the
//! reliability-weighted median of the patch displacements, so a minority of
//! occluded or mismatched patches cannot drag it. Scale is fixed for the
//! lifetime of a track.

use thiserror::Error;

use crate::domain::{BoundingBox, DomainError, Frame, TrackerConfig};
use crate::raster::{GrayImage, IntegralImage, Template};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("FrameMismatch: tracker is at frame {state}, got frame {got}")]
    FrameMismatch { state: usize, got: usize },
    #[error("tracker grid must be at least 1x1")]
    EmptyGrid,
}

const MIN_RELIABILITY: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    /// Patch center relative to the box, in `[0, 1]^2`.
    pub offset: (f64, f64),
    pub template: Template,
    pub reliability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub last_box: BoundingBox,
    pub patches: Vec<Patch>,
    pub patch_size: (usize, usize),
    pub frame_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackStep {
    pub bbox: BoundingBox,
    pub confidence: f64,
    /// Confidence fell below the configured loss level.
    pub lost: bool,
}

fn patch_origin(b: &BoundingBox, offset: (f64, f64), size: (usize, usize)) -> (i64, i64) {
    (
        b.x as i64 + (offset.0 * b.w as f64 - size.0 as f64 / 2.0).round() as i64,
        b.y as i64 + (offset.1 * b.h as f64 - size.1 as f64 / 2.0).round() as i64,
    )
}

fn clamp_origin(o: (i64, i64), size: (usize, usize), gray: &GrayImage) -> (usize, usize) {
    (
        o.0.clamp(0, (gray.width - size.0) as i64) as usize,
        o.1.clamp(0, (gray.height - size.1) as i64) as usize,
    )
}

fn extract_templates(gray: &GrayImage, b: &BoundingBox, offsets: &[(f64, f64)], size: (usize, usize)) -> Vec<Template> {
    offsets
        .iter()
        .map(|&off| {
            let (x, y) = clamp_origin(patch_origin(b, off, size), size, gray);
            Template::new(size.0, size.1, gray.window(x, y, size.0, size.1))
        })
        .collect()
}

/// Smallest value whose cumulative weight reaches half the total.
fn weighted_median(mut items: Vec<(i64, f64)>) -> i64 {
    items.sort_by_key(|&(v, _)| v);
    let total: f64 = items.iter().map(|&(_, w)| w).sum();
    let mut acc = 0.0;
    for &(v, w) in &items {
        acc += w;
        if acc >= total / 2.0 {
            return v;
        }
    }
    items.last().map_or(0, |&(v, _)| v)
}

impl TrackerState {
    /// Splits `bbox` (clamped to the frame) into a `rows` x `cols` grid of
    /// equally sized grayscale patch templates, all fully reliable.
    pub fn init(frame: &Frame, bbox: &BoundingBox, rows: u32, cols: u32) -> Result<Self, TrackError> {
        if rows == 0 || cols == 0 {
            return Err(TrackError::EmptyGrid);
        }
        let b = bbox
            .clamp_to(frame.width(), frame.height())
            .ok_or(DomainError::EmptyCrop(*bbox, frame.width(), frame.height()))?;
        let size = (((b.w / cols).max(1)) as usize, ((b.h / rows).max(1)) as usize);
        let offsets: Vec<(f64, f64)> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| ((c as f64 + 0.5) / cols as f64, (r as f64 + 0.5) / rows as f64)))
            .collect();
        let gray = GrayImage::from_rgb(&frame.image);
        let patches = extract_templates(&gray, &b, &offsets, size)
            .into_iter()
            .zip(offsets)
            .map(|(template, offset)| Patch { offset, template, reliability: 1.0 })
            .collect();
        Ok(TrackerState { last_box: b, patches, patch_size: size, frame_index: frame.index })
    }

    pub fn with_config(frame: &Frame, bbox: &BoundingBox, config: &TrackerConfig) -> Result<Self, TrackError> {
        Self::init(frame, bbox, config.grid_rows, config.grid_cols)
    }

    /// Advances the track by one frame.
    pub fn track_one_frame(
        &mut self,
        next: &Frame,
        search_radius: u32,
        config: &TrackerConfig,
    ) -> Result<TrackStep, TrackError> {
        if next.index != self.frame_index + 1 {
            return Err(TrackError::FrameMismatch { state: self.frame_index, got: next.index });
        }
        let gray = GrayImage::from_rgb(&next.image);
        let integral = IntegralImage::new(&gray);
        let (pw, ph) = self.patch_size;
        let r = search_radius as i64;

        let mut peaks = Vec::with_capacity(self.patches.len());
        let mut shifts = Vec::with_capacity(self.patches.len());
        for patch in &self.patches {
            let (ox, oy) = patch_origin(&self.last_box, patch.offset, self.patch_size);
            // ties go to the smallest displacement
            let mut best: Option<(f64, i64, i64, i64)> = None;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (x, y) = (ox + dx, oy + dy);
                    if x < 0 || y < 0 || x as usize + pw > gray.width || y as usize + ph > gray.height {
                        continue;
                    }
                    let s = patch.template.ncc_at(&gray, &integral, x as usize, y as usize);
                    let d2 = dx * dx + dy * dy;
                    if best.is_none_or(|(bs, _, _, bd2)| s > bs || (s == bs && d2 < bd2)) {
                        best = Some((s, dx, dy, d2));
                    }
                }
            }
            let (score, dx, dy) = best.map_or((0.0, 0, 0), |(s, dx, dy, _)| (s, dx, dy));
            peaks.push(score.clamp(0.0, 1.0));
            shifts.push((dx, dy));
        }

        let ema = config.reliability_ema;
        for (patch, &peak) in self.patches.iter_mut().zip(&peaks) {
            patch.reliability = (ema * patch.reliability + (1.0 - ema) * peak).clamp(MIN_RELIABILITY, 1.0);
        }
        let weights: Vec<f64> = self.patches.iter().map(|p| p.reliability).collect();
        let total: f64 = weights.iter().sum();
        let confidence = (weights.iter().zip(&peaks).map(|(w, p)| w * p).sum::<f64>() / total).clamp(0.0, 1.0);
        let mdx = weighted_median(shifts.iter().zip(&weights).map(|(&(dx, _), &w)| (dx, w)).collect());
        let mdy = weighted_median(shifts.iter().zip(&weights).map(|(&(_, dy), &w)| (dy, w)).collect());

        // keep the box center inside the frame
        let (cx, cy) = self.last_box.center();
        let mdx = mdx.clamp(-(cx.floor() as i64), gray.width as i64 - 1 - cx.floor() as i64);
        let mdy = mdy.clamp(-(cy.floor() as i64), gray.height as i64 - 1 - cy.floor() as i64);
        let moved = self.last_box.translate(mdx as i32, mdy as i32);

        if confidence > config.refresh_threshold {
            let offsets: Vec<_> = self.patches.iter().map(|p| p.offset).collect();
            let fresh = extract_templates(&gray, &moved, &offsets, self.patch_size);
            for (patch, t) in self.patches.iter_mut().zip(fresh) {
                patch.template = t;
            }
        }
        self.last_box = moved;
        self.frame_index = next.index;
        Ok(TrackStep { bbox: moved, confidence, lost: confidence < config.loss_confidence })
    }
}
