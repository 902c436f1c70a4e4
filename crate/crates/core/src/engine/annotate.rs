use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::Timeline;
use crate::domain::{BoundingBox, RgbImage};
use crate::videoio::{frame_file_name, write_ppm_file, VideoError, VideoSource};

pub const HIGHLIGHT: [u8; 3] = [255, 255, 0];

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error(transparent)]
    Video(#[from] VideoError),
    #[error("IoError on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Sets the 1 px border of `bbox` (clamped to the image) to yellow.
pub fn draw_box(image: &mut RgbImage, bbox: &BoundingBox) {
    let Some(b) = bbox.clamp_to(image.width(), image.height()) else {
        return;
    };
    let (x0, y0) = (b.x as u32, b.y as u32);
    let (x1, y1) = (x0 + b.w - 1, y0 + b.h - 1);
    for x in x0..=x1 {
        image.put_pixel(x, y0, HIGHLIGHT);
        image.put_pixel(x, y1, HIGHLIGHT);
    }
    for y in y0..=y1 {
        image.put_pixel(x0, y, HIGHLIGHT);
        image.put_pixel(x1, y, HIGHLIGHT);
    }
}

/// Writes every timeline frame with its box outlined into `out_dir`.
/// Returns the number of frames written.
pub fn annotate(video: &dyn VideoSource, timeline: &Timeline, out_dir: &Path) -> Result<usize, AnnotateError> {
    fs::create_dir_all(out_dir).map_err(|source| AnnotateError::Io { path: out_dir.to_path_buf(), source })?;
    let mut written = 0;
    for (index, bbox) in timeline.frame_boxes() {
        let mut frame = video.read_frame(index)?;
        draw_box(&mut frame.image, &bbox);
        let path = out_dir.join(frame_file_name(index));
        write_ppm_file(&path, &frame.image).map_err(|source| AnnotateError::Io { path: path.clone(), source })?;
        written += 1;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::EngineConfig;
    use crate::engine::TimelineSegment;
    use crate::videoio::{decode_ppm, MemoryVideo};

    fn video() -> MemoryVideo {
        let frames = (0..6).map(|i| RgbImage::filled(20, 16, [i * 10, 5, 7])).collect();
        MemoryVideo::new(frames, 25.0).unwrap()
    }

    fn timeline(segments: Vec<TimelineSegment>) -> Timeline {
        Timeline { query_frame: 0, config: EngineConfig::default(), segments }
    }

    #[test]
    fn empty_timeline_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(annotate(&video(), &timeline(vec![]), dir.path()).unwrap(), 0);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn only_border_pixels_change() {
        let dir = tempfile::tempdir().unwrap();
        let b = BoundingBox::new(3, 2, 6, 5);
        let seg = TimelineSegment { start: 1, end: 3, boxes: vec![b; 3], mean_score: 1.0 };
        assert_eq!(annotate(&video(), &timeline(vec![seg]), dir.path()).unwrap(), 3);
        let v = video();
        for i in 1..=3usize {
            let out = decode_ppm(&fs::read(dir.path().join(frame_file_name(i))).unwrap()).unwrap();
            let orig = &v.frames()[i];
            for y in 0..16 {
                for x in 0..20 {
                    let inside = (3..=8).contains(&x) && (2..=6).contains(&y);
                    let border = inside && (x == 3 || x == 8 || y == 2 || y == 6);
                    let expected = if border { HIGHLIGHT } else { orig.pixel(x, y) };
                    assert_eq!(out.pixel(x, y), expected, "({x},{y})");
                }
            }
        }
    }

    #[test]
    fn box_partly_outside_is_clamped() {
        let mut img = RgbImage::filled(10, 10, [0, 0, 0]);
        draw_box(&mut img, &BoundingBox::new(-5, 5, 10, 10));
        assert_eq!(img.pixel(0, 5), HIGHLIGHT);
        assert_eq!(img.pixel(4, 9), HIGHLIGHT);
        assert_eq!(img.pixel(2, 7), [0, 0, 0]);
    }
}
