//! Frame sources. A video is either a directory of numbered frame images
//! with a `meta.json`, or an in-memory frame list (synthetic scenarios).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, Frame, RgbImage};

#[derive(Debug, Error)]
pub enum VideoError {
    #[error("MissingMeta: {0} not found or unreadable")]
    MissingMeta(PathBuf),
    #[error("invalid meta.json: {0}")]
    InvalidMeta(String),
    #[error("NonContiguousIndices: {0}")]
    NonContiguousIndices(String),
    #[error("DecodeError: frame {index}: {reason}")]
    DecodeError { index: usize, reason: String },
    #[error("OutOfRange: frame {index} requested from a {count}-frame video")]
    OutOfRange { index: usize, count: usize },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Random-access frame source.
pub trait VideoSource: Send + Sync {
    fn frame_count(&self) -> usize;
    fn frame_rate(&self) -> f64;
    fn dimensions(&self) -> (u32, u32);
    fn read_frame(&self, index: usize) -> Result<Frame, VideoError>;

    fn has_frame(&self, index: usize) -> bool {
        index < self.frame_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub frame_rate: f64,
    pub width: u32,
    pub height: u32,
}

pub const META_FILE: &str = "meta.json";

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.ppm")
}

/// Video backed by `frame_NNNNNN.{ppm,png}` files; frames are decoded on
/// every read.
#[derive(Debug, Clone)]
pub struct ImageSequence {
    dir: PathBuf,
    meta: VideoMeta,
    files: Vec<PathBuf>,
}

fn parse_frame_name(name: &str) -> Option<usize> {
    let stem = name.strip_prefix("frame_")?;
    let (digits, ext) = stem.split_once('.')?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    matches!(ext, "ppm" | "png").then(|| digits.parse().ok())?
}

impl ImageSequence {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, VideoError> {
        let dir = dir.as_ref().to_path_buf();
        let meta_path = dir.join(META_FILE);
        let meta_text = fs::read_to_string(&meta_path).map_err(|_| VideoError::MissingMeta(meta_path.clone()))?;
        let meta: VideoMeta =
            serde_json::from_str(&meta_text).map_err(|e| VideoError::InvalidMeta(e.to_string()))?;
        if !(meta.frame_rate > 0.0) || meta.width == 0 || meta.height == 0 {
            return Err(VideoError::InvalidMeta(
                "frame_rate, width and height must be positive".into(),
            ));
        }

        let entries = fs::read_dir(&dir).map_err(|source| VideoError::Io { path: dir.clone(), source })?;
        let mut indexed = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|source| VideoError::Io { path: dir.clone(), source })?;
            if let Some(i) = entry.file_name().to_str().and_then(parse_frame_name) {
                indexed.push((i, entry.path()));
            }
        }
        indexed.sort();
        if indexed.is_empty() {
            return Err(VideoError::NonContiguousIndices("no frame files found (frame_count 0)".into()));
        }
        for (expected, (i, path)) in indexed.iter().enumerate() {
            if *i != expected {
                return Err(VideoError::NonContiguousIndices(format!(
                    "expected frame {expected}, found {}",
                    path.display()
                )));
            }
        }
        let files = indexed.into_iter().map(|(_, p)| p).collect();
        Ok(ImageSequence { dir, meta, files })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn frame_path(&self, index: usize) -> Option<&Path> {
        self.files.get(index).map(PathBuf::as_path)
    }
}

impl VideoSource for ImageSequence {
    fn frame_count(&self) -> usize {
        self.files.len()
    }

    fn frame_rate(&self) -> f64 {
        self.meta.frame_rate
    }

    fn dimensions(&self) -> (u32, u32) {
        (self.meta.width, self.meta.height)
    }

    fn read_frame(&self, index: usize) -> Result<Frame, VideoError> {
        let path = self.files.get(index).ok_or(VideoError::OutOfRange { index, count: self.files.len() })?;
        let decode_err = |reason: String| VideoError::DecodeError { index, reason };
        let image = load_image(path).map_err(decode_err)?;
        if (image.width(), image.height()) != self.dimensions() {
            return Err(decode_err(format!(
                "dimensions {}x{} differ from meta.json {}x{}",
                image.width(),
                image.height(),
                self.meta.width,
                self.meta.height
            )));
        }
        Ok(Frame::new(index, self.meta.frame_rate, image))
    }
}

/// Frames held in memory; used for generated scenarios.
#[derive(Debug, Clone)]
pub struct MemoryVideo {
    frame_rate: f64,
    width: u32,
    height: u32,
    frames: Vec<RgbImage>,
}

impl MemoryVideo {
    pub fn new(frames: Vec<RgbImage>, frame_rate: f64) -> Result<Self, VideoError> {
        let first = frames
            .first()
            .ok_or_else(|| VideoError::NonContiguousIndices("no frames (frame_count 0)".into()))?;
        let (width, height) = (first.width(), first.height());
        if let Some(i) = frames.iter().position(|f| (f.width(), f.height()) != (width, height)) {
            return Err(VideoError::DecodeError { index: i, reason: "frame dimensions differ".into() });
        }
        Ok(MemoryVideo { frame_rate, width, height, frames })
    }

    pub fn frames(&self) -> &[RgbImage] {
        &self.frames
    }
}

impl VideoSource for MemoryVideo {
    fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn read_frame(&self, index: usize) -> Result<Frame, VideoError> {
        let img = self
            .frames
            .get(index)
            .ok_or(VideoError::OutOfRange { index, count: self.frames.len() })?;
        Ok(Frame::new(index, self.frame_rate, img.clone()))
    }
}

/// Writes every frame of `video` plus `meta.json` into `dir` using the
/// `frame_%06d.ppm` convention.
pub fn write_sequence(video: &dyn VideoSource, dir: &Path) -> Result<(), VideoError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| VideoError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for i in 0..video.frame_count() {
        let frame = video.read_frame(i)?;
        let path = dir.join(frame_file_name(i));
        write_ppm_file(&path, &frame.image).map_err(io_err(&path))?;
    }
    let (width, height) = video.dimensions();
    let meta = VideoMeta { frame_rate: video.frame_rate(), width, height };
    let meta_path = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(&meta_path, text + "\n").map_err(io_err(&meta_path))
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.as_raw());
    out
}

pub fn write_ppm_file(path: &Path, image: &RgbImage) -> io::Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    f.write_all(&encode_ppm(image))?;
    f.flush()
}

/// Binary (P6) PPM with maxval 255.
pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, String> {
    let mut pos = 0usize;
    let mut token = || -> Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PPM header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P6" {
        return Err("not a binary PPM (P6)".into());
    }
    let mut num = |name: &str| -> Result<u32, String> {
        token()?.parse::<u32>().map_err(|_| format!("bad PPM {name}"))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(format!("unsupported PPM maxval {maxval}"));
    }
    // exactly one whitespace byte separates the header from the raster
    let data_start = pos + 1;
    let expected = width as usize * height as usize * 3;
    let data = bytes
        .get(data_start..data_start + expected)
        .ok_or_else(|| "truncated PPM raster".to_string())?;
    RgbImage::from_raw(width, height, data.to_vec()).map_err(|e: DomainError| e.to_string())
}

/// Reads a PPM or (by extension) PNG file.
pub fn load_image(path: &Path) -> Result<RgbImage, String> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        decode_png(&bytes)
    } else {
        decode_ppm(&bytes)
    }
}

fn decode_png(bytes: &[u8]) -> Result<RgbImage, String> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| e.to_string())?
        .to_rgb8();
    let (w, h) = img.dimensions();
    RgbImage::from_raw(w, h, img.into_raw()).map_err(|e| e.to_string())
}
