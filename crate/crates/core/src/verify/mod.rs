//! Face verification: preprocessing to fixed-size chips, embedding, query
//! construction and the cosine-similarity decision.

mod cache;
mod external;
mod synthetic;

pub use cache::{read_chip, read_embedding, write_chip, write_embedding, EmbeddingFileError};
pub use external::ExternalEmbedder;
pub use synthetic::{SyntheticEmbedder, IDENTITY_MATCH_THRESHOLD};

use thiserror::Error;

use crate::domain::{crop, BoundingBox, DomainError, Embedding, Frame};
use crate::raster::resize_bilinear;

pub const CHIP_SIZE: usize = 224;
pub const CHIP_LEN: usize = CHIP_SIZE * CHIP_SIZE * 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("BackendFailure: {0}")]
    BackendFailure(String),
    #[error("DimensionMismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("ZeroVector: cosine similarity of a zero-norm embedding")]
    ZeroVector,
    #[error("cannot build a query from zero embeddings")]
    EmptyQuery,
}

/// A 224 x 224 x 3 mean-subtracted face image, row-major, interleaved RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceChip {
    pixels: Vec<f32>,
}

impl FaceChip {
    pub fn from_pixels(pixels: Vec<f32>) -> Result<Self, VerifyError> {
        if pixels.len() != CHIP_LEN {
            return Err(VerifyError::DimensionMismatch(pixels.len(), CHIP_LEN));
        }
        Ok(FaceChip { pixels })
    }

    pub fn zeros() -> Self {
        FaceChip { pixels: vec![0.0; CHIP_LEN] }
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }
}

/// Crops `bbox` from `frame`, resizes it bilinearly to 224 x 224 and
/// subtracts `mean_image` (zero when absent).
pub fn preprocess_face(frame: &Frame, bbox: &BoundingBox, mean_image: Option<&FaceChip>) -> Result<FaceChip, VerifyError> {
    let face = crop(frame, bbox)?;
    let src: Vec<f32> = face.as_raw().iter().map(|&v| v as f32).collect();
    let mut pixels = resize_bilinear(&src, face.width() as usize, face.height() as usize, 3, CHIP_SIZE, CHIP_SIZE);
    if let Some(mean) = mean_image {
        pixels.iter_mut().zip(&mean.pixels).for_each(|(p, m)| *p -= m);
    }
    Ok(FaceChip { pixels })
}

pub trait EmbedderBackend: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, chip: &FaceChip) -> Result<Embedding, VerifyError>;
}

/// Runs the backend and checks its output contract (dimension, nonzero norm).
pub fn embed(backend: &dyn EmbedderBackend, chip: &FaceChip) -> Result<Embedding, VerifyError> {
    let e = backend.embed(chip)?;
    if e.dim() != backend.dim() {
        return Err(VerifyError::DimensionMismatch(e.dim(), backend.dim()));
    }
    if !(e.norm() > 0.0) {
        return Err(VerifyError::BackendFailure(format!("{} produced a zero or non-finite embedding", backend.name())));
    }
    Ok(e)
}

/// The averaged bootstrap embedding of the target identity.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryProfile {
    pub embedding: Embedding,
    pub source_frames: Vec<usize>,
    /// Ground-truth label, known only in synthetic runs.
    pub identity_label: Option<String>,
}

/// Componentwise arithmetic mean. `source_frames` is left for the caller.
pub fn build_query(embeddings: &[Embedding]) -> Result<QueryProfile, VerifyError> {
    let first = embeddings.first().ok_or(VerifyError::EmptyQuery)?;
    let dim = first.dim();
    let mut sum = vec![0f64; dim];
    for e in embeddings {
        if e.dim() != dim {
            return Err(VerifyError::DimensionMismatch(e.dim(), dim));
        }
        sum.iter_mut().zip(&e.values).for_each(|(s, v)| *s += v);
    }
    let n = embeddings.len() as f64;
    let values = if embeddings.iter().all(|e| e.values == first.values) {
        // exact for repeated vectors, where sum / n can be off by an ulp
        first.values.clone()
    } else {
        sum.into_iter().map(|s| s / n).collect()
    };
    Ok(QueryProfile { embedding: Embedding::new(values), source_frames: Vec::new(), identity_label: None })
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, VerifyError> {
    if a.dim() != b.dim() {
        return Err(VerifyError::DimensionMismatch(a.dim(), b.dim()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(VerifyError::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub accepted: bool,
    pub score: f64,
}

/// Accepts iff the cosine score strictly exceeds `threshold`.
pub fn verify(candidate: &Embedding, query: &QueryProfile, threshold: f64) -> Result<Verdict, VerifyError> {
    let score = cosine_similarity(candidate, &query.embedding)?;
    Ok(Verdict { accepted: score > threshold, score })
}
