use std::fs::File;
use std::io::BufWriter;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::{write_chip, EmbedderBackend, FaceChip, VerifyError};
use crate::adapter::LineProcess;
use crate::domain::Embedding;

#[derive(Serialize)]
struct Request {
    chip: String,
}

#[derive(Deserialize)]
struct Response {
    embedding: Vec<f64>,
}

/// Embedder served by an external process: request `{"chip": <path>}` where
/// the file holds the raw little-endian f32 chip, response
/// `{"embedding": [...]}`.
#[derive(Debug)]
pub struct ExternalEmbedder {
    process: LineProcess,
    dim: usize,
    scratch: tempfile::TempDir,
    counter: AtomicU64,
}

impl ExternalEmbedder {
    pub fn spawn(command: &[String], dim: usize) -> Result<Self, VerifyError> {
        let process = LineProcess::spawn(command).map_err(VerifyError::BackendFailure)?;
        let scratch = tempfile::tempdir().map_err(|e| VerifyError::BackendFailure(e.to_string()))?;
        Ok(ExternalEmbedder { process, dim, scratch, counter: AtomicU64::new(0) })
    }
}

impl EmbedderBackend for ExternalEmbedder {
    fn name(&self) -> &str {
        "external"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, chip: &FaceChip) -> Result<Embedding, VerifyError> {
        let fail = |e: std::io::Error| VerifyError::BackendFailure(e.to_string());
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let path = self.scratch.path().join(format!("chip_{n:08}.f32"));
        write_chip(BufWriter::new(File::create(&path).map_err(fail)?), chip).map_err(fail)?;
        let resp: Response = self
            .process
            .request(&Request { chip: path.to_string_lossy().into_owned() })
            .map_err(VerifyError::BackendFailure)?;
        let _ = std::fs::remove_file(&path);
        if resp.embedding.len() != self.dim {
            return Err(VerifyError::DimensionMismatch(resp.embedding.len(), self.dim));
        }
        Ok(Embedding::new(resp.embedding))
    }
}
