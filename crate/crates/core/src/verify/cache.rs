//! Binary interchange files.
//!
//! Embedding file: little-endian `u32` dimension followed by `dim` `f64`
//! values. Chip file (external embedder requests, mean images): exactly
//! 224 * 224 * 3 little-endian `f32` values, row-major interleaved RGB.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{FaceChip, CHIP_LEN};
use crate::domain::Embedding;

#[derive(Debug, Error)]
pub enum EmbeddingFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("embedding file declares dimension 0")]
    ZeroDim,
    #[error("trailing bytes after {0} values")]
    TrailingBytes(usize),
    #[error("chip file holds {0} bytes, expected {expected}", expected = CHIP_LEN * 4)]
    ChipSize(usize),
}

pub fn write_embedding<W: Write>(mut w: W, e: &Embedding) -> io::Result<()> {
    w.write_all(&(e.dim() as u32).to_le_bytes())?;
    for v in &e.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_embedding<R: Read>(mut r: R) -> Result<Embedding, EmbeddingFileError> {
    let mut head = [0u8; 4];
    r.read_exact(&mut head)?;
    let dim = u32::from_le_bytes(head) as usize;
    if dim == 0 {
        return Err(EmbeddingFileError::ZeroDim);
    }
    let mut buf = vec![0u8; dim * 8];
    r.read_exact(&mut buf)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(EmbeddingFileError::TrailingBytes(dim));
    }
    let values = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Embedding::new(values))
}

pub fn write_chip<W: Write>(mut w: W, chip: &FaceChip) -> io::Result<()> {
    let bytes: Vec<u8> = chip.pixels().iter().flat_map(|v| v.to_le_bytes()).collect();
    w.write_all(&bytes)?;
    w.flush()
}

pub fn read_chip<R: Read>(mut r: R) -> Result<FaceChip, EmbeddingFileError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != CHIP_LEN * 4 {
        return Err(EmbeddingFileError::ChipSize(bytes.len()));
    }
    let pixels = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    Ok(FaceChip::from_pixels(pixels).expect("length checked"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_u32_dim_then_f64s() {
        let mut buf = Vec::new();
        write_embedding(&mut buf, &Embedding::new(vec![1.0, -2.5])).unwrap();
        assert_eq!(&buf[..4], &2u32.to_le_bytes());
        assert_eq!(&buf[4..12], &1.0f64.to_le_bytes());
        assert_eq!(buf.len(), 4 + 16);
    }

    #[test]
    fn truncated_and_trailing_rejected() {
        let mut buf = Vec::new();
        write_embedding(&mut buf, &Embedding::new(vec![1.0, 2.0])).unwrap();
        assert!(read_embedding(&buf[..10]).is_err());
        buf.push(0);
        assert!(matches!(read_embedding(&buf[..]), Err(EmbeddingFileError::TrailingBytes(2))));
        assert!(matches!(read_embedding(&[0u8, 0, 0, 0][..]), Err(EmbeddingFileError::ZeroDim)));
    }

    #[test]
    fn chip_round_trip() {
        let chip = FaceChip::from_pixels((0..CHIP_LEN).map(|i| i as f32 * 0.5 - 3.0).collect()).unwrap();
        let mut buf = Vec::new();
        write_chip(&mut buf, &chip).unwrap();
        assert_eq!(read_chip(&buf[..]).unwrap(), chip);
        assert!(matches!(read_chip(&buf[4..]), Err(EmbeddingFileError::ChipSize(_))));
    }

    proptest! {
        #[test]
        fn embedding_bytes_round_trip(values in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..64)) {
            let mut first = Vec::new();
            write_embedding(&mut first, &Embedding::new(values)).unwrap();
            let back = read_embedding(&first[..]).unwrap();
            let mut second = Vec::new();
            write_embedding(&mut second, &back).unwrap();
            prop_assert_eq!(first, second);
        }
    }
}
