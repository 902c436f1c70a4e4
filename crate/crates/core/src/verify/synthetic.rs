use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{EmbedderBackend, FaceChip, VerifyError, CHIP_SIZE};
use crate::domain::Embedding;
use crate::seeding::{fnv1a, mix_seed};

/// Minimum signature correlation for a chip to be recognized as a gallery
/// identity.
pub const IDENTITY_MATCH_THRESHOLD: f64 = 0.6;

const SIGNATURE_SIDE: usize = 32;
const BLOCK: usize = CHIP_SIZE / SIGNATURE_SIDE;
/// Misalignment tolerated when matching, in signature blocks (one block is
/// 1/32 of the face box).
const MAX_SHIFT: isize = 3;

/// Stand-in for a face-recognition network over synthetic scenarios.
///
/// Every gallery identity owns a canonical unit vector; the canonical
/// vectors are mutually orthogonal. A chip is matched against the gallery by
/// the best correlation of 32x32 luma signatures over small relative shifts,
/// so slightly misaligned crops are still recognized. A recognized chip
/// embeds to its identity's canonical vector, anything else to a chip-seeded
/// direction orthogonal to all canonical vectors. With `sigma > 0`, Gaussian
/// noise of total expected norm `sigma` (per-coordinate deviation
/// `sigma / sqrt(dim)`) seeded by the chip content is added and the result
/// renormalized.
#[derive(Debug, Clone)]
pub struct SyntheticEmbedder {
    dim: usize,
    sigma: f64,
    seed: u64,
    labels: Vec<String>,
    signatures: Vec<Vec<f64>>,
    canonical: Vec<Embedding>,
}

/// Block-mean luma, row-major `SIGNATURE_SIDE` squared.
fn signature(chip: &FaceChip) -> Vec<f64> {
    let px = chip.pixels();
    let mut sig = vec![0f64; SIGNATURE_SIDE * SIGNATURE_SIDE];
    for y in 0..CHIP_SIZE {
        for x in 0..CHIP_SIZE {
            let o = (y * CHIP_SIZE + x) * 3;
            let luma = 0.299 * px[o] as f64 + 0.587 * px[o + 1] as f64 + 0.114 * px[o + 2] as f64;
            sig[(y / BLOCK) * SIGNATURE_SIDE + x / BLOCK] += luma;
        }
    }
    let area = (BLOCK * BLOCK) as f64;
    sig.iter_mut().for_each(|v| *v /= area);
    sig
}

/// Pearson correlation of `a` shifted by `(dx, dy)` against `b` over their
/// overlap; 0 when either side is flat there.
fn shifted_correlation(a: &[f64], b: &[f64], dx: isize, dy: isize) -> f64 {
    let n = SIGNATURE_SIDE as isize;
    let (mut sa, mut sb, mut saa, mut sbb, mut sab, mut count) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for y in 0.max(-dy)..n.min(n - dy) {
        for x in 0.max(-dx)..n.min(n - dx) {
            let va = a[((y + dy) * n + x + dx) as usize];
            let vb = b[(y * n + x) as usize];
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
            count += 1.0;
        }
    }
    let cov = sab - sa * sb / count;
    let (va, vb) = (saa - sa * sa / count, sbb - sb * sb / count);
    // flat regions carry no identity information
    let floor = 1e-6 * count;
    if va <= floor || vb <= floor {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

fn best_alignment(gallery: &[f64], sig: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for dy in -MAX_SHIFT..=MAX_SHIFT {
        for dx in -MAX_SHIFT..=MAX_SHIFT {
            best = best.max(shifted_correlation(gallery, sig, dx, dy));
        }
    }
    best
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn project_out(v: &mut [f64], basis: &[Embedding]) {
    for b in basis {
        let d: f64 = v.iter().zip(&b.values).map(|(x, y)| x * y).sum();
        v.iter_mut().zip(&b.values).for_each(|(x, y)| *x -= d * y);
    }
}

impl SyntheticEmbedder {
    /// `gallery` pairs each identity label with a reference chip of it.
    pub fn new(gallery: Vec<(String, FaceChip)>, dim: usize, sigma: f64, seed: u64) -> Result<Self, VerifyError> {
        if dim <= gallery.len() {
            return Err(VerifyError::BackendFailure(format!(
                "synthetic embedder needs dim > {} identities, got {dim}",
                gallery.len()
            )));
        }
        if !(sigma >= 0.0) {
            return Err(VerifyError::BackendFailure("sigma must be non-negative".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xC0FFEE));
        let mut canonical: Vec<Embedding> = Vec::with_capacity(gallery.len());
        for _ in &gallery {
            let mut v = gaussian(&mut rng, dim);
            project_out(&mut v, &canonical);
            project_out(&mut v, &canonical);
            normalize(&mut v);
            canonical.push(Embedding::new(v));
        }
        let (labels, chips): (Vec<_>, Vec<_>) = gallery.into_iter().unzip();
        let signatures = chips.iter().map(signature).collect();
        Ok(SyntheticEmbedder { dim, sigma, seed, labels, signatures, canonical })
    }

    pub fn canonical(&self, label: &str) -> Option<&Embedding> {
        self.labels.iter().position(|l| l == label).map(|i| &self.canonical[i])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Gallery identity the chip is recognized as, with its correlation.
    pub fn identify(&self, chip: &FaceChip) -> Option<(&str, f64)> {
        self.best_match(&signature(chip)).map(|(i, r)| (self.labels[i].as_str(), r))
    }

    fn best_match(&self, sig: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, g) in self.signatures.iter().enumerate() {
            let r = best_alignment(g, sig);
            if best.is_none_or(|(_, br)| r > br) {
                best = Some((i, r));
            }
        }
        best.filter(|&(_, r)| r >= IDENTITY_MATCH_THRESHOLD)
    }
}

impl EmbedderBackend for SyntheticEmbedder {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, chip: &FaceChip) -> Result<Embedding, VerifyError> {
        let sig = signature(chip);
        let chip_hash = fnv1a(sig.iter().flat_map(|v| v.to_bits().to_le_bytes()));
        let mut values = match self.best_match(&sig) {
            Some((i, _)) => self.canonical[i].values.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, chip_hash));
                let mut v = gaussian(&mut rng, self.dim);
                project_out(&mut v, &self.canonical);
                project_out(&mut v, &self.canonical);
                normalize(&mut v);
                v
            }
        };
        if self.sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed ^ 0x005E_ED0F_401E, chip_hash));
            let scale = self.sigma / (self.dim as f64).sqrt();
            for v in values.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v += scale * g;
            }
            normalize(&mut values);
        }
        Ok(Embedding::new(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BoundingBox, Frame, RgbImage};
    use crate::verify::{cosine_similarity, embed, preprocess_face};
    use rand::Rng;

    fn texture(seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells: Vec<[u8; 3]> = (0..64).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let mut img = RgbImage::filled(32, 32, [0, 0, 0]);
        for y in 0..32 {
            for x in 0..32 {
                img.put_pixel(x, y, cells[(y / 4 * 8 + x / 4) as usize]);
            }
        }
        img
    }

    fn chip_of(img: &RgbImage) -> FaceChip {
        let f = Frame::new(0, 1.0, img.clone());
        preprocess_face(&f, &img.bounds(), None).unwrap()
    }

    fn gallery() -> Vec<(String, FaceChip)> {
        vec![("A".into(), chip_of(&texture(1))), ("B".into(), chip_of(&texture(2)))]
    }

    #[test]
    fn zero_noise_chip_embeds_to_canonical() {
        let emb = SyntheticEmbedder::new(gallery(), 64, 0.0, 9).unwrap();
        // A pasted into a larger frame and cropped back out
        let mut canvas = RgbImage::filled(80, 60, [40, 90, 10]);
        canvas.paste(&texture(1), 30, 12);
        let f = Frame::new(3, 29.0, canvas);
        let chip = preprocess_face(&f, &BoundingBox::new(30, 12, 32, 32), None).unwrap();
        let e = embed(&emb, &chip).unwrap();
        assert_eq!(&e, emb.canonical("A").unwrap());
        assert_eq!(e, embed(&emb, &chip).unwrap());
    }

    #[test]
    fn canonical_vectors_orthonormal_and_cross_cosine_matches() {
        let emb = SyntheticEmbedder::new(gallery(), 4096, 0.0, 3).unwrap();
        let (a, b) = (emb.canonical("A").unwrap(), emb.canonical("B").unwrap());
        assert!((a.norm() - 1.0).abs() < 1e-12);
        let ea = embed(&emb, &chip_of(&texture(1))).unwrap();
        let eb = embed(&emb, &chip_of(&texture(2))).unwrap();
        let direct = cosine_similarity(a, b).unwrap();
        assert!(direct.abs() < 1e-12);
        assert_eq!(cosine_similarity(&ea, &eb).unwrap(), direct);
    }

    #[test]
    fn unknown_chip_is_orthogonal_to_identities() {
        let emb = SyntheticEmbedder::new(gallery(), 16, 0.0, 3).unwrap();
        let other = chip_of(&texture(77));
        assert!(emb.identify(&other).is_none());
        let e = embed(&emb, &other).unwrap();
        for l in ["A", "B"] {
            assert!(cosine_similarity(&e, emb.canonical(l).unwrap()).unwrap().abs() < 1e-12);
        }
        let flat = chip_of(&RgbImage::filled(32, 32, [128, 128, 128]));
        assert!(emb.identify(&flat).is_none());
        assert!(embed(&emb, &flat).unwrap().norm() > 0.0);
    }

    #[test]
    fn noise_lowers_similarity_as_expected() {
        let emb = SyntheticEmbedder::new(gallery(), 4096, 1.0, 3).unwrap();
        let e = embed(&emb, &chip_of(&texture(1))).unwrap();
        let c = cosine_similarity(&e, emb.canonical("A").unwrap()).unwrap();
        // E[cos] = 1 / sqrt(1 + sigma^2) for large dim
        assert!((c - 0.5f64.sqrt()).abs() < 0.03, "cos {c}");
        assert!((e.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slightly_misaligned_crop_is_recognized() {
        let emb = SyntheticEmbedder::new(gallery(), 16, 0.0, 3).unwrap();
        let mut canvas = RgbImage::filled(80, 60, [40, 90, 10]);
        canvas.paste(&texture(2), 30, 12);
        let f = Frame::new(0, 29.0, canvas);
        for (dx, dy) in [(2, 0), (0, -2), (-2, 2), (1, 1)] {
            let chip = preprocess_face(&f, &BoundingBox::new(30 + dx, 12 + dy, 32, 32), None).unwrap();
            assert_eq!(emb.identify(&chip).map(|(l, _)| l), Some("B"), "shift ({dx},{dy})");
        }
    }

    #[test]
    fn random_impostors_are_not_recognized() {
        let emb = SyntheticEmbedder::new(gallery(), 16, 0.0, 3).unwrap();
        let worst = (100..400u64)
            .map(|s| {
                let chip = chip_of(&texture(s));
                emb.signatures.iter().map(|g| best_alignment(g, &signature(&chip))).fold(f64::MIN, f64::max)
            })
            .fold(f64::MIN, f64::max);
        assert!(worst < IDENTITY_MATCH_THRESHOLD, "worst impostor correlation {worst}");
    }

    #[test]
    fn rejects_too_small_dim() {
        assert!(SyntheticEmbedder::new(gallery(), 2, 0.0, 0).is_err());
    }
}
