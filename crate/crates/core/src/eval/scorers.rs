use crate::artifact::derive_seed;
use crate::degrade::encode_jpeg;
use crate::manifest::ManifestRecord;
use crate::model::{Checkpoint, NetworkKind};
use crate::preprocess::{load_records, load_rgb, resolve, UnreadablePolicy};
use crate::trainer::predict;
use crate::{FqaError, Result};
use fqa_tensor::par;
use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Half-saturation constant of the blur score `v / (v + c)`, where `v` is
/// the Laplacian variance in 0..255 luma units.
pub const BLUR_C: f64 = 100.0;
/// Bits per pixel of a quality-90 re-encode that maps to a JPEG score of 1.
pub const JPEG_REF_BPP: f64 = 8.0;
const JPEG_PROBE_QUALITY: u8 = 90;

fn luma(img: &RgbImage) -> Vec<f64> {
    img.pixels()
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect()
}

/// Sharpness: variance of the 4-neighbour Laplacian over interior pixels,
/// squashed to [0, 1). Higher is sharper.
pub fn score_blur(img: &RgbImage) -> f64 {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w < 3 || h < 3 {
        return 0.0;
    }
    let y = luma(img);
    let mut resp = Vec::with_capacity((w - 2) * (h - 2));
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            let i = r * w + c;
            resp.push(y[i - w] + y[i + w] + y[i - 1] + y[i + 1] - 4.0 * y[i]);
        }
    }
    let m = resp.iter().sum::<f64>() / resp.len() as f64;
    let v = resp.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / resp.len() as f64;
    v / (v + BLUR_C)
}

/// Compression score of a decoded image: bits per pixel of a quality-90
/// re-encode relative to [`JPEG_REF_BPP`], clamped to [0, 1]. Images that
/// already lost detail to compression re-encode smaller.
pub fn score_jpeg(img: &RgbImage) -> Result<f64> {
    let bytes = encode_jpeg(img, JPEG_PROBE_QUALITY)?;
    let bpp = 8.0 * bytes.len() as f64 / (img.width() as f64 * img.height() as f64);
    Ok((bpp / JPEG_REF_BPP).min(1.0))
}

/// [`score_jpeg`] on an encoded file's contents.
pub fn score_jpeg_bytes(bytes: &[u8]) -> Result<f64> {
    let img = image::load_from_memory(bytes).map_err(|e| FqaError::invalid(format!("cannot decode image: {e}")))?;
    score_jpeg(&img.to_rgb8())
}

/// Weighted arithmetic mean of per-factor scores.
pub fn score_combination(scores: &[f64], weights: &[f64]) -> Result<f64> {
    if scores.len() != weights.len() || scores.is_empty() {
        return Err(FqaError::invalid(format!("{} scores but {} weights", scores.len(), weights.len())));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(FqaError::invalid(format!("weights {weights:?} must be non-negative and sum to 1")));
    }
    Ok(scores.iter().zip(weights).map(|(s, w)| s * w).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Fqnet,
    Random,
    Blur,
    Jpeg,
    Combination,
}

impl ScorerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScorerKind::Fqnet => "fqnet",
            ScorerKind::Random => "random",
            ScorerKind::Blur => "blur",
            ScorerKind::Jpeg => "jpeg",
            ScorerKind::Combination => "combination",
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScorerKind {
    type Err = FqaError;

    fn from_str(s: &str) -> Result<Self> {
        [
            ScorerKind::Fqnet,
            ScorerKind::Random,
            ScorerKind::Blur,
            ScorerKind::Jpeg,
            ScorerKind::Combination,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| FqaError::invalid(format!("unknown scorer `{s}` (expected fqnet, random, blur, jpeg or combination)")))
    }
}

pub enum Scorer {
    Fqnet(Box<Checkpoint>),
    /// Uniform in [0, 1), derived from the seed and the image id only.
    Random {
        seed: u64,
    },
    Blur,
    Jpeg,
    /// Weights for (blur, jpeg).
    Combination {
        weights: [f64; 2],
    },
}

impl Scorer {
    pub fn kind(&self) -> ScorerKind {
        match self {
            Scorer::Fqnet(_) => ScorerKind::Fqnet,
            Scorer::Random { .. } => ScorerKind::Random,
            Scorer::Blur => ScorerKind::Blur,
            Scorer::Jpeg => ScorerKind::Jpeg,
            Scorer::Combination { .. } => ScorerKind::Combination,
        }
    }
}

/// Scores every record's image, in record order.
pub fn score_records(scorer: &Scorer, records: &[ManifestRecord], root: &Path, batch_size: usize) -> Result<Vec<f64>> {
    match scorer {
        Scorer::Random { seed } => Ok(records
            .iter()
            .map(|r| ChaCha8Rng::seed_from_u64(derive_seed(*seed, &r.image_id)).random::<f64>())
            .collect()),
        Scorer::Fqnet(ckpt) => {
            if ckpt.network.kind() != NetworkKind::Quality {
                return Err(FqaError::invalid("the fqnet scorer needs a quality-network checkpoint"));
            }
            let loaded = load_records(records, root, &ckpt.normalization, UnreadablePolicy::Abort)?;
            let pred = predict(&ckpt.network, &loaded.samples, &ckpt.normalization, batch_size)?;
            Ok(pred.into_iter().map(f64::from).collect())
        }
        Scorer::Blur | Scorer::Jpeg | Scorer::Combination { .. } => {
            let weights = match scorer {
                Scorer::Combination { weights } => {
                    score_combination(&[0.0, 0.0], weights)?;
                    *weights
                }
                Scorer::Blur => [1.0, 0.0],
                _ => [0.0, 1.0],
            };
            par::map_slice(records, |r| {
                let path = resolve(root, &r.path);
                let img = load_rgb(&path)?;
                let blur = if weights[0] > 0.0 { score_blur(&img) } else { 0.0 };
                let jpeg = if weights[1] > 0.0 {
                    let bytes = std::fs::read(&path).map_err(|e| FqaError::io(&path, e))?;
                    score_jpeg_bytes(&bytes)?
                } else {
                    0.0
                };
                score_combination(&[blur, jpeg], &weights)
            })
            .into_iter()
            .collect()
        }
    }
}
