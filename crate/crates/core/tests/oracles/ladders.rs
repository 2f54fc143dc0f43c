//! Ordering oracle for the perceptual baselines: each synthetic source image is
//! pushed down a blur ladder and a JPEG-quality ladder, and the baseline
//! score must follow the ladder.

use fqa_core::degrade::{degrade, encode_jpeg, DegradationKind, DegradationSpec};
use fqa_core::eval::{score_blur, score_jpeg_bytes};
use fqa_core::synth::IdentityPattern;
use image::RgbImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SOURCES: u64 = 24;
/// Blur severities; with the default sigma range these are sigma 0, 0.5, 1, 2, 3.
pub const BLUR_LADDER: [f64; 5] = [0.0, 1.0 / 6.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
pub const JPEG_LADDER: [u8; 3] = [90, 50, 10];

pub fn source(seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    IdentityPattern::template(seed).render(64, 1.0, &mut rng)
}

pub fn blur_scores(img: &RgbImage) -> Vec<f64> {
    BLUR_LADDER
        .iter()
        .map(|&s| score_blur(&degrade(img, &DegradationSpec::new(DegradationKind::GaussianBlur, s, 0)).unwrap()))
        .collect()
}

pub fn jpeg_scores(img: &RgbImage) -> Vec<f64> {
    JPEG_LADDER
        .iter()
        .map(|&q| score_jpeg_bytes(&encode_jpeg(img, q).unwrap()).unwrap())
        .collect()
}

/// Sources whose blur scores are not strictly decreasing, out of `SOURCES`.
pub fn blur_violations() -> usize {
    (0..SOURCES)
        .filter(|&s| !blur_scores(&source(s)).windows(2).all(|w| w[0] > w[1]))
        .count()
}

/// Sources whose JPEG scores increase somewhere along the ladder.
pub fn jpeg_violations() -> usize {
    (0..SOURCES)
        .filter(|&s| !jpeg_scores(&source(s)).windows(2).all(|w| w[0] >= w[1]))
        .count()
}
