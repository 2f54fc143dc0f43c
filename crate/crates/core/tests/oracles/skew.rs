//! Unbalanced score distribution like a real labelled face set:
//! most mass in a narrow band near the top, a thin spread elsewhere.

use fqa_core::manifest::ManifestRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn skewed_scores(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let peak = Normal::new(0.75f64, 0.04).unwrap();
    (0..n)
        .map(|_| {
            if rng.random_bool(0.9) {
                peak.sample(&mut rng).clamp(0.0, 1.0)
            } else {
                rng.random_range(0.05..0.95)
            }
        })
        .collect()
}

pub fn scored_records(scores: &[f64]) -> Vec<ManifestRecord> {
    scores
        .iter()
        .enumerate()
        .map(|(i, &s)| ManifestRecord::new(format!("img{i:06}"), format!("x/{i}.png"), format!("id{}", i % 13)).with_score(s))
        .collect()
}
