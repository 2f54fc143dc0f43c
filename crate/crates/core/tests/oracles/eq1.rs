//! Independent evaluation of the quality label: both vectors are first
//! scaled to unit length, then dotted.

use fqa_core::labeler::quality_score;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PAIRS: u64 = 1000;
pub const TOL: f64 = 1e-6;

pub fn brute_cosine(f: &[f64], u: &[f64]) -> f64 {
    let unit = |v: &[f64]| {
        let n = v.iter().fold(0.0f64, |acc, x| acc.hypot(*x));
        v.iter().map(|x| x / n).collect::<Vec<_>>()
    };
    let (a, b) = (unit(f), unit(u));
    let mut dot = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
    }
    dot
}

/// A random non-zero vector pair of a random dimension in 1..=128, with
/// entries spread over several orders of magnitude.
pub fn pair(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=128);
    let scale = 10f64.powi(rng.random_range(-3..=3));
    let mut v = || -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
            if v.iter().any(|&x| x != 0.0) {
                return v;
            }
        }
    };
    (v(), v())
}

/// Worst absolute deviation from the brute-force cosine over `PAIRS` pairs.
pub fn worst_deviation() -> f64 {
    (0..PAIRS)
        .map(|s| {
            let (f, u) = pair(s);
            (quality_score(&f, &u).unwrap() - brute_cosine(&f, &u)).abs()
        })
        .fold(0.0, f64::max)
}

/// Pairs where rescaling either vector by a positive factor moves the score
/// by more than `TOL`.
pub fn scale_violations() -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    (0..PAIRS)
        .filter(|&s| {
            let (f, u) = pair(s);
            let (l, m) = (10f64.powf(rng.random_range(-4.0..4.0)), 10f64.powf(rng.random_range(-4.0..4.0)));
            let fs: Vec<f64> = f.iter().map(|x| x * l).collect();
            let us: Vec<f64> = u.iter().map(|x| x * m).collect();
            (quality_score(&f, &u).unwrap() - quality_score(&fs, &us).unwrap()).abs() > TOL
        })
        .count()
}

/// Rotates a feature away from its class center in a random plane and
/// counts instances where the score fails to fall strictly as the angle
/// grows from 0 to pi.
pub fn angle_violations(instances: u64, steps: usize) -> usize {
    (0..instances)
        .filter(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0xa11e);
            let dim = rng.random_range(2..=64);
            let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            // Gram-Schmidt: v is the unit direction of r orthogonal to u.
            let uu: f64 = u.iter().map(|x| x * x).sum();
            let ru: f64 = r.iter().zip(&u).map(|(a, b)| a * b).sum();
            let v: Vec<f64> = r.iter().zip(&u).map(|(a, b)| a - ru / uu * b).collect();
            let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let un = uu.sqrt();
            let scores: Vec<f64> = (0..=steps)
                .map(|k| {
                    let t = std::f64::consts::PI * k as f64 / steps as f64;
                    let f: Vec<f64> = u.iter().zip(&v).map(|(a, b)| t.cos() * a / un + t.sin() * b / vn).collect();
                    quality_score(&f, &u).unwrap()
                })
                .collect();
            !scores.windows(2).all(|w| w[0] > w[1])
        })
        .count()
}
