//! Brute-force ROC: every distinct similarity plus "reject all" is tried as a
//! threshold, and rates are recounted from scratch at each one.

use fqa_core::eval::roc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INSTANCES: u64 = 100;
pub const MAX_PAIRS: usize = 1000;

/// (fpr, tpr) at every threshold, accepting `s >= t`.
pub fn brute_points(sims: &[f64], labels: &[bool]) -> Vec<(f64, f64)> {
    let p = labels.iter().filter(|&&l| l).count();
    let n = labels.len() - p;
    let mut thresholds: Vec<f64> = sims.to_vec();
    thresholds.push(f64::INFINITY);
    thresholds
        .iter()
        .map(|&t| {
            let tp = sims.iter().zip(labels).filter(|(&s, &l)| l && s >= t).count();
            let fp = sims.iter().zip(labels).filter(|(&s, &l)| !l && s >= t).count();
            (fp as f64 / n as f64, tp as f64 / p as f64)
        })
        .collect()
}

pub fn brute_tpr_at(sims: &[f64], labels: &[bool], target: f64) -> f64 {
    tpr_at_points(&brute_points(sims, labels), target)
}

fn tpr_at_points(points: &[(f64, f64)], target: f64) -> f64 {
    points.iter().filter(|p| p.0 <= target).map(|p| p.1).fold(0.0, f64::max)
}

/// Mann-Whitney form: fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
pub fn brute_auc(sims: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<f64> = sims.iter().zip(labels).filter(|p| *p.1).map(|p| *p.0).collect();
    let neg: Vec<f64> = sims.iter().zip(labels).filter(|p| !*p.1).map(|p| *p.0).collect();
    let mut wins = 0.0;
    for &a in &pos {
        for &b in &neg {
            wins += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Random instance with both classes; odd seeds quantize scores to force ties.
pub fn instance(seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=MAX_PAIRS);
    let shift = rng.random_range(0.0..0.5);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    labels[0] = true;
    labels[1] = false;
    let sims = labels
        .iter()
        .map(|&l| {
            let s: f64 = rng.random_range(-1.0..1.0) + if l { shift } else { 0.0 };
            if seed % 2 == 1 {
                (s * 20.0).round() / 20.0
            } else {
                s
            }
        })
        .collect();
    (sims, labels)
}

/// Fpr targets checked per instance: the reported ones, every fpr the curve
/// passes through and a few random values.
pub fn targets(points: &[(f64, f64)], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut t: Vec<f64> = vec![0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
    t.extend(points.iter().map(|p| p.0));
    t.extend((0..10).map(|_| rng.random_range(0.0..1.0)));
    t
}

/// Number of (instance, target) disagreements over all instances, and the
/// number of comparisons made.
pub fn mismatches() -> (usize, usize) {
    let (mut bad, mut total) = (0, 0);
    for seed in 0..INSTANCES {
        let (sims, labels) = instance(seed);
        let report = roc(&sims, &labels).unwrap();
        let points = brute_points(&sims, &labels);
        for t in targets(&points, seed) {
            total += 1;
            if report.tpr_at_fpr(t) != tpr_at_points(&points, t) {
                bad += 1;
            }
        }
    }
    (bad, total)
}

/// Positives {0.9, 0.6}, negatives {0.7, 0.3}.
pub fn hand_example() -> (f64, f64) {
    let r = roc(&[0.9, 0.6, 0.7, 0.3], &[true, true, false, false]).unwrap();
    (r.tpr_at_fpr(0.0), r.tpr_at_fpr(0.5))
}
