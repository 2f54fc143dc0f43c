use crate::{FqaError, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Operating points reported in `tpr_at`, keyed "1e-1" .. "1e-5".
pub const FPR_TARGETS: [(&str, f64); 5] = [("1e-1", 1e-1), ("1e-2", 1e-2), ("1e-3", 1e-3), ("1e-4", 1e-4), ("1e-5", 1e-5)];

/// One ROC operating point: pairs with similarity `>= threshold` are
/// accepted. `threshold: None` is the reject-everything point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Sorted by increasing fpr (decreasing threshold).
    pub points: Vec<RocPoint>,
    /// Step convention: the largest tpr among points with fpr <= target.
    pub tpr_at: BTreeMap<String, f64>,
    pub auc: f64,
    pub num_positive: usize,
    pub num_negative: usize,
}

impl VerificationReport {
    pub fn tpr_at_fpr(&self, target: f64) -> f64 {
        self.points.iter().filter(|p| p.fpr <= target).map(|p| p.tpr).fold(0.0, f64::max)
    }
}

fn check_labels(similarities: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if similarities.len() != labels.len() {
        return Err(FqaError::invalid(format!(
            "{} similarities but {} labels",
            similarities.len(),
            labels.len()
        )));
    }
    if similarities.iter().any(|s| s.is_nan()) {
        return Err(FqaError::invalid("similarities contain NaN"));
    }
    let p = labels.iter().filter(|&&l| l).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(FqaError::invalid("ROC needs at least one positive and one negative pair"));
    }
    Ok((p, n))
}

/// ROC over every distinct similarity threshold.
pub fn roc(similarities: &[f64], labels: &[bool]) -> Result<VerificationReport> {
    let (np, nn) = check_labels(similarities, labels)?;
    let mut order: Vec<usize> = (0..similarities.len()).collect();
    order.sort_by(|&a, &b| similarities[b].total_cmp(&similarities[a]));
    let mut points = vec![RocPoint {
        threshold: None,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = similarities[order[i]];
        while i < order.len() && similarities[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: Some(t),
            fpr: fp as f64 / nn as f64,
            tpr: tp as f64 / np as f64,
        });
    }
    let auc = points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
    let mut report = VerificationReport {
        points,
        tpr_at: BTreeMap::new(),
        auc,
        num_positive: np,
        num_negative: nn,
    };
    for (key, target) in FPR_TARGETS {
        let v = report.tpr_at_fpr(target);
        report.tpr_at.insert(key.to_string(), v);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KFoldReport {
    pub k: usize,
    pub mean: f64,
    pub std: f64,
    pub fold_accuracies: Vec<f64>,
    /// Threshold chosen on each fold's training part (`None` = reject all).
    /// Candidates are the lowest training similarity and the midpoints
    /// between consecutive distinct training similarities.
    pub thresholds: Vec<Option<f64>>,
}

fn best_threshold(sims: &[f64], labels: &[bool], idx: &[usize]) -> Option<f64> {
    let mut order: Vec<usize> = idx.to_vec();
    order.sort_by(|&a, &b| sims[a].total_cmp(&sims[b]));
    // Threshold at the lowest value accepts everything; walking upwards
    // moves each tie group from accepted to rejected. Candidates between
    // groups sit at the midpoint.
    let positives = order.iter().filter(|&&i| labels[i]).count();
    let mut correct = positives;
    let (mut best_correct, mut best) = (correct, order.first().map(|&i| sims[i]));
    let mut i = 0;
    while i < order.len() {
        let t = sims[order[i]];
        while i < order.len() && sims[order[i]] == t {
            if labels[order[i]] {
                correct -= 1;
            } else {
                correct += 1;
            }
            i += 1;
        }
        let next = order.get(i).map(|&j| t + (sims[j] - t) / 2.0);
        if correct > best_correct {
            best_correct = correct;
            best = next;
        }
    }
    best
}

fn accuracy(sims: &[f64], labels: &[bool], idx: &[usize], threshold: Option<f64>) -> f64 {
    let hits = idx
        .iter()
        .filter(|&&i| threshold.is_some_and(|t| sims[i] >= t) == labels[i])
        .count();
    hits as f64 / idx.len() as f64
}

/// Stratified k-fold verification accuracy. Each fold's threshold maximizes
/// accuracy on the other folds (ties go to the lowest threshold).
pub fn kfold_accuracy(similarities: &[f64], labels: &[bool], k: usize, seed: u64) -> Result<KFoldReport> {
    check_labels(similarities, labels)?;
    if k < 2 || similarities.len() < k {
        return Err(FqaError::invalid(format!(
            "k-fold needs k >= 2 and at least k pairs, got k={k} with {} pairs",
            similarities.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold = vec![0usize; labels.len()];
    for (j, &i) in pos.iter().chain(&neg).enumerate() {
        fold[i] = j % k;
    }
    let mut fold_accuracies = Vec::with_capacity(k);
    let mut thresholds = Vec::with_capacity(k);
    for f in 0..k {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| fold[i] == f);
        let train_pos = train.iter().filter(|&&i| labels[i]).count();
        if train_pos == 0 || train_pos == train.len() {
            return Err(FqaError::invalid(format!("training part of fold {f} contains a single class")));
        }
        let t = best_threshold(similarities, labels, &train);
        thresholds.push(t);
        fold_accuracies.push(accuracy(similarities, labels, &test, t));
    }
    Ok(KFoldReport {
        k,
        mean: crate::stats::mean(&fold_accuracies),
        std: crate::stats::std_dev(&fold_accuracies),
        fold_accuracies,
        thresholds,
    })
}
