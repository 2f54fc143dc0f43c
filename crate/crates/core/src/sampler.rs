//! Identity filtering and histogram-flattening resampling of scored
//! manifests.

use crate::artifact::derive_seed;
use crate::manifest::ManifestRecord;
use crate::{FqaError, Result};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Keeps records whose identity has at least `threshold` images, in input
/// order.
pub fn filter_identities(records: &[ManifestRecord], threshold: usize) -> Vec<ManifestRecord> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *counts.entry(r.identity.as_str()).or_default() += 1;
    }
    let kept: Vec<ManifestRecord> = records
        .iter()
        .filter(|r| counts[r.identity.as_str()] >= threshold)
        .cloned()
        .collect();
    if kept.is_empty() && !records.is_empty() {
        log::warn!("no identity has {threshold} or more images; the filtered manifest is empty");
    }
    kept
}

/// Equal-width histogram over [0, 1]. Bin `i` covers `[i/B, (i+1)/B)`; the
/// last bin also holds 1.0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self) -> Vec<f64> {
        let b = self.num_bins();
        (0..=b).map(|i| i as f64 / b as f64).collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn nonempty(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Bin of `score`, consistent with [`Histogram::edges`]: `score * B` can
/// round across an edge, so the guess is corrected against the edges.
pub fn bin_index(score: f64, num_bins: usize) -> usize {
    let b = num_bins as f64;
    let mut i = ((score * b).floor().max(0.0) as usize).min(num_bins - 1);
    if i > 0 && score < i as f64 / b {
        i -= 1;
    } else if i + 1 < num_bins && score >= (i + 1) as f64 / b {
        i += 1;
    }
    i
}

fn scored(r: &ManifestRecord) -> Result<f64> {
    match r.score {
        Some(s) if (0.0..=1.0).contains(&s) => Ok(s),
        Some(s) => Err(FqaError::invalid(format!("record {}: score {s} outside [0, 1]", r.image_id))),
        None => Err(FqaError::invalid(format!("record {} has no score", r.image_id))),
    }
}

pub fn bin_scores(records: &[ManifestRecord], num_bins: usize) -> Result<Histogram> {
    if num_bins < 1 {
        return Err(FqaError::invalid("histogram needs at least one bin"));
    }
    let mut counts = vec![0; num_bins];
    for r in records {
        counts[bin_index(scored(r)?, num_bins)] += 1;
    }
    Ok(Histogram { counts })
}

/// Largest over smallest non-empty bin count.
pub fn flatness_ratio(h: &Histogram) -> Result<f64> {
    let nonempty = h.counts.iter().copied().filter(|&c| c > 0);
    let (min, max) = nonempty.fold((usize::MAX, 0), |(lo, hi), c| (lo.min(c), hi.max(c)));
    if max == 0 {
        return Err(FqaError::invalid("flatness of an empty histogram is undefined"));
    }
    Ok(max as f64 / min as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub min_images_per_identity: usize,
    pub num_bins: usize,
    pub low_fraction: f64,
    pub high_fraction: f64,
    /// Total output size to aim for; `None` keeps the input size.
    pub target_budget: Option<usize>,
    pub max_oversample_factor: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            min_images_per_identity: 100,
            num_bins: 100,
            low_fraction: 0.10,
            high_fraction: 0.05,
            target_budget: None,
            max_oversample_factor: 10.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bins < 2 {
            return Err(FqaError::invalid(format!("num_bins must be >= 2, got {}", self.num_bins)));
        }
        if !(self.low_fraction >= 0.0 && self.high_fraction >= 0.0 && self.low_fraction + self.high_fraction < 1.0) {
            return Err(FqaError::invalid(format!(
                "low_fraction {} and high_fraction {} must be non-negative with sum < 1",
                self.low_fraction, self.high_fraction
            )));
        }
        if !(self.max_oversample_factor >= 1.0) {
            return Err(FqaError::invalid("max_oversample_factor must be >= 1"));
        }
        Ok(())
    }

    /// Which bins are oversampled: the lowest `low_fraction` and the
    /// highest `high_fraction` of the score range.
    pub fn is_tail_bin(&self, bin: usize) -> bool {
        let low = (self.low_fraction * self.num_bins as f64).round() as usize;
        let high = (self.high_fraction * self.num_bins as f64).round() as usize;
        bin < low || bin >= self.num_bins - high
    }
}

/// Flattens the score histogram towards `m = round(budget / nonempty_bins)`
/// records per bin. Tail bins below `m` gain duplicates (drawn with
/// replacement, at most `max_oversample_factor` times the original count);
/// any bin above `m` is subsampled to `m` without replacement; other bins
/// are kept whole. Duplicates get ids `<id>#<k>`.
pub fn smooth_sample(records: &[ManifestRecord], cfg: &SamplerConfig) -> Result<Vec<ManifestRecord>> {
    cfg.validate()?;
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); cfg.num_bins];
    for (i, r) in records.iter().enumerate() {
        bins[bin_index(scored(r)?, cfg.num_bins)].push(i);
    }
    let nonempty = bins.iter().filter(|b| !b.is_empty()).count();
    if nonempty == 0 {
        return Ok(Vec::new());
    }
    let budget = cfg.target_budget.unwrap_or(records.len());
    if budget < nonempty {
        return Err(FqaError::invalid(format!(
            "target budget {budget} is smaller than the {nonempty} non-empty bins"
        )));
    }
    let m = (budget as f64 / nonempty as f64).round() as usize;
    let mut out = Vec::with_capacity(budget);
    let mut dup_count: HashMap<usize, usize> = HashMap::new();
    for (b, members) in bins.iter().enumerate() {
        let c = members.len();
        if c == 0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("bin{b}")));
        if c >= m {
            let mut keep = index::sample(&mut rng, c, m).into_vec();
            keep.sort_unstable();
            out.extend(keep.into_iter().map(|k| records[members[k]].clone()));
            continue;
        }
        out.extend(members.iter().map(|&k| records[k].clone()));
        if cfg.is_tail_bin(b) {
            let cap = (c as f64 * cfg.max_oversample_factor).floor() as usize;
            let target = m.min(cap);
            for _ in c..target {
                let src = members[rng.random_range(0..c)];
                let k = dup_count.entry(src).or_default();
                *k += 1;
                let mut dup = records[src].clone();
                dup.image_id = format!("{}#{}", dup.image_id, k);
                out.push(dup);
            }
        }
    }
    Ok(out)
}

/// Id of the input record a (possibly duplicated) output record came from.
pub fn source_id(image_id: &str) -> &str {
    image_id.rsplit_once('#').map_or(image_id, |(base, _)| base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(scores: &[f64]) -> Vec<ManifestRecord> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| ManifestRecord::new(format!("r{i}"), format!("{i}.png"), "p").with_score(s))
            .collect()
    }

    #[test]
    fn filter_example() {
        let mut r = recs(&[0.1, 0.2, 0.3, 0.4]);
        r[3].identity = "B".into();
        for x in &mut r[..3] {
            x.identity = "A".into();
        }
        let kept = filter_identities(&r, 2);
        assert_eq!(kept.len(), 3);
        assert!(kept.iter().all(|x| x.identity == "A"));
        assert_eq!(filter_identities(&r, 1), r);
        assert!(filter_identities(&r, 5).is_empty());
    }

    #[test]
    fn bin_edges() {
        let h = bin_scores(&recs(&[0.0, 0.5, 1.0]), 2).unwrap();
        assert_eq!(h.counts, vec![1, 2]);
        assert_eq!(h.edges(), vec![0.0, 0.5, 1.0]);
        let h = bin_scores(&recs(&[0.3; 7]), 10).unwrap();
        assert_eq!(h.counts[3], 7);
        assert!(bin_scores(&[ManifestRecord::new("x", "x", "p")], 10).is_err());
    }

    #[test]
    fn flatness_examples() {
        assert_eq!(flatness_ratio(&Histogram { counts: vec![4, 0, 4] }).unwrap(), 1.0);
        assert_eq!(flatness_ratio(&Histogram { counts: vec![10, 1] }).unwrap(), 10.0);
        assert!(flatness_ratio(&Histogram { counts: vec![0, 0] }).is_err());
    }

    #[test]
    fn tail_and_middle_rule() {
        let mut scores = vec![0.005; 5];
        scores.extend(vec![0.5; 1000]);
        scores.extend(vec![0.995; 5]);
        let cfg = SamplerConfig {
            target_budget: Some(300),
            ..SamplerConfig::default()
        };
        let out = smooth_sample(&recs(&scores), &cfg).unwrap();
        let h = bin_scores(&out, 100).unwrap();
        assert_eq!((h.counts[0], h.counts[50], h.counts[99]), (50, 100, 50));
        crate::manifest::check_unique_ids(&out).unwrap();
    }

    #[test]
    fn budget_below_bins_rejected() {
        let cfg = SamplerConfig {
            target_budget: Some(1),
            ..SamplerConfig::default()
        };
        assert!(smooth_sample(&recs(&[0.1, 0.9]), &cfg).is_err());
    }

    #[test]
    fn source_ids() {
        assert_eq!(source_id("img_3#2"), "img_3");
        assert_eq!(source_id("img_3"), "img_3");
    }
}
