//! Quality labels from a recognizer's embedding geometry: the cosine
//! between an image's feature and its identity's classifier weight row.

use crate::eval::cosine;
use crate::manifest::ManifestRecord;
use crate::model::{Checkpoint, NetworkKind};
use crate::preprocess::{batch, load_records, UnreadablePolicy};
use crate::sampler::{bin_scores, Histogram};
use crate::{FqaError, Result};
use fqa_tensor::par;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

/// Cosine similarity between a feature `f` and a class center `u`.
pub fn quality_score(f: &[f64], u: &[f64]) -> Result<f64> {
    cosine(f, u)
}

/// Maps a cosine in [-1, 1] to a score in [0, 1].
pub fn unit_map(cosine: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&cosine) {
        return Err(FqaError::invalid(format!("cosine {cosine} outside [-1, 1]")));
    }
    Ok((cosine + 1.0) / 2.0)
}

/// Classifier weight rows, one per identity.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassCenters {
    pub classes: Vec<String>,
    pub dim: usize,
    /// Row-major `classes.len() x dim`.
    pub weights: Vec<f32>,
}

impl ClassCenters {
    pub fn row(&self, y: usize) -> &[f32] {
        &self.weights[y * self.dim..(y + 1) * self.dim]
    }

    pub fn index_of(&self, identity: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == identity)
    }
}

pub fn extract_centers(ckpt: &Checkpoint) -> Result<ClassCenters> {
    if ckpt.network.kind() != NetworkKind::Recognizer {
        return Err(FqaError::invalid("checkpoint is a quality network and has no classifier"));
    }
    let w = ckpt.network.classifier_weight().expect("recognizers have a classifier");
    let (k, dim) = (w.shape()[0], w.shape()[1]);
    if ckpt.classes.len() != k {
        return Err(FqaError::invalid(format!(
            "checkpoint lists {} classes for a {k}-way classifier",
            ckpt.classes.len()
        )));
    }
    let centers = ClassCenters {
        classes: ckpt.classes.clone(),
        dim,
        weights: w.data().to_vec(),
    };
    if let Some(y) = (0..k).find(|&y| centers.row(y).iter().all(|&v| v == 0.0)) {
        return Err(FqaError::invalid(format!("class center of {} has zero norm", centers.classes[y])));
    }
    Ok(centers)
}

/// Recognizer features, one row per image.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    pub image_ids: Vec<String>,
    pub dim: usize,
    pub rows: Vec<f32>,
    /// Images that could not be decoded (skip policy only).
    pub skipped: Vec<PathBuf>,
}

impl EmbeddingSet {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }
}

/// Inference-mode features for every record, decoded and embedded
/// `batch_size` images at a time. Batches run in parallel.
pub fn extract_features(
    ckpt: &Checkpoint,
    records: &[ManifestRecord],
    root: &Path,
    batch_size: usize,
    policy: UnreadablePolicy,
) -> Result<EmbeddingSet> {
    if ckpt.network.kind() != NetworkKind::Recognizer {
        return Err(FqaError::invalid("feature extraction needs a recognizer checkpoint"));
    }
    let bs = batch_size.max(1);
    let norm = &ckpt.normalization;
    let chunks: Vec<&[ManifestRecord]> = records.chunks(bs).collect();
    let parts = par::map_slice(&chunks, |chunk| -> Result<_> {
        let loaded = load_records(chunk, root, norm, policy)?;
        let idx: Vec<usize> = (0..loaded.samples.len()).collect();
        let emb = if idx.is_empty() {
            None
        } else {
            Some(ckpt.network.embed(batch(&loaded.samples, &idx, norm))?.0)
        };
        Ok((loaded, emb))
    });
    let dim = ckpt.network.spec().embedding_dim.unwrap_or(0);
    let mut set = EmbeddingSet {
        image_ids: Vec::with_capacity(records.len()),
        dim,
        rows: Vec::with_capacity(records.len() * dim),
        skipped: Vec::new(),
    };
    for (chunk, part) in chunks.iter().zip(parts) {
        let (loaded, emb) = part?;
        for &i in &loaded.indices {
            set.image_ids.push(chunk[i].image_id.clone());
        }
        if let Some(e) = emb {
            set.rows.extend_from_slice(e.data());
        }
        set.skipped.extend(loaded.skipped);
    }
    if set.rows.iter().any(|v| !v.is_finite()) {
        return Err(FqaError::invalid("recognizer produced non-finite features"));
    }
    Ok(set)
}

#[derive(Clone, Debug)]
pub struct LabelOutput {
    pub records: Vec<ManifestRecord>,
    pub histogram: Histogram,
    pub skipped: Vec<PathBuf>,
}

/// Adds `raw_cosine` and `score` to every record. Records whose image was
/// skipped are dropped.
pub fn label_dataset(
    ckpt: &Checkpoint,
    records: &[ManifestRecord],
    root: &Path,
    batch_size: usize,
    num_bins: usize,
    policy: UnreadablePolicy,
) -> Result<LabelOutput> {
    let centers = extract_centers(ckpt)?;
    let index: HashMap<&str, usize> = centers.classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    for r in records {
        if !index.contains_key(r.identity.as_str()) {
            return Err(FqaError::invalid(format!(
                "record {}: identity `{}` is not a class of the recognizer",
                r.image_id, r.identity
            )));
        }
    }
    let features = extract_features(ckpt, records, root, batch_size, policy)?;
    let by_id: HashMap<&str, &ManifestRecord> = records.iter().map(|r| (r.image_id.as_str(), r)).collect();
    let mut out = Vec::with_capacity(features.image_ids.len());
    for (i, id) in features.image_ids.iter().enumerate() {
        let mut r = by_id[id.as_str()].clone();
        let f: Vec<f64> = features.row(i).iter().map(|&v| f64::from(v)).collect();
        let u: Vec<f64> = centers.row(index[r.identity.as_str()]).iter().map(|&v| f64::from(v)).collect();
        let c = quality_score(&f, &u).map_err(|e| FqaError::invalid(format!("record {id}: {e}")))?;
        r.raw_cosine = Some(c);
        r.score = Some(unit_map(c)?);
        out.push(r);
    }
    let histogram = bin_scores(&out, num_bins)?;
    Ok(LabelOutput {
        records: out,
        histogram,
        skipped: features.skipped,
    })
}
