use super::roc::{kfold_accuracy, roc, KFoldReport, VerificationReport};
use super::select::Selection;
use super::verify::{verify_pairs, PairLabel};
use crate::labeler::extract_features;
use crate::manifest::ManifestRecord;
use crate::model::Checkpoint;
use crate::preprocess::UnreadablePolicy;
use crate::{FqaError, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub num_templates: usize,
    pub num_pairs: usize,
    pub verification: VerificationReport,
    pub kfold: KFoldReport,
}

/// Recognizer embedding of each template's selected image.
pub fn template_features(
    ckpt: &Checkpoint,
    selections: &[Selection],
    records: &[ManifestRecord],
    root: &Path,
    batch_size: usize,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let by_id: HashMap<&str, &ManifestRecord> = records.iter().map(|r| (r.image_id.as_str(), r)).collect();
    let chosen = selections
        .iter()
        .map(|s| {
            by_id.get(s.image_id.as_str()).map(|r| (*r).clone()).ok_or_else(|| {
                FqaError::invalid(format!(
                    "template {}: selected image {} is not in the manifest",
                    s.template_id, s.image_id
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let emb = extract_features(ckpt, &chosen, root, batch_size, UnreadablePolicy::Abort)?;
    Ok(selections
        .iter()
        .enumerate()
        .map(|(i, s)| (s.template_id.clone(), emb.row(i).iter().map(|&v| f64::from(v)).collect()))
        .collect())
}

/// Template-level verification of the selected images: ROC over every pair
/// and k-fold accuracy.
pub fn evaluate_selections(
    ckpt: &Checkpoint,
    selections: &[Selection],
    records: &[ManifestRecord],
    root: &Path,
    pairs: &[PairLabel],
    k: usize,
    seed: u64,
    batch_size: usize,
) -> Result<EvaluationReport> {
    let features = template_features(ckpt, selections, records, root, batch_size)?;
    let sims = verify_pairs(&features, pairs)?;
    let labels: Vec<bool> = pairs.iter().map(|p| p.same).collect();
    Ok(EvaluationReport {
        num_templates: features.len(),
        num_pairs: pairs.len(),
        verification: roc(&sims, &labels)?,
        kfold: kfold_accuracy(&sims, &labels, k, seed)?,
    })
}
