use crate::manifest::ManifestRecord;
use crate::{FqaError, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateGroup {
    pub template_id: String,
    pub image_ids: Vec<String>,
}

impl TemplateGroup {
    pub fn validate(&self) -> Result<()> {
        if self.image_ids.is_empty() {
            return Err(FqaError::invalid(format!("template {} has no images", self.template_id)));
        }
        let unique: BTreeSet<&String> = self.image_ids.iter().collect();
        if unique.len() != self.image_ids.len() {
            return Err(FqaError::invalid(format!("template {} lists an image twice", self.template_id)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairLabel {
    pub template_a: String,
    pub template_b: String,
    pub same: bool,
}

/// Cosine similarity; rejects zero vectors and length mismatches.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(FqaError::invalid(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(FqaError::invalid("cosine of a zero-norm vector is undefined"));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Groups records by `template_id` (sorted by template id, members in
/// manifest order) and returns each template's identity alongside.
pub fn templates_from_manifest(records: &[ManifestRecord]) -> Result<Vec<(TemplateGroup, String)>> {
    let mut groups: BTreeMap<&str, (Vec<String>, &str)> = BTreeMap::new();
    for r in records {
        let Some(t) = r.template_id.as_deref() else {
            return Err(FqaError::invalid(format!("record {} has no template_id", r.image_id)));
        };
        let entry = groups.entry(t).or_insert((Vec::new(), r.identity.as_str()));
        if entry.1 != r.identity {
            return Err(FqaError::invalid(format!(
                "template {t} mixes identities {} and {}",
                entry.1, r.identity
            )));
        }
        entry.0.push(r.image_id.clone());
    }
    Ok(groups
        .into_iter()
        .map(|(t, (ids, identity))| {
            (
                TemplateGroup {
                    template_id: t.to_string(),
                    image_ids: ids,
                },
                identity.to_string(),
            )
        })
        .collect())
}

/// Every unordered pair of distinct templates, labelled by identity.
pub fn make_pairs(templates: &[(TemplateGroup, String)]) -> Vec<PairLabel> {
    let mut pairs = Vec::new();
    for (i, (a, ida)) in templates.iter().enumerate() {
        for (b, idb) in &templates[i + 1..] {
            pairs.push(PairLabel {
                template_a: a.template_id.clone(),
                template_b: b.template_id.clone(),
                same: ida == idb,
            });
        }
    }
    pairs
}

/// Cosine similarity of each pair's template features, in pair order.
pub fn verify_pairs(features: &BTreeMap<String, Vec<f64>>, pairs: &[PairLabel]) -> Result<Vec<f64>> {
    let get = |t: &str| {
        features
            .get(t)
            .ok_or_else(|| FqaError::invalid(format!("no feature for template {t}")))
    };
    pairs
        .iter()
        .map(|p| {
            if p.template_a == p.template_b {
                return Err(FqaError::invalid(format!("pair compares template {} with itself", p.template_a)));
            }
            cosine(get(&p.template_a)?, get(&p.template_b)?)
        })
        .collect()
}
