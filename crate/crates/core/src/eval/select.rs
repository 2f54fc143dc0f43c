use super::verify::TemplateGroup;
use crate::{FqaError, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub template_id: String,
    pub image_id: String,
    pub score: f64,
}

/// Highest-scoring member; ties go to the lexicographically smallest id.
pub fn select_best(group: &TemplateGroup, scores: &HashMap<String, f64>) -> Result<String> {
    group.validate()?;
    let mut best: Option<(&str, f64)> = None;
    for id in &group.image_ids {
        let s = *scores
            .get(id)
            .ok_or_else(|| FqaError::invalid(format!("template {}: image {id} has no score", group.template_id)))?;
        if s.is_nan() {
            return Err(FqaError::invalid(format!("image {id} has a NaN score")));
        }
        best = match best {
            Some((bid, bs)) if bs > s || (bs == s && bid < id.as_str()) => Some((bid, bs)),
            _ => Some((id, s)),
        };
    }
    Ok(best.map(|(id, _)| id.to_string()).unwrap())
}

pub fn select_all(groups: &[TemplateGroup], scores: &HashMap<String, f64>) -> Result<Vec<Selection>> {
    groups
        .iter()
        .map(|g| {
            let id = select_best(g, scores)?;
            Ok(Selection {
                template_id: g.template_id.clone(),
                score: scores[&id],
                image_id: id,
            })
        })
        .collect()
}
