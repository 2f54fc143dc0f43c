use crate::config::{require, resolve};
use crate::error::{CliError, Result};
use crate::output::{self, config_value, metadata, sidecar_field, write_sidecar};
use crate::Globals;
use fqa_core::eval::{
    evaluate_selections, make_pairs, score_records, select_all, templates_from_manifest, PairLabel, Scorer, ScorerKind, Selection,
    TemplateGroup,
};
use fqa_core::manifest::{write_json, write_jsonl};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

/// One line of a score file. Scores are stored in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub image_id: String,
    pub score: f64,
}

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreArgs {
    /// fqnet, random, blur, jpeg or combination.
    #[arg(long)]
    pub scorer: Option<String>,
    /// tinyFQnet checkpoint (fqnet scorer only).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Blur and JPEG weights of the combination scorer.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(skip)]
    pub seed: Option<u64>,
}

pub fn score(g: &Globals, a: ScoreArgs) -> Result<()> {
    let a = resolve(g, &a)?;
    let kind: ScorerKind = require(a.scorer.as_deref(), "scorer")?
        .parse()
        .map_err(|e| CliError::Usage(format!("--scorer: {e}")))?;
    let manifest = require(a.manifest.clone(), "manifest")?;
    let images = require(a.images.clone(), "images")?;
    let out = require(a.out.clone(), "out")?;
    let mut inputs: Vec<(&str, &Path)> = vec![("manifest", &manifest)];
    let scorer = match kind {
        ScorerKind::Fqnet => {
            let model = a
                .model
                .as_deref()
                .ok_or_else(|| CliError::Usage("the fqnet scorer needs --model".into()))?;
            inputs.push(("model", model));
            Scorer::Fqnet(Box::new(output::checkpoint(model)?))
        }
        ScorerKind::Random => Scorer::Random { seed: a.seed.unwrap_or(0) },
        ScorerKind::Blur => Scorer::Blur,
        ScorerKind::Jpeg => Scorer::Jpeg,
        ScorerKind::Combination => {
            let w = a.weights.clone().unwrap_or_else(|| vec![0.5, 0.5]);
            let weights: [f64; 2] = w
                .try_into()
                .map_err(|w: Vec<f64>| CliError::Usage(format!("--weights takes 2 values, got {}", w.len())))?;
            Scorer::Combination { weights }
        }
    };
    let records = output::manifest(&manifest)?;
    let scores = score_records(&scorer, &records, &images, a.batch_size.unwrap_or(64))?;
    let lines: Vec<ScoreRecord> = records
        .iter()
        .zip(&scores)
        .map(|(r, &s)| ScoreRecord {
            image_id: r.image_id.clone(),
            score: s,
        })
        .collect();
    write_jsonl(&out, &lines)?;
    let meta = metadata("score", config_value(&a), &inputs)?;
    write_sidecar(&out, &meta, json!({ "scorer": kind }))?;
    if !scores.is_empty() {
        // Displayed on the 0-100 scale; the file keeps [0, 1].
        let pct = |v: f64| 100.0 * v;
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "scorer {kind}: {} images, mean {:.2}, min {:.2}, max {:.2} (0-100)",
            scores.len(),
            pct(mean),
            pct(min),
            pct(max)
        );
    }
    Ok(())
}

/// Scorer kind recorded in an artifact's sidecar.
fn recorded_scorer(path: &Path) -> Value {
    sidecar_field(path, "scorer").unwrap_or(Value::Null)
}

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectArgs {
    /// Score file written by `score`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Template groups (JSON lines of template_id and image_ids).
    #[arg(long, conflicts_with = "manifest")]
    pub templates: Option<PathBuf>,
    /// Manifest with template_id on every record, used instead of --templates.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    pub seed: Option<u64>,
}

pub fn select(g: &Globals, a: SelectArgs) -> Result<()> {
    let a = resolve(g, &a)?;
    let scores_path = require(a.scores.clone(), "scores")?;
    let out = require(a.out.clone(), "out")?;
    let (groups, source): (Vec<TemplateGroup>, (&str, PathBuf)) = match (&a.templates, &a.manifest) {
        (Some(t), None) => (output::jsonl(t)?, ("templates", t.clone())),
        (None, Some(m)) => {
            let records = output::manifest(m)?;
            let groups = templates_from_manifest(&records).map_err(|e| CliError::input(m, e))?;
            (groups.into_iter().map(|(t, _)| t).collect(), ("manifest", m.clone()))
        }
        _ => return Err(CliError::Usage("give exactly one of --templates and --manifest".into())),
    };
    let lines: Vec<ScoreRecord> = output::jsonl(&scores_path)?;
    let scores: HashMap<String, f64> = lines.into_iter().map(|s| (s.image_id, s.score)).collect();
    let selections = select_all(&groups, &scores).map_err(|e| CliError::input(&scores_path, e))?;
    write_jsonl(&out, &selections)?;
    let scorer = recorded_scorer(&scores_path);
    let meta = metadata("select", config_value(&a), &[("scores", &scores_path), (source.0, &source.1)])?;
    write_sidecar(&out, &meta, json!({ "scorer": scorer }))?;
    println!("selected one image for each of {} templates", selections.len());
    Ok(())
}

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateArgs {
    /// Recognizer checkpoint used to embed the selected images.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Evaluation manifest holding the selected images.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Selection file written by `select`.
    #[arg(long)]
    pub selections: Option<PathBuf>,
    /// Template pairs; derived from the manifest when omitted.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Report to write (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Folds of the accuracy estimate.
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(skip)]
    pub seed: Option<u64>,
}

pub fn evaluate(g: &Globals, a: EvaluateArgs) -> Result<()> {
    let a = resolve(g, &a)?;
    let model = require(a.model.clone(), "model")?;
    let manifest = require(a.manifest.clone(), "manifest")?;
    let images = require(a.images.clone(), "images")?;
    let selections_path = require(a.selections.clone(), "selections")?;
    let out = require(a.out.clone(), "out")?;
    let ckpt = output::checkpoint(&model)?;
    let records = output::manifest(&manifest)?;
    let selections: Vec<Selection> = output::jsonl(&selections_path)?;
    let mut inputs: Vec<(&str, &Path)> = vec![("model", &model), ("manifest", &manifest), ("selections", &selections_path)];
    let pairs: Vec<PairLabel> = match &a.pairs {
        Some(p) => {
            inputs.push(("pairs", p));
            output::jsonl(p)?
        }
        None => make_pairs(&templates_from_manifest(&records).map_err(|e| CliError::input(&manifest, e))?),
    };
    let report = evaluate_selections(
        &ckpt,
        &selections,
        &records,
        &images,
        &pairs,
        a.folds.unwrap_or(10),
        a.seed.unwrap_or(0),
        a.batch_size.unwrap_or(64),
    )?;
    let meta = metadata("evaluate", config_value(&a), &inputs)?;
    let scorer = recorded_scorer(&selections_path);
    write_json(
        &out,
        &json!({
            "metadata": meta,
            "scorer": scorer,
            "tpr_at": report.verification.tpr_at,
            "report": report,
        }),
    )?;
    let label = scorer.as_str().unwrap_or("unknown scorer").to_string();
    println!(
        "{label}: {} templates, {} pairs, auc {:.4}, {}-fold accuracy {:.4}",
        report.num_templates, report.num_pairs, report.verification.auc, report.kfold.k, report.kfold.mean
    );
    for (fpr, tpr) in &report.verification.tpr_at {
        println!("  tpr@fpr={fpr}: {:.2}", 100.0 * tpr);
    }
    Ok(())
}
