use super::parse_choice;
use crate::config::{require, resolve};
use crate::error::{CliError, Result};
use crate::output::{self, config_value, metadata, write_sidecar};
use crate::Globals;
use fqa_core::degrade::{degrade as apply_degradation, DegradationKind, DegradationSpec};
use fqa_core::eval::{make_pairs, templates_from_manifest, TemplateGroup};
use fqa_core::labeler::label_dataset;
use fqa_core::manifest::{write_file, write_jsonl, write_manifest};
use fqa_core::preprocess::{load_rgb, UnreadablePolicy};
use fqa_core::sampler::{bin_scores, filter_identities, flatness_ratio, smooth_sample, SamplerConfig};
use fqa_core::synth::{synthesize, write_images, SynthConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::PathBuf;

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthArgs {
    /// Output directory; receives images/ and the manifests.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub identities: Option<usize>,
    /// Training images per identity.
    #[arg(long)]
    pub per_id: Option<usize>,
    #[arg(long)]
    pub templates_per_id: Option<usize>,
    #[arg(long)]
    pub per_template: Option<usize>,
    /// Image side in pixels.
    #[arg(long)]
    pub size: Option<u32>,
    /// Identity spread in [0, 1].
    #[arg(long)]
    pub spread: Option<f64>,
    /// Per-image nuisance strength in [0, 1].
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(skip)]
    pub seed: Option<u64>,
}

pub fn synth(g: &Globals, a: SynthArgs) -> Result<()> {
    let a = resolve(g, &a)?;
    let out = require(a.out.clone(), "out")?;
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        num_identities: a.identities.unwrap_or(d.num_identities),
        images_per_identity: a.per_id.unwrap_or(d.images_per_identity),
        templates_per_identity: a.templates_per_id.unwrap_or(d.templates_per_identity),
        images_per_template: a.per_template.unwrap_or(d.images_per_template),
        image_size: a.size.unwrap_or(d.image_size),
        identity_spread: a.spread.unwrap_or(d.identity_spread),
        jitter: a.jitter.unwrap_or(d.jitter),
        seed: a.seed.unwrap_or(0),
        ..d
    };
    let data = synthesize(&cfg)?;
    write_images(&data, &out.join("images"))?;
    let meta = metadata("synth", json!({ "args": config_value(&a), "synth": cfg }), &[])?;

    let train = out.join("train.jsonl");
    write_manifest(&train, &data.train)?;
    write_sidecar(&train, &meta, output::empty())?;
    let eval = out.join("eval.jsonl");
    write_manifest(&eval, &data.eval)?;
    write_sidecar(&eval, &meta, output::empty())?;
    if !data.eval.is_empty() {
        let templates = templates_from_manifest(&data.eval)?;
        let groups: Vec<TemplateGroup> = templates.iter().map(|(t, _)| t.clone()).collect();
        let path = out.join("templates.jsonl");
        write_jsonl(&path, &groups)?;
        write_sidecar(&path, &meta, output::empty())?;
        let path = out.join("pairs.jsonl");
        write_jsonl(&path, &make_pairs(&templates))?;
        write_sidecar(&path, &meta, output::empty())?;
    }
    println!(
        "wrote {} training and {} evaluation images to {}",
        data.train.len(),
        data.eval.len(),
        out.join("images").display()
    );
    Ok(())
}

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelArgs {
    /// Recognizer checkpoint.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Root that manifest paths are relative to.
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Histogram bins reported alongside the labels.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// `abort` or `skip`.
    #[arg(long)]
    pub on_unreadable: Option<String>,
    #[arg(skip)]
    pub seed: Option<u64>,
}

pub fn label(g: &Globals, a: LabelArgs) -> Result<()> {
    let a = resolve(g, &a)?;
    let model = require(a.model.clone(), "model")?;
    let manifest = require(a.manifest.clone(), "manifest")?;
    let images = require(a.images.clone(), "images")?;
    let out = require(a.out.clone(), "out")?;
    let policy: UnreadablePolicy = match &a.on_unreadable {
        Some(s) => parse_choice(s, "on-unreadable")?,
        None => UnreadablePolicy::Abort,
    };
    let ckpt = output::checkpoint(&model)?;
    let records = output::manifest(&manifest)?;
    let labeled = label_dataset(&ckpt, &records, &images, a.batch_size.unwrap_or(64), a.bins.unwrap_or(100), policy)?;
    write_manifest(&out, &labeled.records)?;
    let meta = metadata("label", config_value(&a), &[("model", &model), ("manifest", &manifest)])?;
    write_sidecar(&out, &meta, json!({ "histogram": labeled.histogram, "skipped": labeled.skipped }))?;
    println!(
        "labelled {} images ({} skipped), {} of {} bins occupied",
        labeled.records.len(),
        labeled.skipped.len(),
        labeled.histogram.nonempty(),
        labeled.histogram.num_bins()
    );
    Ok(())
}

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleArgs {
    /// Labelled manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output size to aim for (default: the filtered input size).
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Fraction of the score range oversampled at the low end.
    #[arg(long)]
    pub low_frac: Option<f64>,
    /// Fraction of the score range oversampled at the high end.
    #[arg(long)]
    pub high_frac: Option<f64>,
    /// Identities with fewer images are dropped.
    #[arg(long)]
    pub min_per_id: Option<usize>,
    #[arg(long)]
    pub max_oversample: Option<f64>,
    #[arg(skip)]
    pub seed: Option<u64>,
}

pub fn sample(g: &Globals, a: SampleArgs) -> Result<()> {
    let a = resolve(g, &a)?;
    let manifest = require(a.manifest.clone(), "manifest")?;
    let out = require(a.out.clone(), "out")?;
    let d = SamplerConfig::default();
    let cfg = SamplerConfig {
        min_images_per_identity: a.min_per_id.unwrap_or(d.min_images_per_identity),
        num_bins: a.bins.unwrap_or(d.num_bins),
        low_fraction: a.low_frac.unwrap_or(d.low_fraction),
        high_fraction: a.high_frac.unwrap_or(d.high_fraction),
        target_budget: a.budget,
        max_oversample_factor: a.max_oversample.unwrap_or(d.max_oversample_factor),
        seed: a.seed.unwrap_or(0),
    };
    cfg.validate()?;
    let records = output::manifest(&manifest)?;
    let kept = filter_identities(&records, cfg.min_images_per_identity);
    if kept.is_empty() {
        return Err(CliError::Usage(format!(
            "no identity in {} has {} or more images; lower --min-per-id",
            manifest.display(),
            cfg.min_images_per_identity
        )));
    }
    let sampled = smooth_sample(&kept, &cfg)?;
    let before = bin_scores(&kept, cfg.num_bins)?;
    let after = bin_scores(&sampled, cfg.num_bins)?;
    let (fb, fa) = (flatness_ratio(&before)?, flatness_ratio(&after)?);
    write_manifest(&out, &sampled)?;
    let meta = metadata(
        "sample",
        json!({ "args": config_value(&a), "sampler": cfg }),
        &[("manifest", &manifest)],
    )?;
    write_sidecar(
        &out,
        &meta,
        json!({
            "input_records": records.len(),
            "filtered_records": kept.len(),
            "histogram_before": before,
            "histogram_after": after,
            "flatness_before": fb,
            "flatness_after": fa,
        }),
    )?;
    println!(
        "kept {} of {} records after identity filtering; sampled {}; flatness {fb:.2} -> {fa:.2}",
        kept.len(),
        records.len(),
        sampled.len()
    );
    Ok(())
}

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradeArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output image; the format follows the extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// gaussian_blur, jpeg_recompress, gaussian_noise, occlusion or downscale.
    #[arg(long)]
    pub kind: Option<String>,
    /// Strength in [0, 1].
    #[arg(long)]
    pub severity: Option<f64>,
    #[arg(skip)]
    pub seed: Option<u64>,
}

pub fn degrade(g: &Globals, a: DegradeArgs) -> Result<()> {
    let a = resolve(g, &a)?;
    let input = require(a.input.clone(), "input")?;
    let out = require(a.out.clone(), "out")?;
    let kind: DegradationKind = require(a.kind.as_deref(), "kind")?
        .parse()
        .map_err(|e| CliError::Usage(format!("--kind: {e}")))?;
    let severity = require(a.severity, "severity")?;
    let img = load_rgb(&input)?;
    let spec = DegradationSpec::new(kind, severity, a.seed.unwrap_or(0));
    let degraded = apply_degradation(&img, &spec)?;
    let format = image::ImageFormat::from_path(&out).map_err(|e| CliError::Usage(format!("--out {}: {e}", out.display())))?;
    let mut buf = std::io::Cursor::new(Vec::new());
    degraded
        .write_to(&mut buf, format)
        .map_err(|e| CliError::Usage(format!("--out {}: {e}", out.display())))?;
    write_file(&out, buf.get_ref())?;
    let meta = metadata("degrade", config_value(&a), &[("input", &input)])?;
    write_sidecar(&out, &meta, json!({ "degradation": spec }))?;
    Ok(())
}
