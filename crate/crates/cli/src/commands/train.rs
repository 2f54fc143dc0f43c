use super::parse_choice;
use crate::config::{require, resolve};
use crate::error::Result;
use crate::output::{self, config_value, metadata};
use crate::Globals;
use fqa_core::manifest::write_json;
use fqa_core::model::{save_checkpoint, Checkpoint, NetworkSpec};
use fqa_core::trainer::{train_quality, train_recognizer, LossMode, TrainConfig, TrainReport};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};

/// Options shared by both training commands.
#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CommonTrain {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Root that manifest paths are relative to.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Checkpoint to write; the training report goes next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Epochs between learning-rate decays.
    #[arg(long)]
    pub lr_decay_every: Option<usize>,
    #[arg(long)]
    pub lr_decay_factor: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// `abort` or `skip`.
    #[arg(long)]
    pub on_unreadable: Option<String>,
    #[arg(skip)]
    pub seed: Option<u64>,
}

impl CommonTrain {
    fn train_config(&self) -> Result<TrainConfig> {
        let d = TrainConfig::desk();
        let cfg = TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            base_lr: self.lr.unwrap_or(d.base_lr),
            lr_decay_every: self.lr_decay_every.unwrap_or(d.lr_decay_every),
            lr_decay_factor: self.lr_decay_factor.unwrap_or(d.lr_decay_factor),
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            momentum: self.momentum.unwrap_or(d.momentum),
            seed: self.seed.unwrap_or(0),
            on_unreadable: match &self.on_unreadable {
                Some(s) => parse_choice(s, "on-unreadable")?,
                None => d.on_unreadable,
            },
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `<out>` with its extension replaced by `report.json`.
pub fn report_path(out: &Path) -> PathBuf {
    out.with_extension("report.json")
}

fn finish(
    command: &str,
    args: serde_json::Value,
    cfg: &TrainConfig,
    manifest: &Path,
    out: &Path,
    mut ckpt: Checkpoint,
    report: &TrainReport,
) -> Result<()> {
    let meta = metadata(command, json!({ "args": args, "train": cfg }), &[("manifest", manifest)])?;
    ckpt.metadata = meta.to_value();
    save_checkpoint(&ckpt, out)?;
    write_json(&report_path(out), &json!({ "metadata": meta, "report": report }))?;
    let metrics: Vec<String> = report.final_metrics.iter().map(|(k, v)| format!("{k} {v:.4}")).collect();
    println!(
        "trained on {} images in {:.1}s: {}",
        report.num_samples,
        report.elapsed_seconds,
        metrics.join(", ")
    );
    log::info!("wrote {}", out.display());
    Ok(())
}

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct RecognizerArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonTrain,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
}

pub fn recognizer(g: &Globals, a: RecognizerArgs) -> Result<()> {
    let a = resolve(g, &a)?;
    let c = &a.common;
    let manifest = require(c.manifest.clone(), "manifest")?;
    let images = require(c.images.clone(), "images")?;
    let out = require(c.out.clone(), "out")?;
    let cfg = c.train_config()?;
    let records = output::manifest(&manifest)?;
    let (ckpt, report) = train_recognizer(&records, &images, a.embedding_dim.unwrap_or(64), &cfg)?;
    finish("train-recognizer", config_value(&a), &cfg, &manifest, &out, ckpt, &report)
}

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FqnetArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonTrain,
    /// `squared` or `absolute`.
    #[arg(long)]
    pub loss_mode: Option<String>,
}

pub fn fqnet(g: &Globals, a: FqnetArgs) -> Result<()> {
    let a = resolve(g, &a)?;
    let c = &a.common;
    let manifest = require(c.manifest.clone(), "manifest")?;
    let images = require(c.images.clone(), "images")?;
    let out = require(c.out.clone(), "out")?;
    let mut cfg = c.train_config()?;
    if let Some(m) = &a.loss_mode {
        cfg.loss_mode = parse_choice::<LossMode>(m, "loss-mode")?;
    }
    let records = output::manifest(&manifest)?;
    let (ckpt, report) = train_quality(&records, &images, NetworkSpec::tinyfqnet(), &cfg)?;
    finish("train-fqnet", config_value(&a), &cfg, &manifest, &out, ckpt, &report)
}
