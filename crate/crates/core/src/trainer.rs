//! SGD training loops for the recognizer (softmax cross-entropy) and the
//! quality network (regression onto [0, 1] labels).

use crate::artifact::derive_seed;
use crate::manifest::ManifestRecord;
use crate::model::{Checkpoint, Network, NetworkKind, NetworkSpec};
use crate::preprocess::{batch, load_records, Normalization, UnreadablePolicy};
use crate::stats;
use crate::{FqaError, Result};
use fqa_tensor::{BnMode, RegressionLoss, Sgd, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Mean squared error.
    #[default]
    Squared,
    /// Mean absolute error.
    Absolute,
}

impl From<LossMode> for RegressionLoss {
    fn from(m: LossMode) -> Self {
        match m {
            LossMode::Squared => RegressionLoss::Squared,
            LossMode::Absolute => RegressionLoss::Absolute,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub weight_decay: f64,
    pub momentum: f64,
    pub seed: u64,
    pub loss_mode: LossMode,
    pub on_unreadable: UnreadablePolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::desk()
    }
}

impl TrainConfig {
    /// 17 epochs, batch 1024, lr 0.01 decayed by 0.1 every 5 epochs.
    pub fn paper() -> Self {
        TrainConfig {
            epochs: 17,
            batch_size: 1024,
            base_lr: 0.01,
            lr_decay_factor: 0.1,
            lr_decay_every: 5,
            weight_decay: 1e-4,
            momentum: 0.9,
            seed: 0,
            loss_mode: LossMode::Squared,
            on_unreadable: UnreadablePolicy::Abort,
        }
    }

    /// Small-dataset defaults: batch 64, 30 epochs, decay every 10.
    pub fn desk() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            lr_decay_every: 10,
            ..TrainConfig::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(FqaError::invalid("epochs must be >= 1"));
        }
        if self.batch_size < 2 {
            return Err(FqaError::invalid(format!("batch_size must be >= 2, got {}", self.batch_size)));
        }
        if !(self.base_lr > 0.0) || !self.base_lr.is_finite() {
            return Err(FqaError::invalid(format!("base_lr must be > 0, got {}", self.base_lr)));
        }
        if self.lr_decay_every < 1 {
            return Err(FqaError::invalid("lr_decay_every must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay < 0.0 || !(self.lr_decay_factor > 0.0) {
            return Err(FqaError::invalid(
                "momentum must be in [0, 1), weight_decay >= 0 and lr_decay_factor > 0",
            ));
        }
        Ok(())
    }
}

/// Step schedule: `base_lr * decay_factor ^ floor(epoch / decay_every)`.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.base_lr * cfg.lr_decay_factor.powi((epoch / cfg.lr_decay_every.max(1)) as i32)
}

/// Mean squared or absolute error between predictions and [0, 1] labels.
pub fn quality_loss(pred: &[f64], labels: &[f64], mode: LossMode) -> Result<f64> {
    if labels.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(FqaError::invalid("quality labels must lie in [0, 1]"));
    }
    Ok(fqa_tensor::ops::regression_loss(pred, labels, mode.into())?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub task: NetworkKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_mode: Option<LossMode>,
    pub num_samples: usize,
    pub epochs: Vec<EpochStats>,
    pub final_metrics: BTreeMap<String, f64>,
    pub skipped_images: Vec<String>,
    /// Wall-clock seconds; kept out of the JSON so reruns are byte-identical.
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

/// Splits `n` shuffled indices into batches of `batch_size`. A trailing
/// batch of one sample joins the previous batch because train-mode batch
/// norm needs at least two.
fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let n = out.len();
        let start = (n - 1) * batch_size;
        out[n - 1] = &order[start..];
    }
    out
}

enum Targets<'a> {
    Quality(&'a [f32], LossMode),
    Classes(&'a [usize]),
}

fn fit(net: &mut Network<f32>, samples: &[Vec<f32>], targets: Targets, norm: &Normalization, cfg: &TrainConfig) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if samples.len() < 2 {
        return Err(FqaError::invalid(format!(
            "training needs at least 2 images, got {}",
            samples.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "shuffle"));
    let mut sgd = Sgd::new(cfg.base_lr as f32, cfg.momentum as f32, cfg.weight_decay as f32);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(epoch, cfg);
        sgd.lr = lr as f32;
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for idx in batches(&order, cfg.batch_size) {
            let x = batch(samples, idx, norm);
            let mut tape = Tape::new();
            let out = net.forward(&mut tape, x, BnMode::Train)?;
            let loss = match targets {
                Targets::Quality(labels, mode) => {
                    let y: Vec<f32> = idx.iter().map(|&i| labels[i]).collect();
                    tape.regression_loss(out.output, &y, mode.into())?
                }
                Targets::Classes(labels) => {
                    let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
                    correct += argmax_rows(tape.value(out.output)).iter().zip(&y).filter(|(p, t)| p == t).count();
                    tape.softmax_cross_entropy(out.output, &y)?
                }
            };
            let value = f64::from(tape.value(loss).data()[0]);
            if !value.is_finite() {
                return Err(FqaError::invalid(format!("loss diverged at epoch {epoch} (lr {lr})")));
            }
            loss_sum += value * idx.len() as f64;
            tape.backward(loss, net.store_mut())?;
            net.apply_bn_updates(out.bn_updates);
            sgd.step(net.store_mut());
        }
        let n = samples.len() as f64;
        let stats = EpochStats {
            epoch,
            lr,
            mean_loss: loss_sum / n,
            accuracy: matches!(targets, Targets::Classes(_)).then(|| correct as f64 / n),
        };
        log::info!("epoch {epoch}: lr {lr:.2e} loss {:.5}", stats.mean_loss);
        history.push(stats);
    }
    Ok(history)
}

pub(crate) fn argmax_rows(t: &Tensor<f32>) -> Vec<usize> {
    let k = t.shape()[1];
    t.data()
        .chunks(k)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Starts the sigmoid output at the mean label. From a cold start the first
/// steps chase a large error, overshoot with momentum and can saturate the
/// sigmoid, after which gradients vanish.
fn init_output_bias(net: &mut Network<f32>, labels: &[f32]) {
    let Some(id) = net.store().find_param("fc.bias") else { return };
    let mean = labels.iter().map(|&q| f64::from(q)).sum::<f64>() / labels.len().max(1) as f64;
    let m = mean.clamp(1e-3, 1.0 - 1e-3);
    net.store_mut().param_mut(id).value.data_mut()[0] = (m / (1.0 - m)).ln() as f32;
}

/// Trains a quality network on pre-decoded samples with labels in [0, 1].
pub fn fit_quality(
    net: &mut Network<f32>,
    samples: &[Vec<f32>],
    labels: &[f32],
    norm: &Normalization,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if net.kind() != NetworkKind::Quality {
        return Err(FqaError::invalid("fit_quality needs a quality network"));
    }
    if labels.len() != samples.len() {
        return Err(FqaError::invalid(format!("{} samples but {} labels", samples.len(), labels.len())));
    }
    if let Some(q) = labels.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(FqaError::invalid(format!("quality label {q} outside [0, 1]")));
    }
    let start = Instant::now();
    init_output_bias(net, labels);
    let epochs = fit(net, samples, Targets::Quality(labels, cfg.loss_mode), norm, cfg)?;
    let pred = predict(net, samples, norm, cfg.batch_size)?;
    let p: Vec<f64> = pred.iter().map(|&v| f64::from(v)).collect();
    let q: Vec<f64> = labels.iter().map(|&v| f64::from(v)).collect();
    let mut final_metrics = BTreeMap::new();
    final_metrics.insert("train_loss".into(), quality_loss(&p, &q, cfg.loss_mode)?);
    if let Some(r) = stats::pearson(&p, &q) {
        final_metrics.insert("train_pearson".into(), r);
    }
    Ok(TrainReport {
        task: NetworkKind::Quality,
        loss_mode: Some(cfg.loss_mode),
        num_samples: samples.len(),
        epochs,
        final_metrics,
        skipped_images: Vec::new(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Trains a recognizer on pre-decoded samples with class indices.
pub fn fit_recognizer(
    net: &mut Network<f32>,
    samples: &[Vec<f32>],
    labels: &[usize],
    norm: &Normalization,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let k = net
        .spec()
        .num_classes
        .filter(|_| net.kind() == NetworkKind::Recognizer)
        .ok_or_else(|| FqaError::invalid("fit_recognizer needs a recognizer network"))?;
    if labels.len() != samples.len() {
        return Err(FqaError::invalid(format!("{} samples but {} labels", samples.len(), labels.len())));
    }
    let mut counts = vec![0usize; k];
    for &y in labels {
        *counts
            .get_mut(y)
            .ok_or_else(|| FqaError::invalid(format!("class index {y} out of range for {k} classes")))? += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(FqaError::invalid(format!("class {empty} has no training images")));
    }
    let start = Instant::now();
    let epochs = fit(net, samples, Targets::Classes(labels), norm, cfg)?;
    let (_, logits) = embed_all(net, samples, norm, cfg.batch_size)?;
    let hits = argmax_rows(&logits).iter().zip(labels).filter(|(p, t)| p == t).count();
    let mut final_metrics = BTreeMap::new();
    final_metrics.insert("train_accuracy".into(), hits as f64 / samples.len() as f64);
    Ok(TrainReport {
        task: NetworkKind::Recognizer,
        loss_mode: None,
        num_samples: samples.len(),
        epochs,
        final_metrics,
        skipped_images: Vec::new(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Inference-mode quality predictions in batches.
pub fn predict(net: &Network<f32>, samples: &[Vec<f32>], norm: &Normalization, batch_size: usize) -> Result<Vec<f32>> {
    let idx: Vec<usize> = (0..samples.len()).collect();
    let mut out = Vec::with_capacity(samples.len());
    for chunk in idx.chunks(batch_size.max(1)) {
        out.extend(net.predict_quality(batch(samples, chunk, norm))?);
    }
    Ok(out)
}

/// Inference-mode embeddings `[N, D]` and logits `[N, K]` in batches.
pub fn embed_all(net: &Network<f32>, samples: &[Vec<f32>], norm: &Normalization, batch_size: usize) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let idx: Vec<usize> = (0..samples.len()).collect();
    let (mut emb, mut logits) = (Vec::new(), Vec::new());
    let (mut d, mut k) = (0, 0);
    for chunk in idx.chunks(batch_size.max(1)) {
        let (e, l) = net.embed(batch(samples, chunk, norm))?;
        d = e.shape()[1];
        k = l.shape()[1];
        emb.extend_from_slice(e.data());
        logits.extend_from_slice(l.data());
    }
    Ok((Tensor::new(&[samples.len(), d], emb)?, Tensor::new(&[samples.len(), k], logits)?))
}

/// Sorted distinct identities of a manifest.
pub fn identity_classes(records: &[ManifestRecord]) -> Vec<String> {
    records
        .iter()
        .map(|r| r.identity.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn skipped_names(paths: &[std::path::PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

/// Trains a fresh quality network on a scored manifest.
pub fn train_quality(records: &[ManifestRecord], root: &Path, spec: NetworkSpec, cfg: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    cfg.validate()?;
    for r in records {
        match r.score {
            Some(s) if (0.0..=1.0).contains(&s) => {}
            Some(s) => return Err(FqaError::invalid(format!("record {}: score {s} outside [0, 1]", r.image_id))),
            None => return Err(FqaError::invalid(format!("record {} has no quality score", r.image_id))),
        }
    }
    let norm = Normalization {
        size: spec.input_size,
        ..Normalization::default()
    };
    let loaded = load_records(records, root, &norm, cfg.on_unreadable)?;
    let labels: Vec<f32> = loaded.indices.iter().map(|&i| records[i].score.unwrap() as f32).collect();
    let mut net = Network::new(spec, derive_seed(cfg.seed, "init"))?;
    let mut report = fit_quality(&mut net, &loaded.samples, &labels, &norm, cfg)?;
    report.skipped_images = skipped_names(&loaded.skipped);
    Ok((Checkpoint::new(net, norm), report))
}

/// Trains a fresh recognizer over the manifest's identities. Classifier row
/// `y` corresponds to `checkpoint.classes[y]`.
pub fn train_recognizer(
    records: &[ManifestRecord],
    root: &Path,
    embedding_dim: usize,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, TrainReport)> {
    cfg.validate()?;
    let classes = identity_classes(records);
    if classes.len() < 2 {
        return Err(FqaError::invalid(format!(
            "recognizer training needs at least 2 identities, got {}",
            classes.len()
        )));
    }
    let spec = NetworkSpec::recognizer(embedding_dim, classes.len());
    let norm = Normalization {
        size: spec.input_size,
        ..Normalization::default()
    };
    let loaded = load_records(records, root, &norm, cfg.on_unreadable)?;
    let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let labels: Vec<usize> = loaded.indices.iter().map(|&i| index[records[i].identity.as_str()]).collect();
    let mut net = Network::new(spec, derive_seed(cfg.seed, "init"))?;
    let mut report = fit_recognizer(&mut net, &loaded.samples, &labels, &norm, cfg)?;
    report.skipped_images = skipped_names(&loaded.skipped);
    let mut ckpt = Checkpoint::new(net, norm);
    ckpt.classes = classes;
    Ok((ckpt, report))
}
