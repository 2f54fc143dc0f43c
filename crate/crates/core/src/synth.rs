//! Procedural identities and degraded variants for desk-scale experiments.
//!
//! All identities share one seeded layout of coloured ellipses over a
//! gradient background. Each identity perturbs that layout and adds a few
//! small marks and two fine sinusoidal gratings. Every image re-renders its
//! identity with jitter (shift, brightness, colour) and then applies one
//! degradation from the grid.

use crate::artifact::derive_seed;
use crate::degrade::{degrade, DegradationKind, DegradationSpec};
use crate::manifest::ManifestRecord;
use crate::{FqaError, Result};
use fqa_tensor::par;
use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Degradation kinds and severity levels to cycle through.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationGrid {
    pub kinds: Vec<DegradationKind>,
    pub severities: Vec<f64>,
}

impl Default for DegradationGrid {
    fn default() -> Self {
        DegradationGrid {
            kinds: DegradationKind::ALL.to_vec(),
            severities: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl DegradationGrid {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() || self.severities.is_empty() {
            return Err(FqaError::invalid("degradation grid needs at least one kind and one severity"));
        }
        if let Some(s) = self.severities.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(FqaError::invalid(format!("grid severity {s} outside [0, 1]")));
        }
        Ok(())
    }

    fn cells(&self) -> usize {
        self.kinds.len() * self.severities.len()
    }

    /// Cell `j`: severities vary fastest.
    fn cell(&self, j: usize) -> (DegradationKind, f64) {
        let s = self.severities.len();
        (self.kinds[(j / s) % self.kinds.len()], self.severities[j % s])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_identities: usize,
    /// Training images per identity; they cycle through the grid.
    pub images_per_identity: usize,
    /// Evaluation templates per identity, each with random grid cells.
    pub templates_per_identity: usize,
    pub images_per_template: usize,
    pub image_size: u32,
    /// How far identities depart from the shared layout, in [0, 1].
    pub identity_spread: f64,
    /// Per-image nuisance strength (shift, gain, colour), in [0, 1].
    pub jitter: f64,
    pub grid: DegradationGrid,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_identities: 32,
            images_per_identity: 50,
            templates_per_identity: 4,
            images_per_template: 5,
            image_size: 64,
            identity_spread: 0.05,
            jitter: 1.0,
            grid: DegradationGrid::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_identities < 2 || self.images_per_identity < 2 {
            return Err(FqaError::invalid("synthesis needs at least 2 identities and 2 images per identity"));
        }
        if self.templates_per_identity > 0 && self.images_per_template == 0 {
            return Err(FqaError::invalid("templates need at least one image"));
        }
        if !(0.0..=1.0).contains(&self.identity_spread) || !(0.0..=1.0).contains(&self.jitter) {
            return Err(FqaError::invalid("identity_spread and jitter must lie in [0, 1]"));
        }
        if self.image_size < 8 {
            return Err(FqaError::invalid("image_size must be >= 8"));
        }
        self.grid.validate()
    }
}

#[derive(Clone, Copy, Debug)]
struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    angle: f64,
    color: [f64; 3],
}

/// Seeded appearance of one identity, in unit coordinates.
#[derive(Clone, Debug)]
pub struct IdentityPattern {
    bg: [[f64; 3]; 2],
    bg_angle: f64,
    ellipses: Vec<Ellipse>,
    marks: Vec<Ellipse>,
    gratings: Vec<Grating>,
}

/// Sinusoidal texture: `freq` cycles per image width along `angle`.
#[derive(Clone, Copy, Debug)]
struct Grating {
    freq: f64,
    angle: f64,
    color: [f64; 3],
}

fn color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [
        rng.random_range(0.0..255.0),
        rng.random_range(0.0..255.0),
        rng.random_range(0.0..255.0),
    ]
}

impl IdentityPattern {
    /// A random layout, used as the shared template all identities vary.
    pub fn template(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bg = [color(&mut rng), color(&mut rng)];
        let bg_angle = rng.random_range(0.0..std::f64::consts::TAU);
        let ellipses = (0..5)
            .map(|_| Ellipse {
                cx: rng.random_range(0.2..0.8),
                cy: rng.random_range(0.2..0.8),
                rx: rng.random_range(0.08..0.25),
                ry: rng.random_range(0.08..0.25),
                angle: rng.random_range(0.0..std::f64::consts::PI),
                color: color(&mut rng),
            })
            .collect();
        IdentityPattern {
            bg,
            bg_angle,
            ellipses,
            marks: Vec::new(),
            gratings: Vec::new(),
        }
    }

    /// Perturbs the shared template by `spread` (0 = identical to the
    /// template, 1 = large changes) and adds identity-specific small marks.
    pub fn variant(template: &IdentityPattern, spread: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut jitter = |v: f64, r: f64| v + spread * rng.random_range(-r..r);
        let mut p = template.clone();
        for c in p.bg.iter_mut().flatten() {
            *c = jitter(*c, 60.0).clamp(0.0, 255.0);
        }
        for e in &mut p.ellipses {
            e.cx = jitter(e.cx, 0.1);
            e.cy = jitter(e.cy, 0.1);
            e.rx = jitter(e.rx, 0.05).max(0.03);
            e.ry = jitter(e.ry, 0.05).max(0.03);
            e.angle = jitter(e.angle, 0.8);
            for c in &mut e.color {
                *c = jitter(*c, 80.0).clamp(0.0, 255.0);
            }
        }
        let n = rng.random_range(4..=8);
        p.marks = (0..n)
            .map(|_| Ellipse {
                cx: rng.random_range(0.15..0.85),
                cy: rng.random_range(0.15..0.85),
                rx: rng.random_range(0.02..0.05),
                ry: rng.random_range(0.02..0.05),
                angle: rng.random_range(0.0..std::f64::consts::PI),
                color: color(&mut rng),
            })
            .collect();
        p.gratings = (0..2)
            .map(|_| Grating {
                freq: rng.random_range(6.0..14.0),
                angle: rng.random_range(0.0..std::f64::consts::PI),
                color: [
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                ],
            })
            .collect();
        p
    }

    /// Renders the pattern with per-image jitter drawn from `rng`; `jitter`
    /// in [0, 1] scales the shift, gain and colour offsets.
    pub fn render(&self, size: u32, jitter: f64, rng: &mut ChaCha8Rng) -> RgbImage {
        let mut j = |r: f64| jitter * rng.random_range(-r..r);
        let dx = j(0.05);
        let dy = j(0.05);
        let gain = 1.0 + j(0.15);
        let shift = [j(12.0), j(12.0), j(12.0)];
        let phases: Vec<f64> = self.gratings.iter().map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        let (bc, bs) = (self.bg_angle.cos(), self.bg_angle.sin());
        let n = f64::from(size);
        RgbImage::from_fn(size, size, |px, py| {
            let x = (f64::from(px) + 0.5) / n - dx;
            let y = (f64::from(py) + 0.5) / n - dy;
            let t = ((x - 0.5) * bc + (y - 0.5) * bs + 0.5).clamp(0.0, 1.0);
            let mut c = [0.0; 3];
            for (k, v) in c.iter_mut().enumerate() {
                *v = self.bg[0][k] * (1.0 - t) + self.bg[1][k] * t;
            }
            for e in self.ellipses.iter().chain(&self.marks) {
                let (ex, ey) = (x - e.cx, y - e.cy);
                let (ca, sa) = (e.angle.cos(), e.angle.sin());
                let u = (ex * ca + ey * sa) / e.rx;
                let v = (-ex * sa + ey * ca) / e.ry;
                if u * u + v * v <= 1.0 {
                    c = e.color;
                }
            }
            for (g, phase) in self.gratings.iter().zip(&phases) {
                let wave = (std::f64::consts::TAU * g.freq * (x * g.angle.cos() + y * g.angle.sin()) + phase).sin();
                for k in 0..3 {
                    c[k] += wave * g.color[k];
                }
            }
            let mut out = [0u8; 3];
            for k in 0..3 {
                out[k] = (c[k] * gain + shift[k]).round().clamp(0.0, 255.0) as u8;
            }
            image::Rgb(out)
        })
    }
}

pub fn identity_name(i: usize) -> String {
    format!("id{i:03}")
}

/// A synthesized dataset: training records, evaluation records grouped into
/// templates, and the rendered images keyed by record path.
pub struct SynthDataset {
    pub train: Vec<ManifestRecord>,
    pub eval: Vec<ManifestRecord>,
    pub images: Vec<(String, RgbImage)>,
}

struct Job {
    record: ManifestRecord,
    identity: usize,
    kind: DegradationKind,
    severity: f64,
}

/// Renders all images in memory (in parallel, one derived seed per image).
pub fn synthesize(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    let mut eval_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "eval-cells"));
    for i in 0..cfg.num_identities {
        let id = identity_name(i);
        for j in 0..cfg.images_per_identity {
            let (kind, severity) = cfg.grid.cell(j % cfg.grid.cells());
            let image_id = format!("{id}_train_{j:03}");
            jobs.push(Job {
                record: ManifestRecord::new(&image_id, format!("train/{id}/{image_id}.png"), &id),
                identity: i,
                kind,
                severity,
            });
        }
        for t in 0..cfg.templates_per_identity {
            for j in 0..cfg.images_per_template {
                let (kind, severity) = cfg.grid.cell(eval_rng.random_range(0..cfg.grid.cells()));
                let image_id = format!("{id}_t{t}_{j}");
                let mut record = ManifestRecord::new(&image_id, format!("eval/{id}/{image_id}.png"), &id);
                record.template_id = Some(format!("{id}_t{t}"));
                jobs.push(Job {
                    record,
                    identity: i,
                    kind,
                    severity,
                });
            }
        }
    }
    let template = IdentityPattern::template(derive_seed(cfg.seed, "template"));
    let patterns: Vec<IdentityPattern> = (0..cfg.num_identities)
        .map(|i| {
            let seed = derive_seed(cfg.seed, &format!("identity/{}", identity_name(i)));
            IdentityPattern::variant(&template, cfg.identity_spread, seed)
        })
        .collect();
    let rendered = par::map_slice(&jobs, |job| {
        let image_seed = derive_seed(cfg.seed, &format!("image/{}", job.record.image_id));
        let mut rng = ChaCha8Rng::seed_from_u64(image_seed);
        let clean = patterns[job.identity].render(cfg.image_size, cfg.jitter, &mut rng);
        degrade(&clean, &DegradationSpec::new(job.kind, job.severity, image_seed ^ 0x5eed))
    });
    let mut data = SynthDataset {
        train: Vec::new(),
        eval: Vec::new(),
        images: Vec::with_capacity(jobs.len()),
    };
    for (job, img) in jobs.into_iter().zip(rendered) {
        let mut r = job.record;
        r.degradation = Some(job.kind.to_string());
        r.severity = Some(job.severity);
        data.images.push((r.path.clone(), img?));
        if r.template_id.is_some() {
            data.eval.push(r);
        } else {
            data.train.push(r);
        }
    }
    Ok(data)
}

/// Writes every image as PNG under `root`.
pub fn write_images(data: &SynthDataset, root: &Path) -> Result<()> {
    let results = par::map_slice(&data.images, |(rel, img)| {
        let path = root.join(rel);
        let mut buf = std::io::Cursor::new(Vec::new());
        img.write_to(&mut buf, image::ImageFormat::Png)
            .map_err(|e| FqaError::image(&path, e))?;
        crate::manifest::write_file(&path, buf.get_ref())
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            num_identities: 3,
            images_per_identity: 4,
            templates_per_identity: 2,
            images_per_template: 2,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn counts_and_ids() {
        let d = synthesize(&small()).unwrap();
        assert_eq!(d.train.len(), 12);
        assert_eq!(d.eval.len(), 12);
        assert_eq!(d.images.len(), 24);
        let mut all = d.train.clone();
        all.extend(d.eval.clone());
        crate::manifest::check_unique_ids(&all).unwrap();
    }

    #[test]
    fn deterministic() {
        let a = synthesize(&small()).unwrap();
        let b = synthesize(&small()).unwrap();
        assert!(a.images.iter().zip(&b.images).all(|(x, y)| x == y));
    }

    #[test]
    fn grid_cycles_severity_fastest() {
        let g = DegradationGrid::default();
        assert_eq!(g.cell(0), (DegradationKind::GaussianBlur, 0.0));
        assert_eq!(g.cell(6), (DegradationKind::JpegRecompress, 0.25));
    }
}
