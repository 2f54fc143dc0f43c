//! Image decoding and normalization into network input tensors.

use crate::manifest::ManifestRecord;
use crate::{FqaError, Result};
use fqa_tensor::{par, Tensor};
use image::imageops::FilterType;
use image::{DynamicImage, RgbImage};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const INPUT_SIZE: usize = 64;

/// Resize target and per-channel normalization, stored in checkpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub size: usize,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            size: INPUT_SIZE,
            mean: [0.5; 3],
            std: [0.5; 3],
        }
    }
}

impl Normalization {
    pub fn sample_len(&self) -> usize {
        3 * self.size * self.size
    }

    /// RGB image to a normalized `[3, size, size]` buffer. Bilinear resize
    /// when the image is not already `size x size`.
    pub fn to_chw(&self, img: &RgbImage) -> Vec<f32> {
        let s = self.size as u32;
        let resized;
        let img = if img.width() == s && img.height() == s {
            img
        } else {
            resized = image::imageops::resize(img, s, s, FilterType::Triangle);
            &resized
        };
        let hw = self.size * self.size;
        let mut out = vec![0f32; 3 * hw];
        for (i, p) in img.pixels().enumerate() {
            for c in 0..3 {
                let v = f64::from(p[c]) / 255.0;
                out[c * hw + i] = ((v - self.mean[c]) / self.std[c]) as f32;
            }
        }
        out
    }
}

/// What to do when an image cannot be decoded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnreadablePolicy {
    #[default]
    Abort,
    Skip,
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| FqaError::image(path, e))?;
    Ok(match img {
        DynamicImage::ImageRgb8(rgb) => rgb,
        other => other.to_rgb8(),
    })
}

pub fn resolve(root: &Path, rel: &str) -> PathBuf {
    root.join(rel)
}

/// Decoded inputs for a list of records, in record order.
pub struct LoadedImages {
    /// Indices into the source record list of the images that decoded.
    pub indices: Vec<usize>,
    pub samples: Vec<Vec<f32>>,
    pub skipped: Vec<PathBuf>,
}

/// Decodes every record's image (in parallel) under `root`.
pub fn load_records(records: &[ManifestRecord], root: &Path, norm: &Normalization, policy: UnreadablePolicy) -> Result<LoadedImages> {
    let decoded = par::map_slice(records, |r| {
        let path = resolve(root, &r.path);
        load_rgb(&path).map(|img| norm.to_chw(&img))
    });
    let mut out = LoadedImages {
        indices: Vec::new(),
        samples: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, d) in decoded.into_iter().enumerate() {
        match d {
            Ok(s) => {
                out.indices.push(i);
                out.samples.push(s);
            }
            Err(e) if policy == UnreadablePolicy::Skip => {
                log::warn!("skipping unreadable image: {e}");
                out.skipped.push(resolve(root, &records[i].path));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Stacks the selected samples into an `[N, 3, size, size]` batch.
pub fn batch(samples: &[Vec<f32>], idx: &[usize], norm: &Normalization) -> Tensor<f32> {
    let len = norm.sample_len();
    let mut data = Vec::with_capacity(idx.len() * len);
    for &i in idx {
        data.extend_from_slice(&samples[i]);
    }
    Tensor::new(&[idx.len(), 3, norm.size, norm.size], data).expect("sample length matches normalization")
}
