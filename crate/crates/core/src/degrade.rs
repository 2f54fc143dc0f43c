//! Seeded synthetic image degradations with a severity knob in [0, 1].

use crate::{FqaError, Result};
use image::codecs::jpeg::JpegEncoder;
use image::imageops::FilterType;
use image::{ImageEncoder, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationKind {
    GaussianBlur,
    JpegRecompress,
    GaussianNoise,
    Occlusion,
    Downscale,
}

impl DegradationKind {
    pub const ALL: [DegradationKind; 5] = [
        DegradationKind::GaussianBlur,
        DegradationKind::JpegRecompress,
        DegradationKind::GaussianNoise,
        DegradationKind::Occlusion,
        DegradationKind::Downscale,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DegradationKind::GaussianBlur => "gaussian_blur",
            DegradationKind::JpegRecompress => "jpeg_recompress",
            DegradationKind::GaussianNoise => "gaussian_noise",
            DegradationKind::Occlusion => "occlusion",
            DegradationKind::Downscale => "downscale",
        }
    }
}

impl fmt::Display for DegradationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DegradationKind {
    type Err = FqaError;

    fn from_str(s: &str) -> Result<Self> {
        DegradationKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            FqaError::invalid(format!(
                "unknown degradation kind `{s}` (expected one of gaussian_blur, jpeg_recompress, gaussian_noise, occlusion, downscale)"
            ))
        })
    }
}

/// Strength of each kind at severity 1. Blur, noise and occlusion scale
/// linearly with severity; JPEG quality and downscale factor interpolate
/// geometrically, so each grade step has a visible effect.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradationParams {
    /// Blur sigma in pixels.
    pub max_sigma: f64,
    /// JPEG quality at severity 1; severity 0 corresponds to quality 100.
    pub min_jpeg_quality: u8,
    /// Noise standard deviation as a fraction of the 0..255 range.
    pub max_noise_std: f64,
    /// Fraction of the image area covered by the occluder.
    pub patch_fraction: f64,
    /// Linear downscale factor before upscaling back.
    pub min_scale: f64,
}

impl Default for DegradationParams {
    fn default() -> Self {
        DegradationParams {
            max_sigma: 3.0,
            min_jpeg_quality: 2,
            max_noise_std: 0.4,
            patch_fraction: 0.6,
            min_scale: 0.125,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    pub severity: f64,
    #[serde(default)]
    pub params: DegradationParams,
    #[serde(default)]
    pub seed: u64,
}

impl DegradationSpec {
    pub fn new(kind: DegradationKind, severity: f64, seed: u64) -> Self {
        DegradationSpec {
            kind,
            severity,
            params: DegradationParams::default(),
            seed,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.severity * self.params.max_sigma
    }

    pub fn jpeg_quality(&self) -> u8 {
        let min = f64::from(self.params.min_jpeg_quality.clamp(1, 100));
        (100.0 * (min / 100.0).powf(self.severity)).round() as u8
    }

    /// Noise standard deviation in 0..255 units.
    pub fn noise_std(&self) -> f64 {
        self.severity * self.params.max_noise_std * 255.0
    }

    pub fn occluded_fraction(&self) -> f64 {
        self.severity * self.params.patch_fraction
    }

    pub fn scale(&self) -> f64 {
        self.params.min_scale.powf(self.severity)
    }

    fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(0.0..=1.0).contains(&self.severity) {
            return Err(FqaError::invalid(format!("severity {} outside [0, 1]", self.severity)));
        }
        if !(p.max_sigma >= 0.0
            && p.max_noise_std >= 0.0
            && (0.0..=1.0).contains(&p.patch_fraction)
            && p.min_scale > 0.0
            && p.min_scale <= 1.0)
        {
            return Err(FqaError::invalid(format!("invalid degradation parameters {p:?}")));
        }
        Ok(())
    }
}

/// Applies `spec` to `img`. Severity 0 returns an identical copy.
pub fn degrade(img: &RgbImage, spec: &DegradationSpec) -> Result<RgbImage> {
    spec.validate()?;
    if spec.severity == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(match spec.kind {
        DegradationKind::GaussianBlur => {
            let sigma = spec.sigma() as f32;
            if sigma > 0.0 {
                image::imageops::blur(img, sigma)
            } else {
                img.clone()
            }
        }
        DegradationKind::JpegRecompress => jpeg_roundtrip(img, spec.jpeg_quality())?,
        DegradationKind::GaussianNoise => {
            let std = spec.noise_std();
            let mut out = img.clone();
            if std > 0.0 {
                let dist = Normal::new(0.0, std).expect("finite std");
                for v in out.iter_mut() {
                    *v = (f64::from(*v) + dist.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
                }
            }
            out
        }
        DegradationKind::Occlusion => {
            let mut out = img.clone();
            let h = out.height();
            let rows = (spec.occluded_fraction() * f64::from(h)).round() as u32;
            if rows > 0 {
                let top = rng.random_range(0..=h - rows);
                for y in top..top + rows {
                    for x in 0..out.width() {
                        out.put_pixel(x, y, image::Rgb([0, 0, 0]));
                    }
                }
            }
            out
        }
        DegradationKind::Downscale => {
            let (w, h) = img.dimensions();
            let s = spec.scale();
            let sw = ((f64::from(w) * s).round() as u32).max(1);
            let sh = ((f64::from(h) * s).round() as u32).max(1);
            if sw == w && sh == h {
                img.clone()
            } else {
                let small = image::imageops::resize(img, sw, sh, FilterType::Triangle);
                image::imageops::resize(&small, w, h, FilterType::Triangle)
            }
        }
    })
}

pub fn encode_jpeg(img: &RgbImage, quality: u8) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality.clamp(1, 100))
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .map_err(|e| FqaError::invalid(format!("jpeg encoding failed: {e}")))?;
    Ok(buf)
}

pub fn jpeg_roundtrip(img: &RgbImage, quality: u8) -> Result<RgbImage> {
    let bytes = encode_jpeg(img, quality)?;
    let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Jpeg)
        .map_err(|e| FqaError::invalid(format!("jpeg decoding failed: {e}")))?;
    Ok(decoded.to_rgb8())
}
