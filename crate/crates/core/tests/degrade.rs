use fqa_core::artifact::hash_bytes;
use fqa_core::degrade::{degrade, DegradationKind, DegradationParams, DegradationSpec};
use fqa_core::synth::{synthesize, SynthConfig};
use image::RgbImage;
use proptest::prelude::*;
use std::collections::{BTreeMap, HashSet};

fn textured(w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        image::Rgb([(40 + x * 3) as u8, (60 + y * 2) as u8, (((x * 7) ^ (y * 5)) % 120 + 20) as u8])
    })
}

#[test]
fn noise_variance_matches_parameter() {
    let img = RgbImage::from_pixel(128, 128, image::Rgb([128, 128, 128]));
    let spec = DegradationSpec::new(DegradationKind::GaussianNoise, 0.2, 9);
    let out = degrade(&img, &spec).unwrap();
    let diffs: Vec<f64> = out.iter().map(|&v| f64::from(v) - 128.0).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64;
    let want = spec.noise_std().powi(2);
    assert!((var / want - 1.0).abs() < 0.2, "variance {var} vs {want}");
}

#[test]
fn occlusion_covers_requested_rows() {
    let img = textured(64, 64);
    for seed in 0..10 {
        let spec = DegradationSpec {
            params: DegradationParams {
                patch_fraction: 0.25,
                ..DegradationParams::default()
            },
            ..DegradationSpec::new(DegradationKind::Occlusion, 1.0, seed)
        };
        let out = degrade(&img, &spec).unwrap();
        let black_rows = (0..64).filter(|&y| (0..64).all(|x| out.get_pixel(x, y).0 == [0, 0, 0])).count();
        assert!(black_rows.abs_diff(16) <= 1, "seed {seed}: {black_rows} rows");
        let changed_rows = (0..64)
            .filter(|&y| (0..64).any(|x| out.get_pixel(x, y) != img.get_pixel(x, y)))
            .count();
        assert_eq!(changed_rows, black_rows);
    }
}

#[test]
fn geometric_interpolation_of_jpeg_and_scale() {
    let at = |s: f64| DegradationSpec::new(DegradationKind::JpegRecompress, s, 0);
    assert_eq!(at(0.0).jpeg_quality(), 100);
    assert_eq!(at(0.5).jpeg_quality(), 14);
    assert_eq!(at(1.0).jpeg_quality(), 2);
    assert!((at(1.0 / 3.0).scale() - 0.5).abs() < 1e-12);
    assert!((at(1.0).scale() - 0.125).abs() < 1e-12);
}

#[test]
fn seeded_kinds_depend_only_on_seed() {
    let img = textured(48, 40);
    for kind in [DegradationKind::GaussianNoise, DegradationKind::Occlusion] {
        let a = degrade(&img, &DegradationSpec::new(kind, 0.6, 1)).unwrap();
        let b = degrade(&img, &DegradationSpec::new(kind, 0.6, 1)).unwrap();
        let c = degrade(&img, &DegradationSpec::new(kind, 0.6, 2)).unwrap();
        assert_eq!(a, b, "{kind}");
        assert_ne!(a, c, "{kind}");
    }
}

#[test]
fn synthetic_identities_render_distinct_images() {
    let d = synthesize(&SynthConfig::default()).unwrap();
    assert_eq!(d.train.len(), 32 * 50);
    let hashes: HashSet<String> = d.images.iter().map(|(_, img)| hash_bytes(img.as_raw())).collect();
    // Only heavy occlusion can coincide; everything else is jittered.
    assert!(hashes.len() > d.images.len() * 95 / 100);
    // Each identity cycles the 25 cells twice.
    let mut cells: BTreeMap<(&str, String, u64), usize> = BTreeMap::new();
    for r in &d.train {
        *cells
            .entry((&r.identity, r.degradation.clone().unwrap(), (r.severity.unwrap() * 4.0) as u64))
            .or_default() += 1;
    }
    assert_eq!(cells.len(), 32 * 25);
    assert!(cells.values().all(|&c| c == 2));
}

#[test]
fn synthesis_is_seeded() {
    let small = |seed| SynthConfig {
        num_identities: 4,
        images_per_identity: 5,
        templates_per_identity: 1,
        images_per_template: 3,
        seed,
        ..SynthConfig::default()
    };
    let digest = |cfg: &SynthConfig| {
        let d = synthesize(cfg).unwrap();
        d.images
            .iter()
            .map(|(p, img)| format!("{p}:{}", hash_bytes(img.as_raw())))
            .collect::<Vec<_>>()
    };
    assert_eq!(digest(&small(3)), digest(&small(3)));
    assert_ne!(digest(&small(3)), digest(&small(4)));
}

fn arb_kind() -> impl Strategy<Value = DegradationKind> {
    prop::sample::select(DegradationKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn degrade_keeps_size_and_is_deterministic(kind in arb_kind(), severity in 0.0f64..=1.0, seed in 0u64..1000, w in 8u32..40, h in 8u32..40) {
        let img = textured(w, h);
        let spec = DegradationSpec::new(kind, severity, seed);
        let a = degrade(&img, &spec).unwrap();
        prop_assert_eq!(a.dimensions(), (w, h));
        prop_assert_eq!(a, degrade(&img, &spec).unwrap());
    }

    #[test]
    fn severity_zero_is_identity(kind in arb_kind(), seed in 0u64..1000) {
        let img = textured(20, 24);
        prop_assert_eq!(degrade(&img, &DegradationSpec::new(kind, 0.0, seed)).unwrap(), img);
    }

    #[test]
    fn strength_monotone_in_severity(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = (a.min(b), a.max(b));
        let s = |v| DegradationSpec::new(DegradationKind::GaussianBlur, v, 0);
        prop_assert!(s(lo).sigma() <= s(hi).sigma());
        prop_assert!(s(lo).jpeg_quality() >= s(hi).jpeg_quality());
        prop_assert!(s(lo).noise_std() <= s(hi).noise_std());
        prop_assert!(s(lo).occluded_fraction() <= s(hi).occluded_fraction());
        prop_assert!(s(lo).scale() >= s(hi).scale());
    }
}
