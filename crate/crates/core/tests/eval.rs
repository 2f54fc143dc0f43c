#[path = "oracles/ladders.rs"]
mod ladders;
#[path = "oracles/roc.rs"]
mod roc_oracle;

use fqa_core::degrade::encode_jpeg;
use fqa_core::eval::{
    kfold_accuracy, roc, score_blur, score_combination, score_jpeg, score_jpeg_bytes, select_best, verify_pairs, PairLabel, TemplateGroup,
};
use image::RgbImage;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roc_oracle::{brute_auc, brute_points, hand_example, instance, mismatches};
use std::collections::{BTreeMap, HashMap};

#[test]
fn roc_matches_brute_force_exactly() {
    let (bad, total) = mismatches();
    assert!(total > 1000);
    assert_eq!(bad, 0, "{bad} of {total} operating points disagree");
}

#[test]
fn roc_hand_example() {
    assert_eq!(hand_example(), (0.5, 1.0));
}

#[test]
fn roc_points_equal_brute_points() {
    for seed in 0..20 {
        let (sims, labels) = instance(seed);
        let r = roc(&sims, &labels).unwrap();
        let mut brute = brute_points(&sims, &labels);
        brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        brute.dedup();
        let got: Vec<(f64, f64)> = r.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        assert_eq!(got, brute, "seed {seed}");
        assert!((r.auc - brute_auc(&sims, &labels)).abs() < 1e-12);
    }
}

#[test]
fn negated_similarities_flip_auc() {
    for seed in 0..20 {
        let (sims, labels) = instance(seed);
        let neg: Vec<f64> = sims.iter().map(|s| -s).collect();
        let a = roc(&sims, &labels).unwrap().auc;
        let b = roc(&neg, &labels).unwrap().auc;
        assert!((a + b - 1.0).abs() < 1e-12, "seed {seed}: {a} + {b}");
    }
}

#[test]
fn roc_rejects_single_class_and_nan() {
    assert!(roc(&[0.1, 0.2], &[false, false]).is_err());
    assert!(roc(&[0.1, f64::NAN], &[true, false]).is_err());
    assert!(roc(&[0.1], &[true, false]).is_err());
}

#[test]
fn reported_targets_use_step_convention() {
    let (sims, labels) = instance(4);
    let r = roc(&sims, &labels).unwrap();
    for (key, t) in [("1e-1", 1e-1), ("1e-2", 1e-2), ("1e-3", 1e-3), ("1e-4", 1e-4), ("1e-5", 1e-5)] {
        assert_eq!(r.tpr_at[key], roc_oracle::brute_tpr_at(&sims, &labels, t));
    }
}

#[test]
fn kfold_separable_is_perfect() {
    let sims: Vec<f64> = (0..100)
        .map(|i| {
            if i % 2 == 0 {
                0.6 + i as f64 * 1e-3
            } else {
                -0.2 - i as f64 * 1e-3
            }
        })
        .collect();
    let labels: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
    let r = kfold_accuracy(&sims, &labels, 10, 3).unwrap();
    assert!(r.fold_accuracies.iter().all(|&a| a == 1.0));
    assert_eq!((r.mean, r.std), (1.0, 0.0));
}

#[test]
fn kfold_random_labels_near_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sims: Vec<f64> = (0..10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.5)).collect();
    let r = kfold_accuracy(&sims, &labels, 10, 0).unwrap();
    assert!((0.45..=0.55).contains(&r.mean), "mean accuracy {}", r.mean);
}

#[test]
fn kfold_is_deterministic() {
    let (sims, labels) = instance(6);
    assert_eq!(
        kfold_accuracy(&sims, &labels, 10, 5).unwrap(),
        kfold_accuracy(&sims, &labels, 10, 5).unwrap()
    );
}

#[test]
fn kfold_constant_scorer_scores_the_prior() {
    // 70 positives and 30 negatives: stratified folds hold 7 and 3 each.
    let labels: Vec<bool> = (0..100).map(|i| i % 10 < 7).collect();
    let r = kfold_accuracy(&[0.4; 100], &labels, 10, 1).unwrap();
    assert!(
        r.fold_accuracies.iter().all(|&a| (a - 0.7).abs() < 1e-12),
        "{:?}",
        r.fold_accuracies
    );
    let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
    let r = kfold_accuracy(&[0.4; 100], &flipped, 10, 1).unwrap();
    assert!(
        r.fold_accuracies.iter().all(|&a| (a - 0.7).abs() < 1e-12),
        "{:?}",
        r.fold_accuracies
    );
}

#[test]
fn kfold_rejects_bad_inputs() {
    assert!(kfold_accuracy(&[0.1, 0.2, 0.3], &[true, false, true], 5, 0).is_err());
    assert!(kfold_accuracy(&[0.1, 0.2], &[true, false], 1, 0).is_err());
}

fn group(ids: &[&str]) -> TemplateGroup {
    TemplateGroup {
        template_id: "t".into(),
        image_ids: ids.iter().map(|s| s.to_string()).collect(),
    }
}

#[test]
fn select_examples() {
    let s: HashMap<String, f64> = [("img1", 0.2), ("img2", 0.9), ("img3", 0.5)]
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    assert_eq!(select_best(&group(&["img1", "img2", "img3"]), &s).unwrap(), "img2");
    assert_eq!(select_best(&group(&["img1"]), &s).unwrap(), "img1");
    assert!(select_best(&group(&["img1", "img9"]), &s).unwrap_err().to_string().contains("img9"));
    let tie: HashMap<String, f64> = [("b".to_string(), 0.7), ("a".to_string(), 0.7)].into();
    assert_eq!(select_best(&group(&["b", "a"]), &tie).unwrap(), "a");
}

#[test]
fn verify_examples() {
    let f: BTreeMap<String, Vec<f64>> = [
        ("f".to_string(), vec![1.0, 0.0]),
        ("g".to_string(), vec![0.5f64.sqrt(), 0.5f64.sqrt()]),
        ("h".to_string(), vec![3.0, 0.0]),
    ]
    .into();
    let pair = |a: &str, b: &str| PairLabel {
        template_a: a.into(),
        template_b: b.into(),
        same: false,
    };
    let sims = verify_pairs(&f, &[pair("f", "g"), pair("f", "h"), pair("g", "f")]).unwrap();
    assert!((sims[0] - 2f64.sqrt() / 2.0).abs() < 1e-12);
    assert!((sims[1] - 1.0).abs() < 1e-12);
    assert_eq!(sims[0], sims[2]);
    assert!(verify_pairs(&f, &[pair("f", "missing")])
        .unwrap_err()
        .to_string()
        .contains("missing"));
}

#[test]
fn combination_example() {
    assert!((score_combination(&[1.0, 0.5], &[0.6, 0.4]).unwrap() - 0.8).abs() < 1e-12);
    assert!(score_combination(&[1.0, 0.5], &[0.7, 0.4]).is_err());
}

#[test]
fn blur_ladder_strictly_decreases() {
    assert_eq!(ladders::blur_violations(), 0);
}

#[test]
fn jpeg_ladder_never_increases() {
    assert_eq!(ladders::jpeg_violations(), 0);
}

#[test]
fn blur_score_orders_gaussian_blur() {
    let img = ladders::source(99);
    let blurred = image::imageops::blur(&img, 2.0);
    assert!(score_blur(&img) > score_blur(&blurred));
    assert_eq!(score_blur(&RgbImage::from_pixel(16, 16, image::Rgb([7, 7, 7]))), 0.0);
}

#[test]
fn jpeg_score_prefers_uncompressed_source() {
    let img = ladders::source(3);
    let q10 = encode_jpeg(&img, 10).unwrap();
    assert!(score_jpeg(&img).unwrap() > score_jpeg_bytes(&q10).unwrap());
    assert_eq!(score_jpeg_bytes(&q10).unwrap(), score_jpeg_bytes(&q10.clone()).unwrap());
}

fn transforms() -> Vec<fn(f64) -> f64> {
    vec![|x| 100.0 * x, |x| x.exp(), |x| x * x * x - 5.0, |x| (x / (1.0 - x + 1e-3)).ln()]
}

proptest! {
    #[test]
    fn selection_ignores_monotone_rescaling(raw in prop::collection::vec(0u32..50, 1..12), t in 0usize..4) {
        // Scores on a coarse grid so ties occur and stay ties.
        let ids: Vec<String> = (0..raw.len()).map(|i| format!("img{:02}", (i * 7) % 13 + i * 13)).collect();
        let scores: HashMap<String, f64> = ids.iter().zip(&raw).map(|(id, &r)| (id.clone(), r as f64 / 50.0)).collect();
        let f = transforms()[t];
        let mapped: HashMap<String, f64> = scores.iter().map(|(k, &v)| (k.clone(), f(v))).collect();
        let g = TemplateGroup { template_id: "t".into(), image_ids: ids };
        prop_assert_eq!(select_best(&g, &scores).unwrap(), select_best(&g, &mapped).unwrap());
    }

    #[test]
    fn roc_curve_is_monotone(seed in 0u64..10_000) {
        let (sims, labels) = instance(seed);
        let r = roc(&sims, &labels).unwrap();
        prop_assert!(r.points.windows(2).all(|w| w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr));
        prop_assert_eq!((r.points[0].fpr, r.points[0].tpr), (0.0, 0.0));
        let last = r.points.last().unwrap();
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }
}
