use ocad_core::dataio::ClassLabel;
use ocad_core::stats::{
    confusion_at_threshold, f_cdf, make_folds, one_way_anova, roc_auc, select_threshold, subject_aggregate,
    PositiveRule, SampleScore, ThresholdCriterion,
};
use proptest::prelude::*;

fn labels_from(bits: &[bool]) -> Vec<ClassLabel> {
    bits.iter().map(|&b| if b { ClassLabel::Pd } else { ClassLabel::Control }).collect()
}

fn mann_whitney(scores: &[f64], labels: &[ClassLabel]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == ClassLabel::Pd && labels[j] == ClassLabel::Control {
                pairs += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / pairs
}

fn both_classes(bits: &[bool]) -> bool {
    bits.iter().any(|&b| b) && bits.iter().any(|&b| !b)
}

/// Scores drawn from a small grid so ties are common.
fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..50).prop_flat_map(|n| {
        (
            prop::collection::vec((0u32..20).prop_map(|v| v as f64 / 7.0), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn trapezoid_matches_pair_counting((scores, bits) in scored()) {
        prop_assume!(both_classes(&bits));
        let labels = labels_from(&bits);
        let roc = roc_auc(&scores, &labels, PositiveRule::PdHigh).unwrap();
        prop_assert!((roc.auc - mann_whitney(&scores, &labels)).abs() < 1e-12);
        let low = roc_auc(&scores, &labels, PositiveRule::PdLow).unwrap();
        prop_assert!((low.auc - (1.0 - roc.auc)).abs() < 1e-12);
        for w in roc.points.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }

    #[test]
    fn auc_ignores_monotone_transforms((scores, bits) in scored()) {
        prop_assume!(both_classes(&bits));
        let labels = labels_from(&bits);
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + s).collect();
        let a = roc_auc(&scores, &labels, PositiveRule::PdLow).unwrap().auc;
        let b = roc_auc(&warped, &labels, PositiveRule::PdLow).unwrap().auc;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn selected_threshold_is_scan_optimal((scores, bits) in scored()) {
        prop_assume!(both_classes(&bits));
        let mut distinct = scores.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        prop_assume!(distinct.len() >= 2);
        let labels = labels_from(&bits);
        let choice = select_threshold(&scores, &labels, PositiveRule::PdLow, ThresholdCriterion::MaxF1).unwrap();
        // exhaustive oracle over every midpoint, first maximum wins
        let mut best = (f64::NAN, -1.0);
        for w in distinct.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let f1 = confusion_at_threshold(&scores, &labels, t, PositiveRule::PdLow).f1;
            if f1 > best.1 {
                best = (t, f1);
            }
        }
        prop_assert_eq!(choice.confusion.f1, best.1);
        prop_assert!((choice.threshold - best.0).abs() < 1e-12);
        let c = choice.confusion;
        prop_assert!((c.precision * (c.tp + c.fp) as f64 - c.tp as f64).abs() < 1e-12);
    }

    #[test]
    fn threshold_shifts_with_scores((scores, bits) in scored(), shift in -4i32..4) {
        prop_assume!(both_classes(&bits));
        let labels = labels_from(&bits);
        let shift = shift as f64 * 0.25;
        let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        let Ok(a) = select_threshold(&scores, &labels, PositiveRule::PdLow, ThresholdCriterion::MaxF1) else {
            return Ok(());
        };
        let b = select_threshold(&shifted, &labels, PositiveRule::PdLow, ThresholdCriterion::MaxF1).unwrap();
        prop_assert!((b.threshold - a.threshold - shift).abs() < 1e-12);
    }

    #[test]
    fn anova_is_affine_invariant(
        a in prop::collection::vec(-10.0f64..10.0, 2..12),
        b in prop::collection::vec(-10.0f64..10.0, 2..12),
        shift in -100.0f64..100.0,
        scale in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
    ) {
        let base = one_way_anova(&[&a, &b]).unwrap();
        let sa: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let sb: Vec<f64> = b.iter().map(|v| v + shift).collect();
        let shifted = one_way_anova(&[&sa, &sb]).unwrap();
        prop_assert!((shifted.f - base.f).abs() <= 1e-7 * base.f.max(1.0));
        let ma: Vec<f64> = a.iter().map(|v| v * scale).collect();
        let mb: Vec<f64> = b.iter().map(|v| v * scale).collect();
        let scaled = one_way_anova(&[&ma, &mb]).unwrap();
        prop_assert!((scaled.f - base.f).abs() <= 1e-9 * base.f.max(1.0));
        prop_assert!((0.0..=1.0).contains(&base.p));
        prop_assert_eq!(base.df_within, a.len() + b.len() - 2);
    }

    #[test]
    fn f_cdf_is_monotone(d1 in 1u32..40, d2 in 1u32..40, x in 0.0f64..20.0, dx in 0.0f64..5.0) {
        let (d1, d2) = (d1 as f64, d2 as f64);
        let lo = f_cdf(x, d1, d2);
        let hi = f_cdf(x + dx, d1, d2);
        prop_assert!(lo <= hi + 1e-15);
        prop_assert!((0.0..=1.0).contains(&lo));
        if x > 0.0 {
            prop_assert!((lo + f_cdf(1.0 / x, d2, d1) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn folds_never_leak(n in 4usize..30, k in 2usize..6, seed in any::<u64>()) {
        let pd: Vec<String> = (0..n).map(|i| format!("pd{i:02}")).collect();
        let ct = vec!["ct01".to_string()];
        let plan = make_folds(&pd, &ct, k, (n / k).max(1), seed).unwrap();
        plan.check_leakage().unwrap();
        for f in &plan.folds {
            prop_assert_eq!(f.train_pd.len() + f.val_pd.len(), n);
        }
    }

    #[test]
    fn aggregation_ignores_sample_order(scores in prop::collection::vec(0.0f64..1.0, 1..30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let samples: Vec<SampleScore> = scores
            .iter()
            .enumerate()
            .map(|(i, &score)| SampleScore { subject_id: format!("s{}", i % 4), label: ClassLabel::Pd, score })
            .collect();
        let mut shuffled = samples.clone();
        shuffled.shuffle(&mut ocad_core::seed::rng(seed));
        prop_assert_eq!(subject_aggregate(&samples).unwrap(), subject_aggregate(&shuffled).unwrap());
    }
}

#[test]
fn independent_labels_give_chance_auc() {
    use rand::Rng;
    let mut rng = ocad_core::seed::rng(17);
    let n = 20_000;
    let scores: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let labels: Vec<ClassLabel> = (0..n)
        .map(|_| if rng.random_bool(0.5) { ClassLabel::Pd } else { ClassLabel::Control })
        .collect();
    let auc = roc_auc(&scores, &labels, PositiveRule::PdLow).unwrap().auc;
    assert!((auc - 0.5).abs() < 0.02, "{auc}");
}

#[test]
fn one_sample_per_subject_is_identity() {
    let samples: Vec<SampleScore> = (0..5)
        .map(|i| SampleScore {
            subject_id: format!("s{i}"),
            label: ClassLabel::Control,
            score: i as f64 * 0.1,
        })
        .collect();
    let agg = subject_aggregate(&samples).unwrap();
    for (s, a) in samples.iter().zip(&agg) {
        assert_eq!((s.score, &s.subject_id), (a.score, &a.subject_id));
    }
}

#[test]
fn reported_image_level_metrics_are_consistent() {
    let f1: f64 = 2.0 * 0.63 * 0.97 / (0.63 + 0.97);
    assert!((f1 - 0.76).abs() < 0.005);
}
