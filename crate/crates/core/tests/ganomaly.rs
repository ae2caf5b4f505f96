use ocad_core::dataio::ClassLabel;
use ocad_core::ganomaly::{grad_check_loss, normalize_scores, GanomalyConfig, GanomalyModel, LossTerm};
use ocad_core::numerics::{GradCheckConfig, Tensor};
use ocad_core::stats::{roc_auc, PositiveRule};
use proptest::prelude::*;
use rand::Rng;

fn mini(seed: u64) -> GanomalyConfig {
    GanomalyConfig {
        nz: 8,
        ngf: 2,
        image_size: 16,
        epochs: 1,
        seed,
        ..GanomalyConfig::default()
    }
}

fn image(seed: u64) -> Tensor {
    let mut rng = ocad_core::seed::rng(seed);
    Tensor::from_fn(&[1, 16, 16], |_| rng.random_range(-1.0..1.0))
}

/// Miniature model with weights spread wide enough that a 1e-5 step stays
/// well inside every activation's linear piece.
fn checkable(cfg: GanomalyConfig) -> GanomalyModel {
    GanomalyModel::build_with_init_std(cfg, 0.3).unwrap()
}

#[test]
fn every_training_loss_matches_finite_differences() {
    for seed in 0..10 {
        let model = checkable(mini(seed));
        let x = image(100 + seed);
        for term in LossTerm::ALL {
            let report = grad_check_loss(&model, &x, term, GradCheckConfig::default()).unwrap();
            assert!(
                report.passed,
                "{} seed {seed}: max error {:.3e} in {:?}",
                term.name(),
                report.max_error,
                report.offending
            );
        }
    }
}

#[test]
fn feature_map_shape_is_stable() {
    let model = GanomalyModel::build(mini(1)).unwrap();
    let shapes: Vec<Vec<usize>> = (0..5).map(|s| model.features(&image(s)).unwrap().0.shape().to_vec()).collect();
    assert!(shapes.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(shapes[0], vec![4, 4, 4]);
}

#[test]
fn scores_are_repeatable_and_non_negative() {
    let model = GanomalyModel::build(mini(2)).unwrap();
    for s in 0..5 {
        let x = image(s);
        let (raw, c) = model.score(&x).unwrap();
        assert!(raw >= 0.0 && c.enc >= 0.0 && c.ctx >= 0.0 && c.adv >= 0.0);
        assert_eq!(model.score(&x).unwrap(), (raw, c));
        assert_eq!(model.score_components(&x).unwrap(), c);
        assert!((raw - 8.0 * c.enc).abs() <= 1e-12 * raw.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_preserves_auc(raw in prop::collection::vec(0.0f64..100.0, 4..40), bits in prop::collection::vec(any::<bool>(), 40)) {
        let labels: Vec<ClassLabel> = raw
            .iter()
            .zip(&bits)
            .map(|(_, &b)| if b { ClassLabel::Pd } else { ClassLabel::Control })
            .collect();
        prop_assume!(labels.contains(&ClassLabel::Pd) && labels.contains(&ClassLabel::Control));
        let Ok(norm) = normalize_scores(&raw) else { return Ok(()); };
        prop_assert!(norm.iter().all(|v| (0.0..=1.0).contains(v)));
        let a = roc_auc(&raw, &labels, PositiveRule::PdLow).unwrap().auc;
        let b = roc_auc(&norm, &labels, PositiveRule::PdLow).unwrap().auc;
        prop_assert!((a - b).abs() < 1e-12);
    }
}
