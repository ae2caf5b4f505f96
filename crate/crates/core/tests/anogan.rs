use ocad_core::anogan::{anogan_score, grad_check_inversion, AnoganConfig, AnoganModel, InversionConfig};
use ocad_core::dataio::ClassLabel;
use ocad_core::numerics::{GradCheckConfig, Tensor};
use proptest::prelude::*;
use rand::Rng;

fn mini(seed: u64) -> AnoganConfig {
    AnoganConfig {
        nz: 8,
        ngf: 2,
        image_size: 16,
        epochs: 1,
        seed,
        ..AnoganConfig::default()
    }
}

fn image(seed: u64) -> Tensor {
    let mut rng = ocad_core::seed::rng(seed);
    Tensor::from_fn(&[1, 16, 16], |_| rng.random_range(-1.0..1.0))
}

#[test]
fn latent_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let model = AnoganModel::build_with_init_std(mini(seed), 0.3).unwrap();
        let x = image(50 + seed);
        let z = model.sample_latent(&mut ocad_core::seed::rng(seed));
        for lambda in [0.0, 0.1, 1.0] {
            let report = grad_check_inversion(&model, &x, &z, lambda, GradCheckConfig::default()).unwrap();
            assert!(report.passed, "seed {seed} lambda {lambda}: {:.3e}", report.max_error);
        }
    }
}

#[test]
fn scores_are_deterministic_and_non_negative() {
    let mut model = AnoganModel::build(mini(1)).unwrap();
    let data: Vec<_> = (0..4).map(|s| (ClassLabel::Pd, image(s))).collect();
    model.train(&data).unwrap();
    model
        .set_inversion(InversionConfig {
            steps: 30,
            ..Default::default()
        })
        .unwrap();
    for s in 10..14 {
        let x = image(s);
        let a = anogan_score(&model, &x, s).unwrap();
        assert!(a >= 0.0);
        assert_eq!(a, anogan_score(&model, &x, s).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn best_so_far_never_increases(seed in 0u64..1000, step_size in 0.001f64..2.0, lambda in 0.0f64..=1.0) {
        let model = AnoganModel::build(mini(seed % 7)).unwrap();
        let cfg = InversionConfig { steps: 15, lambda, step_size };
        let inv = model.invert_latent(&image(seed), &cfg, seed, None).unwrap();
        let env = inv.best_so_far();
        prop_assert!(env.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(*env.last().unwrap(), inv.loss);
        prop_assert!(inv.trace.iter().all(|v| *v >= 0.0));
    }
}
