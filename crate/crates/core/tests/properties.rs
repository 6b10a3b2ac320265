mod common;

use ndarray::{Array2, Array3};
use proptest::prelude::*;
use rand::Rng;

use common::*;
use metricopt::averaging::{
    instance_utility, macro_utility, micro_confusion, micro_utility, AveragingSpec,
};
use metricopt::confusion::{
    expected_confusion, per_sample_confusions, sample_confusion, ConfusionTensor, ProbabilityField,
};
use metricopt::decision::{predict_with_losses, LossTensor, WeightedClassifier};
use metricopt::estimators::MultinomialLr;
use metricopt::metrics::{loss_from_gamma, LossMatrix, MetricSpec};

fn linear_specs(k: usize) -> Vec<MetricSpec> {
    vec![
        MetricSpec::ordinal(k).unwrap(),
        MetricSpec::weighted_exp(0.5, k).unwrap(),
        MetricSpec::weighted_exp(0.0, k).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixtures_of_confusions_stay_feasible(
        seed in any::<u64>(), n in 1usize..20, m in 1usize..4, k in 2usize..5, alpha in 0.0f64..=1.0,
    ) {
        let mut r = rng(seed);
        let y = random_classes(&mut r, n, m, k);
        let h1 = random_classes(&mut r, n, m, k);
        let h2 = random_classes(&mut r, n, m, k);
        let c1 = sample_confusion(&y, &h1).unwrap();
        let c2 = sample_confusion(&y, &h2).unwrap();
        let mixed = ConfusionTensor::mix(&c1, &c2, alpha).unwrap();
        for slice in mixed.values().outer_iter() {
            prop_assert!((slice.sum() - 1.0).abs() < 1e-12);
            prop_assert!(slice.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn expected_confusion_is_linear_in_probabilities(
        seed in any::<u64>(), n in 1usize..15, m in 1usize..3, k in 2usize..5, t in 0.0f64..=1.0,
    ) {
        let mut r = rng(seed);
        let p = random_probs(&mut r, n, m, k);
        let q = random_probs(&mut r, n, m, k);
        let h = random_classes(&mut r, n, m, k);
        let mix = ProbabilityField::new(p.values() * t + q.values() * (1.0 - t)).unwrap();
        let lhs = expected_confusion(&mix, &h).unwrap();
        let rhs = expected_confusion(&p, &h).unwrap().values() * t
            + expected_confusion(&q, &h).unwrap().values() * (1.0 - t);
        for (a, b) in lhs.values().iter().zip(rhs.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn expected_confusion_matches_reference(seed in any::<u64>(), n in 1usize..12, k in 2usize..5) {
        let mut r = rng(seed);
        let p = random_probs(&mut r, n, 1, k);
        let h = random_classes(&mut r, n, 1, k);
        let eta: Vec<Vec<f64>> = (0..n).map(|i| p.row(i, 0).to_vec()).collect();
        let preds: Vec<usize> = (0..n).map(|i| h.get(i, 0)).collect();
        let reference = ref_expected_confusion(&eta, &preds, k);
        let got = expected_confusion(&p, &h).unwrap();
        for (a, b) in got.slice(0).iter().zip(reference.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn metrics_match_reference_formulas(seed in any::<u64>(), k in 2usize..7) {
        let mut r = rng(seed);
        let c = random_confusion(&mut r, k, 0.01);
        let v = c.view();
        prop_assert!(close(MetricSpec::ordinal(k).unwrap().evaluate(v).unwrap(), ref_ordinal(&c), 1e-12));
        prop_assert!(close(MetricSpec::micro_f1(k).unwrap().evaluate(v).unwrap(), ref_micro_f1(&c, 0), 1e-12));
        prop_assert!(close(MetricSpec::macro_f1(k).unwrap().evaluate(v).unwrap(), ref_macro_f1(&c), 1e-12));
        prop_assert!(close(MetricSpec::weighted_exp(0.7, k).unwrap().evaluate(v).unwrap(), ref_weighted_exp(&c, 0.7), 1e-12));
    }

    #[test]
    fn diagonal_shifts_never_lower_monotone_metrics(
        seed in any::<u64>(), k in 2usize..6, frac in 0.0f64..=1.0,
    ) {
        let mut r = rng(seed);
        let c = random_confusion(&mut r, k, 0.01);
        let specs = [
            MetricSpec::ordinal(k).unwrap(),
            MetricSpec::weighted_exp(0.5, k).unwrap(),
            MetricSpec::micro_f1(k).unwrap(),
        ];
        for row in 0..k {
            for col in (0..k).filter(|&j| j != row) {
                let mut moved = c.clone();
                let delta = moved[[row, col]] * frac;
                moved[[row, col]] -= delta;
                moved[[row, row]] += delta;
                for spec in &specs {
                    let before = spec.evaluate(c.view()).unwrap();
                    let after = spec.evaluate(moved.view()).unwrap();
                    prop_assert!(after >= before - 1e-12, "{} fell from {before} to {after}", spec.name());
                }
            }
        }
    }

    #[test]
    fn metrics_stay_in_unit_range(seed in any::<u64>(), k in 2usize..6, sparse in any::<bool>()) {
        let mut r = rng(seed);
        let mut c = random_confusion(&mut r, k, 0.0);
        if sparse {
            c.mapv_inplace(|v| if v < 0.5 / (k * k) as f64 { 0.0 } else { v });
            let total = c.sum();
            c /= total;
        }
        let specs = [
            MetricSpec::ordinal(k).unwrap(),
            MetricSpec::weighted_exp(0.5, k).unwrap(),
            MetricSpec::micro_f1(k).unwrap(),
            MetricSpec::macro_f1(k).unwrap(),
            MetricSpec::new(metricopt::metrics::MetricKind::MinMax, k).unwrap(),
        ];
        for spec in &specs {
            if let Ok(u) = spec.evaluate(c.view()) {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&u), "{} = {u}", spec.name());
            }
        }
    }

    #[test]
    fn fractional_forms_agree_with_direct_evaluation(seed in any::<u64>(), k in 2usize..6) {
        let mut r = rng(seed);
        let c = random_confusion(&mut r, k, 0.01);
        for spec in [
            MetricSpec::ordinal(k).unwrap(),
            MetricSpec::micro_f1(k).unwrap(),
            MetricSpec::weighted_exp(1.3, k).unwrap(),
        ] {
            let flm = spec.to_fractional_linear().unwrap();
            let direct = spec.evaluate(c.view()).unwrap();
            prop_assert!(close(flm.evaluate(c.view()).unwrap(), direct, 1e-10));
        }
    }

    #[test]
    fn decision_is_invariant_under_positive_affine_maps(
        seed in any::<u64>(), n in 1usize..30, m in 1usize..3, k in 2usize..5,
        scale in 0.01f64..100.0, shift in -10.0f64..10.0,
    ) {
        let mut r = rng(seed);
        let p = random_probs(&mut r, n, m, k);
        let losses: Vec<Array2<f64>> = (0..m).map(|_| random_confusion(&mut r, k, 0.0) * (k * k) as f64).collect();
        let moved: Vec<Array2<f64>> = losses.iter().map(|l| l * scale + shift).collect();
        let views: Vec<_> = losses.iter().map(|l| l.view()).collect();
        let moved_views: Vec<_> = moved.iter().map(|l| l.view()).collect();
        prop_assert_eq!(
            predict_with_losses(&views, &p).unwrap(),
            predict_with_losses(&moved_views, &p).unwrap()
        );
    }

    #[test]
    fn decision_matches_reference_rule(seed in any::<u64>(), n in 1usize..20, k in 2usize..6) {
        let mut r = rng(seed);
        let p = random_probs(&mut r, n, 1, k);
        let loss = random_confusion(&mut r, k, 0.0) * (k * k) as f64;
        let preds = predict_with_losses(&[loss.view()], &p).unwrap();
        for i in 0..n {
            prop_assert_eq!(preds.get(i, 0), ref_decision(&loss, &p.row(i, 0).to_vec()));
        }
    }

    #[test]
    fn each_output_uses_only_its_own_slice(
        seed in any::<u64>(), n in 1usize..20, k in 2usize..5,
    ) {
        let mut r = rng(seed);
        let p = random_probs(&mut r, n, 3, k);
        let slice = |r: &mut rand_chacha::ChaCha8Rng| {
            let raw = random_confusion(r, k, 0.0);
            LossMatrix::normalized(&raw)
        };
        let base = vec![slice(&mut r), slice(&mut r), slice(&mut r)];
        let mut perturbed = base.clone();
        perturbed[0] = slice(&mut r);
        perturbed[2] = slice(&mut r);
        let a = WeightedClassifier::new(LossTensor::new(base).unwrap()).predict(&p).unwrap();
        let b = WeightedClassifier::new(LossTensor::new(perturbed).unwrap()).predict(&p).unwrap();
        for i in 0..n {
            prop_assert_eq!(a.get(i, 1), b.get(i, 1));
        }
    }

    #[test]
    fn linear_metrics_agree_across_averaging_modes(
        seed in any::<u64>(), n in 1usize..25, m in 1usize..4, k in 2usize..5,
    ) {
        let mut r = rng(seed);
        let y = random_classes(&mut r, n, m, k);
        let h = random_classes(&mut r, n, m, k);
        let conf = sample_confusion(&y, &h).unwrap();
        let per = per_sample_confusions(&y, &h).unwrap();
        for spec in linear_specs(k) {
            let micro = micro_utility(&spec, &conf, &AveragingSpec::micro()).unwrap();
            let macro_ = macro_utility(&spec, &conf, &AveragingSpec::macro_()).unwrap();
            let instance = instance_utility(&spec, &per, &AveragingSpec::instance()).unwrap();
            prop_assert!(close(micro, macro_, 1e-12));
            prop_assert!(close(micro, instance, 1e-12));
        }
    }

    #[test]
    fn output_weight_scaling_is_linear(
        seed in any::<u64>(), n in 1usize..20, m in 1usize..4, k in 2usize..4, s in 0.1f64..10.0,
    ) {
        let mut r = rng(seed);
        let y = random_classes(&mut r, n, m, k);
        let h = random_classes(&mut r, n, m, k);
        let conf = sample_confusion(&y, &h).unwrap();
        let w: Vec<f64> = (0..m).map(|_| r.random_range(0.1..1.0)).collect();
        let ws: Vec<f64> = w.iter().map(|v| v * s).collect();
        let a = micro_confusion(&conf, &w).unwrap();
        let b = micro_confusion(&conf, &ws).unwrap();
        for (x, z) in a.iter().zip(b.iter()) {
            prop_assert!(close(x * s, *z, 1e-12));
        }
        let spec = MetricSpec::ordinal(k).unwrap();
        let ma = macro_utility(&spec, &conf, &AveragingSpec::macro_().with_weights(w)).unwrap();
        let mb = macro_utility(&spec, &conf, &AveragingSpec::macro_().with_weights(ws)).unwrap();
        prop_assert!(close(ma * s, mb, 1e-12));
    }

    #[test]
    fn predicted_rows_lie_on_the_simplex(seed in any::<u64>(), n in 1usize..20, d in 1usize..6, k in 2usize..6) {
        let mut r = rng(seed);
        let w = Array2::from_shape_fn((k, d), |_| r.random_range(-30.0..30.0));
        let x = Array2::from_shape_fn((n, d), |_| r.random_range(-5.0..5.0));
        let p = MultinomialLr::from_weights(vec![w]).unwrap().predict_proba(&x).unwrap();
        for i in 0..n {
            let row = p.row(i, 0);
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn bisection_loss_is_normalized(seed in any::<u64>(), k in 2usize..6, gamma in 0.0f64..=1.0) {
        let _ = seed;
        let flm = MetricSpec::micro_f1(k).unwrap().to_fractional_linear().unwrap();
        let loss = loss_from_gamma(&flm, gamma);
        let lo = loss.values().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = loss.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo == 0.0 && hi == 1.0);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut r = rng(11);
    for trial in 0..100 {
        let k = 2 + trial % 4;
        let c = random_confusion(&mut r, k, 0.05);
        for spec in [
            MetricSpec::ordinal(k).unwrap(),
            MetricSpec::weighted_exp(0.5, k).unwrap(),
            MetricSpec::micro_f1(k).unwrap(),
            MetricSpec::macro_f1(k).unwrap(),
        ] {
            let analytic = spec.gradient(c.view()).unwrap();
            let numeric = fd_gradient(|x| spec.evaluate(x.view()).unwrap(), &c, 1e-6);
            let diff = (&analytic - &numeric).mapv(|v| v * v).sum().sqrt();
            let scale = numeric.mapv(|v| v * v).sum().sqrt().max(1.0);
            assert!(
                diff / scale <= 1e-5,
                "{} trial {trial}: {diff}",
                spec.name()
            );
        }
    }
}

#[test]
fn macro_optimum_decomposes_over_outputs() {
    let mut r = rng(5);
    for _ in 0..20 {
        let n = 1 + r.random_range(0..6);
        let y = random_classes(&mut r, n, 2, 2);
        let spec = MetricSpec::micro_f1(2).unwrap();
        let (joint, _) =
            metricopt::bisection::brute_force_oracle(&y, None, &spec, &AveragingSpec::macro_())
                .unwrap();
        let mut separate = 0.0;
        for m in 0..2 {
            let (u, _) = metricopt::bisection::brute_force_oracle(
                &y.output(m),
                None,
                &spec,
                &AveragingSpec::micro(),
            )
            .unwrap();
            separate += u / 2.0;
        }
        assert!(close(joint, separate, 1e-12), "{joint} vs {separate}");
    }
}

#[test]
fn weight_scaling_keeps_the_macro_maximizer() {
    let mut r = rng(9);
    for _ in 0..10 {
        let y = random_classes(&mut r, 4, 2, 2);
        let spec = MetricSpec::ordinal(2).unwrap();
        let w = vec![0.3, 0.7];
        let a = metricopt::bisection::brute_force_oracle(
            &y,
            None,
            &spec,
            &AveragingSpec::macro_().with_weights(w.clone()),
        )
        .unwrap();
        let b = metricopt::bisection::brute_force_oracle(
            &y,
            None,
            &spec,
            &AveragingSpec::macro_().with_weights(w.iter().map(|v| v * 4.0).collect()),
        )
        .unwrap();
        assert_eq!(a.1, b.1);
        assert!(close(a.0 * 4.0, b.0, 1e-12));
    }
}

#[test]
fn confusion_tensor_rejects_mass_errors() {
    let bad = Array3::from_elem((1, 2, 2), 0.3);
    assert!(ConfusionTensor::new(bad).is_err());
}
