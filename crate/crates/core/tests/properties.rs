use confid::model::{forward, total_loss, unsupervised_loss, LossValue};
use confid::pseudo_label::{class_confidence, dynamic_threshold, map_learning_status, pseudo_label_mask, update_stats};
use confid::resample::{build_distribution, instance_weight, warm_factor, WarmFactor, WEIGHT_FLOOR};
use confid::{ClassConfidence, ClassConfidenceStats, MappingKind, ModelParams, ProbVector, ThresholdVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn logits(classes: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-30.0..30.0f64, classes)
}

fn prob_batch(classes: usize, max_len: usize) -> impl Strategy<Value = Vec<ProbVector>> {
    prop::collection::vec(logits(classes), 0..max_len)
        .prop_map(|ls| ls.iter().map(|l| ProbVector::from_logits(l)).collect())
}

fn mapping() -> impl Strategy<Value = MappingKind> {
    prop_oneof![
        Just(MappingKind::Concave),
        Just(MappingKind::Linear),
        Just(MappingKind::Exponential)
    ]
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(z in logits(6)) {
        let p = ProbVector::from_logits(&z);
        prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.as_slice().iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn argmax_ignores_logit_shift(z in logits(5), k in -100.0..100.0f64) {
        let shifted: Vec<f64> = z.iter().map(|v| v + k).collect();
        prop_assert_eq!(ProbVector::from_logits(&z).argmax(), ProbVector::from_logits(&shifted).argmax());
    }

    #[test]
    fn total_loss_is_linear(a in 0.0..10.0f64, b in 0.0..10.0f64, ls in 0.0..3.0f64, lu in 0.0..3.0f64, t in 0.0..2.0f64) {
        let l = |v| LossValue::new(v).unwrap();
        let whole = total_loss(l(t * a), l(t * b), ls, lu).value();
        let scaled = t * total_loss(l(a), l(b), ls, lu).value();
        prop_assert!((whole - scaled).abs() <= 1e-9 * (1.0 + whole.abs()));
    }

    #[test]
    fn mappings_are_monotone_into_unit_interval(x in 0.0..=1.0f64, dx in 0.0..=1.0f64, kind in mapping()) {
        let y = (x + dx).min(1.0);
        let mx = map_learning_status(x, kind).unwrap();
        let my = map_learning_status(y, kind).unwrap();
        prop_assert!((0.0..=1.0).contains(&mx));
        prop_assert!(my >= mx);
        if kind == MappingKind::Concave {
            prop_assert!(mx <= x);
        }
    }

    #[test]
    fn thresholds_stay_in_band(ps in prop::collection::vec(prop::option::of(0.0..=1.0f64), 1..10), tau in 0.501..0.999f64, kind in mapping()) {
        let th = dynamic_threshold(&ClassConfidence(ps), tau, kind).unwrap();
        prop_assert!(th.as_slice().iter().all(|&t| t >= 1.0 - tau && t <= tau));
    }

    #[test]
    fn raising_a_threshold_never_adds_pseudo_labels(
        batch in prob_batch(4, 40),
        th in prop::collection::vec(0.0..1.0f64, 4),
        class in 0usize..4,
        bump in 0.0..0.5f64,
    ) {
        let low = ThresholdVector::from_vec(th.clone());
        let mut raised = th;
        raised[class] += bump;
        let high = ThresholdVector::from_vec(raised);
        let a = pseudo_label_mask(&batch, &low);
        let b = pseudo_label_mask(&batch, &high);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x.keep || !y.keep);
        }

        let params = ModelParams::init(2, 3, 4, &mut ChaCha8Rng::seed_from_u64(batch.len() as u64)).unwrap();
        let strong = vec![vec![0.3, -0.7]; batch.len()];
        let (l_low, n_low) = unsupervised_loss(&params, &batch, &strong, &low).unwrap();
        let (l_high, n_high) = unsupervised_loss(&params, &batch, &strong, &high).unwrap();
        prop_assert!(n_high <= n_low);
        prop_assert!(l_high.value() <= l_low.value() + 1e-12);
    }

    #[test]
    fn stats_compose_and_respect_bounds(a in prob_batch(3, 30), b in prob_batch(3, 30)) {
        let fresh = ClassConfidenceStats::new(3);
        let joined: Vec<ProbVector> = a.iter().chain(&b).cloned().collect();
        let stepwise = update_stats(update_stats(fresh.clone(), &a), &b);
        prop_assert_eq!(&stepwise, &update_stats(fresh.clone(), &joined));

        let mut left = update_stats(fresh.clone(), &a);
        left.merge(&update_stats(fresh.clone(), &b));
        let mut reversed = joined.clone();
        reversed.reverse();
        let rev = update_stats(fresh, &reversed);
        for s in [&left, &rev] {
            prop_assert_eq!(s.count(), stepwise.count());
            for (x, y) in s.sum_conf().iter().zip(stepwise.sum_conf()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        for (s, &n) in stepwise.sum_conf().iter().zip(stepwise.count()) {
            prop_assert!(*s <= n as f64 + 1e-12);
            prop_assert!(n > 0 || *s == 0.0);
        }
        for p in class_confidence(&stepwise).0.into_iter().flatten() {
            prop_assert!((1.0 / 3.0 - 1e-12..=1.0).contains(&p));
        }
    }

    #[test]
    fn crossing_tau_adds_exactly_one(pc in 0.0..=1.0f64, p in 0.0..=1.0f64, w in 0.001..=1.0f64) {
        let warm = WarmFactor::from_value(w).unwrap();
        let high_branch = instance_weight(pc, p, warm, pc - 1e-9);
        let low_branch = instance_weight(pc, p, warm, pc);
        if 1.0 - w * pc * p >= WEIGHT_FLOOR {
            prop_assert!((low_branch - high_branch - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_decreases_with_status(pc in 0.0..=0.8f64, p in 0.0..=1.0f64, dp in 0.01..=0.2f64, w in 0.001..=1.0f64) {
        let warm = WarmFactor::from_value(w).unwrap();
        let lower = instance_weight(pc, p.min(1.0 - dp), warm, 0.8);
        let higher = instance_weight(pc, p.min(1.0 - dp) + dp, warm, 0.8);
        if pc > 0.0 {
            prop_assert!(higher < lower);
        }
    }

    #[test]
    fn warm_factor_increases(emax in 1usize..500, e in 0usize..500) {
        let e = e % emax;
        prop_assert!(warm_factor(e + 1, emax).unwrap().value() > warm_factor(e, emax).unwrap().value());
    }

    #[test]
    fn normalized_weights_form_a_distribution(raw in prop::collection::vec(WEIGHT_FLOOR..2.0f64, 1..200)) {
        let t = build_distribution(raw.clone()).unwrap();
        prop_assert!((t.dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let total: f64 = raw.iter().sum();
        for (d, r) in t.dist.iter().zip(&raw) {
            prop_assert!((d * total - r).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_outputs_valid_probabilities(seed in 0u64..1000, x in prop::collection::vec(-5.0..5.0f64, 4)) {
        let p = ModelParams::init(4, 8, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let probs = forward(&p, &x).unwrap();
        prop_assert!(ProbVector::new(probs.as_slice().to_vec()).is_ok());
    }
}
