//! Measure axioms, Jordan decomposition and set algebra on random inputs.

use proptest::prelude::*;
use taylor_measure::{CoefficientSequence, MeasureValue, NatSet, TailModel, TaylorMeasure};

const EPS: f64 = 1e-12;

fn measure() -> impl Strategy<Value = TaylorMeasure<f64>> {
    (prop::collection::vec(-20f64..20.0, 0..10), -3f64..3.0, -1.5f64..1.5, -4f64..4.0, any::<bool>()).prop_map(
        |(prefix, c, b, gamma, geo)| {
            let tail = if geo { TailModel::Geometric { m: c, b } } else { TailModel::Constant(c) };
            TaylorMeasure::new(CoefficientSequence::explicit(prefix, tail).unwrap(), gamma).unwrap()
        },
    )
}

fn finite_set() -> impl Strategy<Value = NatSet> {
    prop::collection::vec(0u64..40, 0..15).prop_map(NatSet::finite)
}

fn set() -> impl Strategy<Value = NatSet> {
    (finite_set(), 0u8..3).prop_map(|(s, k)| match k {
        0 => s,
        1 => s.complement(),
        _ => NatSet::All,
    })
}

fn close(a: MeasureValue<f64>, b: f64, extra: f64) -> bool {
    (a.value - b).abs() <= a.abs_error + extra + 1e-13 * b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn finite_additivity(t in measure(), a in finite_set(), b in finite_set()) {
        let b = b.intersection(&a.complement());
        let whole = t.evaluate(&a.union(&b), EPS).unwrap();
        let (va, vb) = (t.evaluate(&a, EPS).unwrap(), t.evaluate(&b, EPS).unwrap());
        prop_assert!(close(whole, va.value + vb.value, va.abs_error + vb.abs_error));
    }

    #[test]
    fn complement_adds_to_total(t in measure(), a in finite_set()) {
        let total = t.total_mass(EPS).unwrap();
        let (va, vc) = (t.evaluate(&a, EPS).unwrap(), t.evaluate(&a.complement(), EPS).unwrap());
        prop_assert!(close(total, va.value + vc.value, va.abs_error + vc.abs_error));
    }

    #[test]
    fn jordan_parts(t in measure(), s in set()) {
        let parts = t.parts(&s, EPS).unwrap();
        prop_assert!(parts.positive.value >= 0.0 && parts.negative.value >= 0.0);
        let v = t.evaluate(&s, EPS).unwrap();
        prop_assert_eq!(v.value, parts.positive.value - parts.negative.value);
        let tv = t.total_variation(&s, EPS).unwrap();
        prop_assert!(tv.value + tv.abs_error + v.abs_error >= v.value.abs());
        let j = t.jordan_decompose();
        prop_assert_eq!(j.positive(&s, EPS).unwrap(), parts.positive);
        prop_assert_eq!(j.negative(&s, EPS).unwrap(), parts.negative);
    }

    #[test]
    fn hahn_set_separates_signs(t in measure(), n in 0u64..60) {
        let j = t.jordan_decompose();
        let term = t.term(n).value();
        prop_assert_eq!(j.hahn_positive(n), term >= 0.0);
    }

    #[test]
    fn positive_part_lives_on_hahn_set(t in measure()) {
        let hahn = NatSet::finite((0..60).filter(|&n| t.jordan_decompose().hahn_positive(n)));
        let on = t.parts(&hahn, EPS).unwrap();
        let off = t.parts(&hahn.complement(), EPS).unwrap();
        prop_assert_eq!(on.negative.value, 0.0);
        prop_assert!(off.positive.value <= off.positive.abs_error + 1e-300);
    }

    #[test]
    fn linear_combination_is_linear(
        t1 in measure(), t2 in measure(), alpha in -3f64..3.0, beta in -3f64..3.0, s in set(),
    ) {
        let c = TaylorMeasure::linear_combination(alpha, &t1, beta, &t2);
        let v = c.evaluate(&s, EPS).unwrap();
        let (v1, v2) = (t1.evaluate(&s, EPS).unwrap(), t2.evaluate(&s, EPS).unwrap());
        let extra = alpha.abs() * v1.abs_error + beta.abs() * v2.abs_error;
        let scale = alpha.abs() * t1.total_variation(&s, EPS).unwrap().value
            + beta.abs() * t2.total_variation(&s, EPS).unwrap().value;
        prop_assert!(close(v, alpha * v1.value + beta * v2.value, extra + 1e-14 * scale), "{v:?}");
    }

    #[test]
    fn set_algebra(a in set(), b in set(), n in 0u64..60) {
        prop_assert_eq!(a.complement().complement(), a.clone());
        prop_assert_eq!(a.union(&b).contains(n), a.contains(n) || b.contains(n));
        prop_assert_eq!(a.intersection(&b).contains(n), a.contains(n) && b.contains(n));
        prop_assert_eq!(a.union(&b).complement(), a.complement().intersection(&b.complement()));
        let listed: Vec<u64> = a.members_up_to(59).collect();
        let brute: Vec<u64> = (0..60).filter(|&k| a.contains(k)).collect();
        prop_assert_eq!(listed, brute);
    }
}
