//! Term accuracy against exact rationals, and tail/plan soundness.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use taylor_measure::{
    plan_truncation, tail_bound, term, CoefficientSequence, GrowthCertificate, NatSet, TailModel, TaylorMeasure,
};

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Correctly rounded conversion (round to nearest, ties to even) for normal results.
fn to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let neg = r.is_negative();
    let num = r.numer().abs();
    let den = r.denom().clone();
    // scale so the integer quotient carries at least 64 bits
    let s = 65 - (num.bits() as i64 - den.bits() as i64);
    let (q, rem) = if s >= 0 {
        let n = num << (s as usize);
        (&n / &den, &n % &den)
    } else {
        let d = den << ((-s) as usize);
        (&num / &d, &num % &d)
    };
    let mut q: u128 = q.try_into().expect("quotient fits in 128 bits");
    if !rem.is_zero() {
        q |= 1; // sticky bit, far below the rounding position
    }
    let v = (q as f64) * 2f64.powi(-(s as i32));
    if neg {
        -v
    } else {
        v
    }
}

fn ulp_distance(a: f64, b: f64) -> u64 {
    let key = |x: f64| {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN - bits
        } else {
            bits
        }
    };
    (key(a) as i128 - key(b) as i128).unsigned_abs() as u64
}

#[test]
fn oracle_rounds_correctly() {
    assert_eq!(to_f64(&exact(0.1)), 0.1);
    let third = BigRational::new(BigInt::from(1), BigInt::from(3));
    assert_eq!(to_f64(&third), 1.0 / 3.0);
    let big = BigRational::from_integer(factorial(20));
    assert_eq!(to_f64(&big), 2_432_902_008_176_640_000.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn term_is_within_four_ulp(a in -1e3f64..1e3, gamma in -30f64..30.0, n in 0u64..90) {
        prop_assume!(a != 0.0 && gamma != 0.0);
        let seq = CoefficientSequence::constant(a);
        let got = term(&seq, gamma, n).value();
        let mut x = exact(a) * exact(gamma).pow(n as i32);
        x /= BigRational::from_integer(factorial(n));
        let want = to_f64(&x);
        prop_assume!(want.is_normal());
        prop_assert!(ulp_distance(got, want) <= 4, "n={n}: {got:e} vs {want:e}");
    }

    #[test]
    fn finite_sums_within_reported_error(
        terms in prop::collection::vec(-1e6f64..1e6, 1..40),
        mask in prop::collection::vec(any::<bool>(), 40),
    ) {
        let t = TaylorMeasure::from_term_values(&terms).unwrap();
        let set = NatSet::finite((0..terms.len() as u64).filter(|&i| mask[i as usize]));
        let v = t.evaluate(&set, 1e-12).unwrap();
        let sum = set.members_up_to(u64::MAX).fold(BigRational::zero(), |acc, i| acc + exact(terms[i as usize]));
        let err = (exact(v.value) - sum).abs();
        let scale: f64 = set.members_up_to(u64::MAX).map(|i| terms[i as usize].abs()).sum();
        prop_assert!(err <= exact(v.abs_error + 4.0 * f64::EPSILON * scale + f64::MIN_POSITIVE), "{v:?}");
    }

    #[test]
    fn tail_bound_dominates_exponential_tail(gamma in 0.01f64..12.0, last in 0u64..60) {
        let cert = GrowthCertificate::Bounded(1.0);
        let bound = tail_bound(&cert, gamma, last);
        let ones = CoefficientSequence::constant(1.0);
        let tail: f64 = (last + 1..last + 400).map(|n| term(&ones, gamma, n).value()).sum();
        prop_assert!(tail <= bound * (1.0 + 1e-12), "tail {tail:e} > bound {bound:e}");
    }

    #[test]
    fn tail_bound_dominates_geometric_tail(m in 0.1f64..10.0, b in 0.1f64..5.0, gamma in -4f64..4.0, last in 0u64..60) {
        let cert = GrowthCertificate::geometric(m, b);
        let bound = tail_bound(&cert, gamma, last);
        let seq = CoefficientSequence::explicit(vec![], TailModel::Geometric { m: 2.0 * m, b }).unwrap();
        let tail: f64 = (last + 1..last + 600).map(|n| term(&seq, gamma, n).value().abs()).sum();
        prop_assert!(tail <= bound * (1.0 + 1e-12), "tail {tail:e} > bound {bound:e}");
    }

    #[test]
    fn plan_is_sound_and_minimal(m in 0.1f64..100.0, gamma in -20f64..20.0, log_eps in -14f64..-2.0) {
        let eps = 10f64.powf(log_eps);
        let cert = GrowthCertificate::Bounded(m);
        let plan = plan_truncation(&cert, gamma, eps).unwrap();
        prop_assert!(plan.tail_bound <= eps);
        prop_assert_eq!(plan.tail_bound, tail_bound(&cert, gamma, plan.last_index));
        if plan.last_index > 0 {
            prop_assert!(tail_bound(&cert, gamma, plan.last_index - 1) > eps);
        }
    }

    #[test]
    fn certificates_of_explicit_sequences_hold(
        prefix in prop::collection::vec(-50f64..50.0, 0..12),
        c in -5f64..5.0,
        b in -3f64..3.0,
        geometric in any::<bool>(),
    ) {
        let tail = if geometric { TailModel::Geometric { m: c, b } } else { TailModel::Constant(c) };
        let seq = CoefficientSequence::explicit(prefix, tail).unwrap();
        prop_assert_eq!(seq.verify_certificate(200), Ok(()));
    }
}
