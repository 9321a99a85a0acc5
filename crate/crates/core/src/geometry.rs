//! Inner product `ρ(T1, T2)(B) = Σ_{n∈B} n! p1(n) p2(n)`, its norm and metric,
//! dyadic approximation, and numerical checks of the inner-product axioms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::{PartSums, TruncationPlan};
use crate::measure::{linear_combination, MeasureValue, TaylorMeasure};
use crate::natset::NatSet;
use crate::scalar::Scalar;
use crate::wide::{factorial, Wide};

/// Single summand `a_{n,1} a_{n,2} (γ1γ2)^n / n! = n! p1(n) p2(n)`, rounded once.
pub fn rho_summand<S: Scalar>(t1: &TaylorMeasure<S>, t2: &TaylorMeasure<S>, n: u64) -> S {
    let w1 = t1.coefficients().term_wide(t1.gamma(), n);
    let w2 = t2.coefficients().term_wide(t2.gamma(), n);
    w1.mul(w2).mul(factorial::<S>(n)).to_scalar()
}

fn rho_plan<S: Scalar>(t1: &TaylorMeasure<S>, t2: &TaylorMeasure<S>, eps: S) -> Result<TruncationPlan<S>> {
    let e1 = t1.certificate().term_envelope(t1.gamma());
    let e2 = t2.certificate().term_envelope(t2.gamma());
    match (e1, e2) {
        (Some(a), Some(b)) => match a.inner_product(&b) {
            Some(env) => env.plan(eps),
            None => Err(Error::DivergenceUnknown(
                "inner product of two factorially growing sequences has no convergence certificate".into(),
            )),
        },
        _ => Err(Error::DivergenceUnknown("inner product on an infinite set needs certified operands".into())),
    }
}

/// `ρ(T1, T2)(B)`.
pub fn inner_product<S: Scalar>(
    t1: &TaylorMeasure<S>,
    t2: &TaylorMeasure<S>,
    set: &NatSet,
    eps: S,
) -> Result<MeasureValue<S>> {
    let mut sums = PartSums::new();
    let tail = match set {
        NatSet::Finite(v) => {
            for &n in v {
                sums.push(rho_summand(t1, t2, n));
            }
            S::zero()
        }
        _ => {
            if !(eps > S::zero()) {
                return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
            }
            let plan = rho_plan(t1, t2, eps)?;
            let w1 = t1.coefficients().terms_prefix_wide(t1.gamma(), plan.last_index);
            let w2 = t2.coefficients().terms_prefix_wide(t2.gamma(), plan.last_index);
            let mut fact = Wide::<S>::one();
            let mut members = set.members_up_to(plan.last_index).peekable();
            for n in 0..=plan.last_index {
                if n > 0 {
                    fact = fact.mul(Wide::from_scalar(S::of_u64(n)));
                }
                if members.peek() == Some(&n) {
                    members.next();
                    sums.push(w1[n as usize].mul(w2[n as usize]).mul(fact).to_scalar());
                }
            }
            plan.tail_bound
        }
    };
    let value = sums.signed();
    if !value.is_finite() {
        return Err(Error::OutOfDomain("inner product overflows the floating range".into()));
    }
    Ok(MeasureValue { value, abs_error: tail + sums.error_bound() + S::epsilon() * value.abs() })
}

/// `‖T‖_ρ(B) = √ρ(T, T)(B)`.
pub fn norm<S: Scalar>(t: &TaylorMeasure<S>, set: &NatSet, eps: S) -> Result<MeasureValue<S>> {
    let sq = inner_product(t, t, set, eps)?;
    sqrt_value(sq)
}

fn sqrt_value<S: Scalar>(sq: MeasureValue<S>) -> Result<MeasureValue<S>> {
    let (v, e) = (sq.value, sq.abs_error);
    if v < S::zero() {
        if -v <= e {
            return Ok(MeasureValue { value: S::zero(), abs_error: e.sqrt() });
        }
        return Err(Error::NegativeRadicand { value: v.to_f64_lossy(), abs_error: e.to_f64_lossy() });
    }
    let r = v.sqrt();
    let lower = (v - e).max(S::zero()).sqrt();
    let upper = (v + e).sqrt();
    Ok(MeasureValue { value: r, abs_error: (r - lower).max(upper - r) + S::epsilon() * r })
}

/// `d(T1, T2)(B) = ‖T1 − T2‖_ρ(B)`.
pub fn distance<S: Scalar>(
    t1: &TaylorMeasure<S>,
    t2: &TaylorMeasure<S>,
    set: &NatSet,
    eps: S,
) -> Result<MeasureValue<S>> {
    norm(&linear_combination(S::one(), t1, -S::one(), t2), set, eps)
}

/// Finitely supported measure with dyadic-rational terms within ρ-distance `tol` of `t`.
///
/// The omitted ρ-tail and the rounding of each retained term to a multiple of
/// `2^-k` are each held to `tol² / 4`, so the distance is at most `tol / √2`.
pub fn rational_approximation<S: Scalar>(t: &TaylorMeasure<S>, tol: S, max_support: u64) -> Result<TaylorMeasure<S>> {
    if !(tol > S::zero()) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let budget = tol * tol / S::of(4.0);
    let plan = rho_plan(t, t, budget)?;
    if plan.last_index > max_support {
        return Err(Error::ToleranceUnattainable(format!(
            "tolerance {tol} needs support up to {} but at most {max_support} was allowed",
            plan.last_index
        )));
    }
    let terms: Vec<S> = (0..=plan.last_index).map(|n| t.taylor_derivative(n)).collect();
    // Σ n! over the indices that will carry a rounded value
    let mut weight = S::zero();
    for (n, p) in terms.iter().enumerate() {
        if !p.is_zero() {
            weight += factorial::<S>(n as u64).to_scalar();
        }
    }
    if weight.is_zero() {
        return TaylorMeasure::from_term_values(&[]);
    }
    // (h/2)^2 · weight ≤ budget / 2 leaves half the rounding budget for floating error
    let h_max = (budget * S::of(2.0) / weight).sqrt();
    if !(h_max > S::zero()) || !h_max.is_finite() {
        return Err(Error::ToleranceUnattainable(format!("no dyadic step fits tolerance {tol}")));
    }
    let k = (-h_max.log2()).ceil().max(S::zero());
    let k = k.to_i64().unwrap_or(i64::MAX);
    let min_exp = if S::MANTISSA_DIGITS > 24 { -1000 } else { -120 };
    if -k < min_exp {
        return Err(Error::ToleranceUnattainable(format!("dyadic step 2^-{k} leaves the floating range")));
    }
    let scale = crate::scalar::pow2::<S>(k);
    let rounded: Vec<S> = terms.iter().map(|&p| (p * scale).round() / scale).collect();
    Ok(TaylorMeasure::from_term_values(&rounded)?.with_label(format!("dyadic(2^-{k})")))
}

/// Largest residuals of the inner-product axioms over all sampled pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HilbertReport<S> {
    /// `max |ρ(T1,T2) − ρ(T2,T1)|`.
    pub symmetry: S,
    /// Max relative bilinearity residual in the first argument.
    pub bilinearity: S,
    /// `min (ρ11 ρ22 − ρ12²) / (ρ11 ρ22)`; non-negative when Cauchy–Schwarz holds.
    pub cauchy_schwarz_slack: S,
    /// Max relative residual of the parallelogram identity for `‖·‖_ρ`.
    pub parallelogram_rho: S,
    /// Max absolute residual of the parallelogram identity for total variation.
    pub parallelogram_tv: S,
    pub pairs: usize,
}

/// Check symmetry, bilinearity, Cauchy–Schwarz and the parallelogram law on every
/// pair of `samples`, plus the (generally failing) parallelogram law for total variation.
pub fn hilbert_axiom_report<S: Scalar>(
    samples: &[TaylorMeasure<S>],
    set: &NatSet,
    eps: S,
    seed: u64,
) -> Result<HilbertReport<S>> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("at least two samples are needed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two = S::of(2.0);
    let tiny = S::min_positive_value();
    let mut report = HilbertReport {
        symmetry: S::zero(),
        bilinearity: S::zero(),
        cauchy_schwarz_slack: S::infinity(),
        parallelogram_rho: S::zero(),
        parallelogram_tv: S::zero(),
        pairs: 0,
    };
    let ip = |a: &TaylorMeasure<S>, b: &TaylorMeasure<S>| inner_product(a, b, set, eps).map(|v| v.value);
    let tv = |a: &TaylorMeasure<S>| a.total_variation(set, eps).map(|v| v.value);
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            let (t1, t2) = (&samples[i], &samples[j]);
            let t3 = &samples[(j + 1) % samples.len()];
            let r11 = ip(t1, t1)?;
            let r22 = ip(t2, t2)?;
            let r12 = ip(t1, t2)?;
            let r21 = ip(t2, t1)?;
            report.symmetry = report.symmetry.max((r12 - r21).abs());

            let alpha = S::of(rng.random_range(-2.0..2.0));
            let beta = S::of(rng.random_range(-2.0..2.0));
            let combo = linear_combination(alpha, t1, beta, t2);
            let lhs = ip(&combo, t3)?;
            let (r13, r23) = (ip(t1, t3)?, ip(t2, t3)?);
            let rhs = alpha * r13 + beta * r23;
            let scale = (alpha * r13).abs() + (beta * r23).abs() + tiny;
            report.bilinearity = report.bilinearity.max((lhs - rhs).abs() / scale);

            let denom = r11 * r22;
            if denom > S::zero() {
                report.cauchy_schwarz_slack = report.cauchy_schwarz_slack.min((denom - r12 * r12) / denom);
            }

            let plus = linear_combination(S::one(), t1, S::one(), t2);
            let minus = linear_combination(S::one(), t1, -S::one(), t2);
            let lhs = ip(&plus, &plus)? + ip(&minus, &minus)?;
            let rhs = two * (r11 + r22);
            report.parallelogram_rho = report.parallelogram_rho.max((lhs - rhs).abs() / (rhs.abs() + tiny));

            let (v1, v2, vp, vm) = (tv(t1)?, tv(t2)?, tv(&plus)?, tv(&minus)?);
            let residual = (vp * vp + vm * vm - two * (v1 * v1 + v2 * v2)).abs();
            report.parallelogram_tv = report.parallelogram_tv.max(residual);
            report.pairs += 1;
        }
    }
    Ok(report)
}
