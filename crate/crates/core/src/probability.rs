//! Power-series probability mass functions and the probability measures
//! attached to the positive and negative parts of a Taylor measure.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{plan_truncation, CoefficientSequence, GrowthCertificate, PartSums};
use crate::measure::{linear_combination, MeasureValue, TaylorMeasure};
use crate::natset::NatSet;
use crate::scalar::Scalar;

/// `c(ζ, b)^{-1} = Σ_n b_n ζ^n / n!` to within `eps`.
pub fn normalizer<S: Scalar>(zeta: S, b: &CoefficientSequence<S>, eps: S) -> Result<MeasureValue<S>> {
    check_zeta(zeta)?;
    let parts = TaylorMeasure::new(b.clone(), zeta)?.parts(&NatSet::All, eps)?;
    if parts.negative.value > S::zero() {
        return Err(Error::InvalidPmf("power-series weights b_n must be non-negative".into()));
    }
    let total = parts.signed();
    if total.value <= total.abs_error {
        return Err(Error::DegenerateDistribution(format!(
            "normalizer {} is zero within its error {}",
            total.value, total.abs_error
        )));
    }
    Ok(total)
}

fn check_zeta<S: Scalar>(zeta: S) -> Result<()> {
    if !(zeta >= S::zero()) || !zeta.is_finite() {
        return Err(Error::InvalidParameter(format!("zeta must be finite and non-negative, got {zeta}")));
    }
    Ok(())
}

/// `f(n | ζ, b) = c(ζ, b) b_n ζ^n / n!` with a cached pmf/cdf table.
///
/// The table runs to a horizon `H` whose certified tail is below `tail_tol`
/// times the mass; the normalizer is the sum over `0..=H`, and the omitted tail
/// enters its `abs_error`.
#[derive(Clone, Debug)]
pub struct PowerSeriesPmf<S> {
    zeta: S,
    b: CoefficientSequence<S>,
    normalizer: MeasureValue<S>,
    pmf: Arc<[S]>,
    cdf: Arc<[S]>,
    /// Certified bound on the probability beyond the table.
    tail_probability: S,
}

impl<S: Scalar> PowerSeriesPmf<S> {
    /// Table tail at most `ε/8` of the mass, below the resolution of a uniform draw.
    pub fn new(zeta: S, b: CoefficientSequence<S>) -> Result<Self> {
        Self::with_tail_tolerance(zeta, b, S::epsilon() / S::of(8.0))
    }

    pub fn with_tail_tolerance(zeta: S, b: CoefficientSequence<S>, tail_tol: S) -> Result<Self> {
        check_zeta(zeta)?;
        if !(tail_tol > S::zero()) {
            return Err(Error::InvalidParameter(format!("tail tolerance must be positive, got {tail_tol}")));
        }
        let rough = normalizer(zeta, &b, S::one().min(tail_tol.sqrt()))?;
        let plan = plan_truncation(b.certificate(), zeta, tail_tol * (rough.value - rough.abs_error))?;
        let terms = b.terms_prefix(zeta, plan.last_index);
        if let Some(n) = terms.iter().position(|t| *t < S::zero() || !t.is_finite()) {
            return Err(Error::InvalidPmf(format!("weight term at n = {n} is {}", terms[n])));
        }
        let mut running = PartSums::new();
        let partial: Vec<S> = terms
            .iter()
            .map(|&t| {
                running.push(t);
                running.pos()
            })
            .collect();
        let z = running.pos();
        if !(z > S::zero()) {
            return Err(Error::DegenerateDistribution("all weights vanish".into()));
        }
        let normalizer = MeasureValue { value: z, abs_error: plan.tail_bound + running.error_bound() };
        Ok(PowerSeriesPmf {
            zeta,
            b,
            normalizer,
            pmf: terms.iter().map(|&t| t / z).collect(),
            cdf: partial.iter().map(|&s| s / z).collect(),
            tail_probability: plan.tail_bound / z,
        })
    }

    pub fn zeta(&self) -> S {
        self.zeta
    }

    pub fn weights(&self) -> &CoefficientSequence<S> {
        &self.b
    }

    /// `c(ζ, b)^{-1}`.
    pub fn normalizer(&self) -> MeasureValue<S> {
        self.normalizer
    }

    /// Last index of the cached table.
    pub fn horizon(&self) -> u64 {
        self.pmf.len() as u64 - 1
    }

    pub fn tail_probability(&self) -> S {
        self.tail_probability
    }

    pub fn cdf_table(&self) -> &[S] {
        &self.cdf
    }

    pub fn pmf_table(&self) -> &[S] {
        &self.pmf
    }

    pub fn pmf_eval(&self, n: u64) -> S {
        match usize::try_from(n).ok().and_then(|i| self.pmf.get(i)) {
            Some(&p) => p,
            None => self.b.term_wide(self.zeta, n).to_scalar() / self.normalizer.value,
        }
    }

    /// `P(N ≤ n)`.
    pub fn cdf(&self, n: u64) -> S {
        match usize::try_from(n).ok().and_then(|i| self.cdf.get(i)) {
            Some(&c) => c,
            None => S::one(),
        }
    }

    /// Smallest `n` with `P(N ≤ n) ≥ u`.
    pub fn quantile(&self, u: S) -> Result<u64> {
        if !(u >= S::zero() && u <= S::one()) {
            return Err(Error::InvalidParameter(format!("quantile level must lie in [0, 1], got {u}")));
        }
        let resolved = S::one() - self.tail_probability;
        if u > resolved {
            return Err(Error::QuantileTailUnresolved { u: u.to_f64_lossy(), resolved: resolved.to_f64_lossy() });
        }
        let idx = self.cdf.partition_point(|&c| c < u);
        Ok(idx.min(self.cdf.len() - 1) as u64)
    }

    /// `Q(B) = Σ_{n∈B} f(n)`.
    pub fn probability(&self, set: &NatSet) -> MeasureValue<S> {
        let h = self.horizon();
        let mut sums = PartSums::new();
        for n in set.members_up_to(h) {
            sums.push(self.pmf[n as usize]);
        }
        let tail = if set.is_finite() && set.elements().last().is_none_or(|&m| m <= h) {
            S::zero()
        } else {
            self.tail_probability
        };
        let value = sums.pos().min(S::one());
        MeasureValue { value, abs_error: tail + sums.error_bound() + self.normalizer.abs_error / self.normalizer.value }
    }

    /// Mean of the table (ignoring the certified tail).
    pub fn mean(&self) -> S {
        let acc: crate::NeumaierSum<S> = self.pmf.iter().enumerate().map(|(n, &p)| S::of_u64(n as u64) * p).collect();
        acc.value()
    }
}

/// Normalized positive and negative parts of a Taylor measure.
#[derive(Clone, Debug)]
pub struct TaylorProbabilityPair<S> {
    pub mass_pos: MeasureValue<S>,
    pub mass_neg: MeasureValue<S>,
    q_pos: Option<PowerSeriesPmf<S>>,
    q_neg: Option<PowerSeriesPmf<S>>,
}

impl<S: Scalar> TaylorProbabilityPair<S> {
    pub fn q_pos(&self) -> Result<&PowerSeriesPmf<S>> {
        self.q_pos.as_ref().ok_or_else(|| Error::DegenerateDistribution("the positive part has zero mass".into()))
    }

    pub fn q_neg(&self) -> Result<&PowerSeriesPmf<S>> {
        self.q_neg.as_ref().ok_or_else(|| Error::DegenerateDistribution("the negative part has zero mass".into()))
    }

    /// `T(B) = T⁺(ℕ) Q⁺(B) − T⁻(ℕ) Q⁻(B)`, using only the non-degenerate sides.
    pub fn reconstruct(&self, set: &NatSet) -> MeasureValue<S> {
        let side = |mass: &MeasureValue<S>, q: &Option<PowerSeriesPmf<S>>| match q {
            Some(q) => {
                let p = q.probability(set);
                MeasureValue {
                    value: mass.value * p.value,
                    abs_error: mass.value * p.abs_error + mass.abs_error * p.value,
                }
            }
            None => MeasureValue::exact(S::zero()),
        };
        let (pos, neg) = (side(&self.mass_pos, &self.q_pos), side(&self.mass_neg, &self.q_neg));
        let value = pos.value - neg.value;
        MeasureValue { value, abs_error: pos.abs_error + neg.abs_error + S::epsilon() * (pos.value + neg.value) }
    }
}

/// Weights `b±` at `ζ = |γ|` whose terms are `max(±p_T(n), 0)`.
fn side_pmf<S: Scalar>(t: &TaylorMeasure<S>, sign: S) -> Result<Option<PowerSeriesPmf<S>>> {
    let zeta = t.gamma().abs();
    let (scale, certificate) =
        if zeta.is_zero() { (S::one(), GrowthCertificate::FiniteSupport(0)) } else { (zeta, *t.certificate()) };
    let m = t.clone();
    let seq =
        CoefficientSequence::from_terms(move |n| (sign * m.taylor_derivative(n)).max(S::zero()), scale, certificate)?;
    match PowerSeriesPmf::new(zeta, seq) {
        Ok(p) => Ok(Some(p)),
        Err(Error::DegenerateDistribution(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Jordan parts of `t` normalized to probability mass functions.
pub fn probability_pair<S: Scalar>(t: &TaylorMeasure<S>) -> Result<TaylorProbabilityPair<S>> {
    if !t.certificate().is_verified() {
        return Err(Error::DivergenceUnknown("probability pair needs a growth certificate".into()));
    }
    let q_pos = side_pmf(t, S::one())?;
    let q_neg = side_pmf(t, -S::one())?;
    if q_pos.is_none() && q_neg.is_none() {
        return Err(Error::DegenerateDistribution("the zero measure has no probability pair".into()));
    }
    let mass = |q: &Option<PowerSeriesPmf<S>>| q.as_ref().map_or(MeasureValue::exact(S::zero()), |q| q.normalizer());
    Ok(TaylorProbabilityPair { mass_pos: mass(&q_pos), mass_neg: mass(&q_neg), q_pos, q_neg })
}

/// Probabilities `p_n` given as a finite list or as a rule.
#[derive(Clone)]
pub enum PmfSource<S> {
    Finite(Vec<S>),
    /// `certificate` bounds the growth of `n! p_n`.
    Rule {
        pmf: Arc<dyn Fn(u64) -> S + Send + Sync>,
        certificate: GrowthCertificate<S>,
    },
}

impl<S: Scalar> PmfSource<S> {
    pub fn rule<F>(pmf: F, certificate: GrowthCertificate<S>) -> Self
    where
        F: Fn(u64) -> S + Send + Sync + 'static,
    {
        PmfSource::Rule { pmf: Arc::new(pmf), certificate }
    }
}

/// `T_{γ,a}` with `a_n = n! p_n / γ^n`, whose positive probability measure is `p`.
pub fn from_pmf<S: Scalar>(source: &PmfSource<S>, gamma: S) -> Result<TaylorMeasure<S>> {
    if !(gamma > S::zero()) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let tol = S::of(1e-12).max(S::of(64.0) * S::epsilon());
    let (rule, certificate): (Arc<dyn Fn(u64) -> S + Send + Sync>, GrowthCertificate<S>) = match source {
        PmfSource::Finite(p) => {
            let mut acc = crate::NeumaierSum::new();
            for (n, &v) in p.iter().enumerate() {
                if !(v >= S::zero()) || !v.is_finite() {
                    return Err(Error::InvalidPmf(format!("p_{n} = {v} is not a probability")));
                }
                acc.add(v);
            }
            if (acc.value() - S::one()).abs() > tol {
                return Err(Error::InvalidPmf(format!("probabilities sum to {}", acc.value())));
            }
            let last = p.iter().rposition(|v| !v.is_zero()).unwrap_or(0) as u64;
            let v: Arc<[S]> = p.as_slice().into();
            (
                Arc::new(move |n| usize::try_from(n).ok().and_then(|i| v.get(i).copied()).unwrap_or_else(S::zero)),
                GrowthCertificate::FiniteSupport(last),
            )
        }
        PmfSource::Rule { pmf, certificate } => {
            if !certificate.is_verified() {
                return Err(Error::InvalidPmf("normalization of a pmf rule needs a growth certificate".into()));
            }
            let plan = plan_truncation(certificate, S::one(), S::epsilon())?;
            let mut acc = crate::NeumaierSum::new();
            for n in 0..=plan.last_index {
                let v = pmf(n);
                if !(v >= S::zero()) || !v.is_finite() {
                    return Err(Error::InvalidPmf(format!("p_{n} = {v} is not a probability")));
                }
                acc.add(v);
            }
            if (acc.value() - S::one()).abs() > tol + plan.tail_bound {
                return Err(Error::InvalidPmf(format!("probabilities sum to {}", acc.value())));
            }
            (pmf.clone(), certificate.rescaled(gamma.recip()))
        }
    };
    let seq = CoefficientSequence::from_terms_arc(rule, gamma, certificate);
    TaylorMeasure::new(seq, gamma)
}

/// `T(B) = Σ_{n∈B} (b_{1n} ζ1^n / n! − b_{2n} ζ2^n / n!)` in the presentation `γ = 1`.
pub fn measure_from_densities<S: Scalar>(
    zeta1: S,
    b1: &CoefficientSequence<S>,
    zeta2: S,
    b2: &CoefficientSequence<S>,
) -> Result<TaylorMeasure<S>> {
    check_zeta(zeta1)?;
    check_zeta(zeta2)?;
    if !b1.certificate().is_verified() || !b2.certificate().is_verified() {
        return Err(Error::DivergenceUnknown("both densities need growth certificates".into()));
    }
    let t1 = TaylorMeasure::new(b1.clone(), zeta1)?;
    let t2 = TaylorMeasure::new(b2.clone(), zeta2)?;
    Ok(linear_combination(S::one(), &t1, -S::one(), &t2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn ones() -> CoefficientSequence<f64> {
        CoefficientSequence::constant(1.0)
    }

    fn identity_weights() -> CoefficientSequence<f64> {
        CoefficientSequence::custom(|n| n as f64, GrowthCertificate::geometric(1.0, 2.0))
    }

    #[test]
    fn normalizer_examples() {
        assert!((normalizer(1.0, &ones(), 1e-14).unwrap().value - E).abs() < 1e-14);
        let b = CoefficientSequence::finite(vec![5.0, 3.0]).unwrap();
        assert_eq!(normalizer(0.0, &b, 1e-14).unwrap().value, 5.0);
        assert!(identity_weights().verify_certificate(300).is_ok());
        let v = normalizer(2.0, &identity_weights(), 1e-13).unwrap().value;
        assert!((v - 2.0 * E * E).abs() < 1e-12);
    }

    #[test]
    fn normalizer_rejects_bad_weights() {
        let neg = CoefficientSequence::finite(vec![1.0, -1.0]).unwrap();
        assert_eq!(normalizer(1.0, &neg, 1e-9).unwrap_err().kind(), "InvalidPmf");
        let zero = CoefficientSequence::finite(vec![0.0]).unwrap();
        assert_eq!(normalizer(1.0, &zero, 1e-9).unwrap_err().kind(), "DegenerateDistribution");
    }

    #[test]
    fn pmf_examples() {
        let p = PowerSeriesPmf::new(1.0, ones()).unwrap();
        assert!((p.pmf_eval(0) - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(p.quantile(0.367).unwrap(), 0);
        assert_eq!(p.quantile(0.368).unwrap(), 1);
        assert!((p.cdf(p.horizon()) - 1.0).abs() <= 1e-15);

        let point = PowerSeriesPmf::new(0.0, CoefficientSequence::finite(vec![2.0, 1.0]).unwrap()).unwrap();
        assert_eq!(point.pmf_eval(0), 1.0);
        assert_eq!(point.pmf_eval(3), 0.0);
        assert_eq!(point.quantile(1.0).unwrap(), 0);
    }

    #[test]
    fn quantile_tail_is_guarded() {
        let p = PowerSeriesPmf::with_tail_tolerance(3.0, ones(), 1e-4).unwrap();
        let err = p.quantile(1.0 - 1e-7).unwrap_err();
        assert_eq!(err.kind(), "QuantileTailUnresolved");
        assert!(p.quantile(0.99).is_ok());
    }

    #[test]
    fn pair_examples() {
        let t = TaylorMeasure::from_term_values(&[1.0f64, -2.0, 1.5]).unwrap();
        let pair = probability_pair(&t).unwrap();
        assert_eq!((pair.mass_pos.value, pair.mass_neg.value), (2.5, 2.0));
        let qp = pair.q_pos().unwrap();
        assert_eq!((qp.pmf_eval(0), qp.pmf_eval(1), qp.pmf_eval(2)), (0.4, 0.0, 0.6));
        assert_eq!(pair.q_neg().unwrap().pmf_eval(1), 1.0);
        let r = pair.reconstruct(&NatSet::finite([0, 1]));
        assert!((r.value + 1.0).abs() <= r.abs_error + 1e-15);

        let pair = probability_pair(&TaylorMeasure::exponential(1.0)).unwrap();
        assert_eq!(pair.mass_neg.value, 0.0);
        assert_eq!(pair.q_neg().unwrap_err().kind(), "DegenerateDistribution");
        let q = pair.q_pos().unwrap();
        let mut fact = 1.0;
        for n in 0..15u64 {
            if n > 0 {
                fact *= n as f64;
            }
            assert!((q.pmf_eval(n) - (-1f64).exp() / fact).abs() < 1e-16);
        }

        assert_eq!(probability_pair(&TaylorMeasure::<f64>::zero()).unwrap_err().kind(), "DegenerateDistribution");
    }

    #[test]
    fn from_pmf_examples() {
        let geo = PmfSource::rule(
            |n| 0.5f64.powi(n as i32 + 1),
            GrowthCertificate::Factorial { m: 0.5, b: 0.5, degree: 0, from: 0 },
        );
        let t = from_pmf(&geo, 1.0).unwrap();
        let a: Vec<f64> = (0..4).map(|n| t.coefficients().coefficient(n)).collect();
        assert_eq!(a, vec![0.5, 0.25, 0.25, 0.375]);

        let point = from_pmf(&PmfSource::Finite(vec![1.0]), 7.0).unwrap();
        assert_eq!(point.coefficients().coefficient(0), 1.0);
        assert_eq!(point.coefficients().coefficient(1), 0.0);

        let z = 2f64;
        let poisson = PmfSource::rule(
            move |n| (n as f64 * z.ln() - z - crate::wide::ln_factorial::<f64>(n)).exp(),
            GrowthCertificate::geometric((-z).exp() / 2.0, z),
        );
        let t = from_pmf(&poisson, z).unwrap();
        let q = probability_pair(&t).unwrap();
        let q = q.q_pos().unwrap();
        for n in 0..30u64 {
            assert!((t.coefficients().coefficient(n) - (-2f64).exp()).abs() < 1e-15 * (n as f64 + 1.0));
            let exact = (n as f64 * z.ln() - z - crate::wide::ln_factorial::<f64>(n)).exp();
            assert!((q.pmf_eval(n) - exact).abs() <= 1e-15);
        }
    }

    #[test]
    fn from_pmf_rejects_invalid() {
        assert_eq!(from_pmf(&PmfSource::Finite(vec![0.5, 0.6]), 1.0).unwrap_err().kind(), "InvalidPmf");
        assert_eq!(from_pmf(&PmfSource::Finite(vec![1.5, -0.5]), 1.0).unwrap_err().kind(), "InvalidPmf");
        assert_eq!(from_pmf(&PmfSource::Finite(vec![1.0]), 0.0).unwrap_err().kind(), "InvalidParameter");
    }

    #[test]
    fn densities_examples() {
        let t = measure_from_densities(2.0, &ones(), 1.0, &ones()).unwrap();
        assert!((t.total_mass(1e-13).unwrap().value - (E * E - E)).abs() < 1e-12);
        assert_eq!(t.evaluate(&NatSet::prefix(2), 1.0).unwrap().value, 2.5);
        let z = measure_from_densities(1.5, &ones(), 1.5, &ones()).unwrap();
        assert_eq!(z.total_mass(1e-12).unwrap().value, 0.0);
        let unv = CoefficientSequence::custom(|_| 1.0, GrowthCertificate::Unverified);
        assert_eq!(measure_from_densities(1.0, &unv, 1.0, &ones()).unwrap_err().kind(), "DivergenceUnknown");
    }

    #[test]
    fn poisson_taylor_presentations_agree() {
        let (z1, z2) = (2.0f64, 1.0f64);
        let p1 = TaylorMeasure::new(
            CoefficientSequence::custom(
                move |n| z1.powi(n as i32) - z2.powi(n as i32),
                GrowthCertificate::geometric(0.5, z1),
            ),
            1.0,
        )
        .unwrap();
        let p2 = TaylorMeasure::new(
            CoefficientSequence::custom(move |n| 1.0 - (z2 / z1).powi(n as i32), GrowthCertificate::Bounded(1.0)),
            z1,
        )
        .unwrap();
        let p3 = TaylorMeasure::new(
            CoefficientSequence::custom(
                move |n| (z1 / z2).powi(n as i32) - 1.0,
                GrowthCertificate::geometric(0.5, z1 / z2),
            ),
            z2,
        )
        .unwrap();
        for n in 0..=60u64 {
            let r = p1.taylor_derivative(n);
            for other in [p2.taylor_derivative(n), p3.taylor_derivative(n)] {
                assert!((r - other).abs() <= 4.0 * f64::EPSILON * r.abs(), "n = {n}: {r} vs {other}");
            }
        }
    }
}
