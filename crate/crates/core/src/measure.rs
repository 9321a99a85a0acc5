//! Signed Taylor measures `T(B) = Σ_{n∈B} a_n γ^n / n!`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{
    combination_certificate, plan_truncation, CoefficientSequence, GrowthCertificate, PartSums, SignedLogTerm,
};
use crate::natset::NatSet;
use crate::scalar::Scalar;

/// A value together with a bound on its absolute error (truncation plus rounding).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureValue<S> {
    pub value: S,
    pub abs_error: S,
}

impl<S: Scalar> MeasureValue<S> {
    pub fn exact(value: S) -> Self {
        MeasureValue { value, abs_error: S::zero() }
    }

    /// Whether `x` lies within `abs_error + slack` of the value.
    pub fn contains(&self, x: S, slack: S) -> bool {
        (self.value - x).abs() <= self.abs_error + slack
    }
}

/// Positive part, negative part and their difference over one set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartValues<S> {
    pub positive: MeasureValue<S>,
    pub negative: MeasureValue<S>,
    /// Certified bound on the omitted tail (shared by both parts).
    pub tail_bound: S,
}

impl<S: Scalar> PartValues<S> {
    pub fn signed(&self) -> MeasureValue<S> {
        MeasureValue { value: self.positive.value - self.negative.value, abs_error: self.abs_error() }
    }

    pub fn variation(&self) -> MeasureValue<S> {
        MeasureValue { value: self.positive.value + self.negative.value, abs_error: self.abs_error() }
    }

    fn abs_error(&self) -> S {
        let rounding = self.positive.abs_error + self.negative.abs_error - S::of(2.0) * self.tail_bound;
        let last = S::epsilon() * (self.positive.value + self.negative.value);
        self.tail_bound + rounding.max(S::zero()) + last
    }
}

#[derive(Clone, Debug)]
pub struct TaylorMeasure<S> {
    coefficients: CoefficientSequence<S>,
    gamma: S,
    label: Option<String>,
}

impl<S: Scalar> TaylorMeasure<S> {
    pub fn new(coefficients: CoefficientSequence<S>, gamma: S) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be finite, got {gamma}")));
        }
        Ok(TaylorMeasure { coefficients, gamma, label: None })
    }

    /// `a_n ≡ 1` at scale `γ` (total mass `e^γ`).
    pub fn exponential(gamma: S) -> Self {
        Self::new(CoefficientSequence::constant(S::one()), gamma).expect("finite gamma")
    }

    pub fn zero() -> Self {
        Self::new(CoefficientSequence::finite(Vec::new()).expect("empty"), S::one()).expect("finite gamma")
    }

    /// Finitely many terms `p(0), p(1), …` in the canonical presentation `γ = 1`.
    pub fn from_term_values(terms: &[S]) -> Result<Self> {
        let v: Arc<[S]> = terms.into();
        let last = terms.iter().rposition(|t| !t.is_zero()).unwrap_or(0) as u64;
        if let Some(bad) = terms.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(format!("term {bad} is not finite")));
        }
        let seq = CoefficientSequence::from_terms(
            move |n| usize::try_from(n).ok().and_then(|i| v.get(i).copied()).unwrap_or_else(S::zero),
            S::one(),
            GrowthCertificate::FiniteSupport(last),
        )?;
        Self::new(seq, S::one())
    }

    /// Canonical presentation `γ = 1`, `a_n = n! p(n)`, of a term function.
    pub fn from_term_fn<F>(p: F, certificate: GrowthCertificate<S>) -> Self
    where
        F: Fn(u64) -> S + Send + Sync + 'static,
    {
        let seq = CoefficientSequence::from_terms_arc(Arc::new(p), S::one(), certificate);
        TaylorMeasure { coefficients: seq, gamma: S::one(), label: None }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn gamma(&self) -> S {
        self.gamma
    }

    pub fn coefficients(&self) -> &CoefficientSequence<S> {
        &self.coefficients
    }

    pub fn certificate(&self) -> &GrowthCertificate<S> {
        self.coefficients.certificate()
    }

    pub fn term(&self, n: u64) -> SignedLogTerm<S> {
        crate::kernel::term(&self.coefficients, self.gamma, n)
    }

    /// `p_T(n) = T({n}) = a_n γ^n / n!`.
    pub fn taylor_derivative(&self, n: u64) -> S {
        self.coefficients.term_wide(self.gamma, n).to_scalar()
    }

    /// Certified tail bound `Σ_{n>last} |p_T(n)|`.
    pub fn tail_bound(&self, last: u64) -> S {
        crate::kernel::tail_bound(self.certificate(), self.gamma, last)
    }

    fn accumulate(&self, set: &NatSet, eps: S) -> Result<(PartSums<S>, S)> {
        if let NatSet::Finite(v) = set {
            return Ok((crate::kernel::sum_terms(&self.coefficients, self.gamma, v.iter().copied()), S::zero()));
        }
        if !(eps > S::zero()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        let plan = plan_truncation(self.certificate(), self.gamma, eps)?;
        let terms = self.coefficients.terms_prefix(self.gamma, plan.last_index);
        let mut sums = PartSums::new();
        for n in set.members_up_to(plan.last_index) {
            sums.push(terms[n as usize]);
        }
        Ok((sums, plan.tail_bound))
    }

    /// Positive and negative parts over `set`, sharing one truncation plan.
    pub fn parts(&self, set: &NatSet, eps: S) -> Result<PartValues<S>> {
        let (sums, tail) = self.accumulate(set, eps)?;
        let (pos, neg) = (sums.pos(), sums.neg());
        if !pos.is_finite() || !neg.is_finite() {
            return Err(Error::OutOfDomain(format!(
                "measure of {set} overflows the floating range (gamma = {})",
                self.gamma
            )));
        }
        Ok(PartValues {
            positive: MeasureValue { value: pos, abs_error: tail + sums.positive.error_bound() },
            negative: MeasureValue { value: neg, abs_error: tail + sums.negative.error_bound() },
            tail_bound: tail,
        })
    }

    /// `T(B)`; finite sets are summed exactly, infinite ones to within `eps`.
    pub fn evaluate(&self, set: &NatSet, eps: S) -> Result<MeasureValue<S>> {
        Ok(self.parts(set, eps)?.signed())
    }

    /// `T(ℕ)`.
    pub fn total_mass(&self, eps: S) -> Result<MeasureValue<S>> {
        self.evaluate(&NatSet::All, eps)
    }

    /// `|T|(B) = T⁺(B) + T⁻(B)`.
    pub fn total_variation(&self, set: &NatSet, eps: S) -> Result<MeasureValue<S>> {
        Ok(self.parts(set, eps)?.variation())
    }

    pub fn jordan_decompose(&self) -> JordanPair<S> {
        JordanPair { measure: self.clone() }
    }

    /// `α T1 + β T2` in the canonical presentation `γ = 1`.
    pub fn linear_combination(alpha: S, t1: &Self, beta: S, t2: &Self) -> Self {
        linear_combination(alpha, t1, beta, t2)
    }
}

/// `α T1 + β T2`: the term function is `α p1(n) + β p2(n)` evaluated pointwise,
/// presented with `γ = 1` and `a_n = n! p(n)`.
pub fn linear_combination<S: Scalar>(
    alpha: S,
    t1: &TaylorMeasure<S>,
    beta: S,
    t2: &TaylorMeasure<S>,
) -> TaylorMeasure<S> {
    let certificate = combination_certificate(&[
        (alpha, t1.certificate().term_envelope(t1.gamma)),
        (beta, t2.certificate().term_envelope(t2.gamma)),
    ]);
    let (a, b) = (t1.clone(), t2.clone());
    TaylorMeasure::from_term_fn(move |n| alpha * a.taylor_derivative(n) + beta * b.taylor_derivative(n), certificate)
}

/// Jordan decomposition `T = T⁺ − T⁻` with Hahn set `A⁺ = {n : p_T(n) ≥ 0}`.
#[derive(Clone, Debug)]
pub struct JordanPair<S> {
    measure: TaylorMeasure<S>,
}

impl<S: Scalar> JordanPair<S> {
    pub fn positive(&self, set: &NatSet, eps: S) -> Result<MeasureValue<S>> {
        Ok(self.measure.parts(set, eps)?.positive)
    }

    pub fn negative(&self, set: &NatSet, eps: S) -> Result<MeasureValue<S>> {
        Ok(self.measure.parts(set, eps)?.negative)
    }

    /// Membership in `A⁺`; zero terms belong to `A⁺`.
    pub fn hahn_positive(&self, n: u64) -> bool {
        self.measure.taylor_derivative(n) >= S::zero()
    }

    pub fn measure(&self) -> &TaylorMeasure<S> {
        &self.measure
    }
}
