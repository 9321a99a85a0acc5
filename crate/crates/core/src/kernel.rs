//! Stable evaluation of single terms `a_n γ^n / n!`, certified tail bounds and
//! truncation planning.
//!
//! Every series in the crate goes through this module. Terms are formed in
//! extended double-word arithmetic (see [`crate::wide`]), so neither `γ^n` nor
//! `n!` is ever materialised in the working precision, and each term carries a
//! single final rounding. Signed terms are accumulated in two separate
//! compensated sums, one per sign.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::summation::NeumaierSum;
use crate::wide::{factorial, ln_factorial, Wide};

/// Closed-form model for the coefficients past an explicit prefix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailModel<S> {
    Zero,
    /// `a_n = M`.
    Constant(S),
    /// `a_n = M b^n` (absolute index `n`).
    Geometric {
        m: S,
        b: S,
    },
}

/// Machine-checkable growth bound on `|a_n|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GrowthCertificate<S> {
    /// `a_n = 0` for every `n > N`.
    FiniteSupport(u64),
    /// `|a_n| ≤ M` for all `n`.
    Bounded(S),
    /// `|a_n| ≤ 2M|b|^n` for all `n ≥ from`.
    GeometricEquiv {
        m: S,
        b: S,
        from: u64,
    },
    /// `|a_n| ≤ M (n+1)^degree n! |b|^n` for all `n ≥ from`.
    ///
    /// Covers derivative sequences of functions with a finite radius of
    /// convergence, which no geometric envelope can bound.
    Factorial {
        m: S,
        b: S,
        degree: u32,
        from: u64,
    },
    Unverified,
}

impl<S: Scalar> GrowthCertificate<S> {
    pub fn geometric(m: S, b: S) -> Self {
        GrowthCertificate::GeometricEquiv { m, b, from: 0 }
    }

    pub fn is_verified(&self) -> bool {
        !matches!(self, GrowthCertificate::Unverified)
    }

    pub fn is_finite_support(&self) -> bool {
        matches!(self, GrowthCertificate::FiniteSupport(_))
    }

    /// Envelope of the terms `|a_n γ^n / n!|` implied by this certificate.
    pub(crate) fn term_envelope(&self, gamma: S) -> Option<Envelope<S>> {
        let g = gamma.abs();
        match *self {
            GrowthCertificate::FiniteSupport(k) => Some(Envelope::Zero { from: k + 1 }),
            GrowthCertificate::Bounded(m) => Some(Envelope::bound(m.abs(), g, 0, true, 0)),
            GrowthCertificate::GeometricEquiv { m, b, from } => {
                Some(Envelope::bound(S::of(2.0) * m.abs(), (b * gamma).abs(), 0, true, from))
            }
            GrowthCertificate::Factorial { m, b, degree, from } => {
                Some(Envelope::bound(m.abs(), (b * gamma).abs(), degree, false, from))
            }
            GrowthCertificate::Unverified => None,
        }
    }

    /// Certificate for the rescaled sequence `a_n f^n`.
    pub fn rescaled(&self, f: S) -> Self {
        let fa = f.abs();
        match *self {
            GrowthCertificate::FiniteSupport(k) => GrowthCertificate::FiniteSupport(k),
            GrowthCertificate::Bounded(m) => {
                if fa <= S::one() {
                    GrowthCertificate::Bounded(m)
                } else {
                    GrowthCertificate::GeometricEquiv { m: m / S::of(2.0), b: fa, from: 0 }
                }
            }
            GrowthCertificate::GeometricEquiv { m, b, from } => {
                GrowthCertificate::GeometricEquiv { m, b: b.abs() * fa, from }
            }
            GrowthCertificate::Factorial { m, b, degree, from } => {
                GrowthCertificate::Factorial { m, b: b.abs() * fa, degree, from }
            }
            GrowthCertificate::Unverified => GrowthCertificate::Unverified,
        }
    }

    /// Whether `|value|` at index `n` is compatible with the certificate.
    pub fn admits(&self, n: u64, value: S) -> bool {
        self.admits_wide(n, Wide::from_scalar(value))
    }

    pub(crate) fn admits_wide(&self, n: u64, value: Wide<S>) -> bool {
        let slack = S::one() + S::of(8.0) * S::epsilon();
        let v = value.abs();
        let within = |bound: Wide<S>| {
            if bound.is_zero() {
                v.is_zero()
            } else {
                v.div(bound).to_scalar() <= slack
            }
        };
        match *self {
            GrowthCertificate::FiniteSupport(k) => n <= k || v.is_zero(),
            GrowthCertificate::Bounded(m) => within(Wide::from_scalar(m.abs())),
            GrowthCertificate::GeometricEquiv { m, b, from } => {
                n < from || within(Wide::from_scalar(S::of(2.0) * m.abs()).mul(Wide::from_scalar(b.abs()).powu(n)))
            }
            GrowthCertificate::Factorial { m, b, degree, from } => {
                n < from
                    || within(
                        Wide::from_scalar(m.abs())
                            .mul(Wide::from_scalar(b.abs()).powu(n))
                            .mul(factorial::<S>(n))
                            .mul(Wide::from_scalar(S::of_u64(n + 1)).powu(degree as u64)),
                    )
            }
            GrowthCertificate::Unverified => true,
        }
    }
}

/// Bound on a non-negative sequence `t_n`, valid for `n ≥ from`:
/// `t_n ≤ C (n+1)^k r^n / (n!)^f` with `f ∈ {0, 1}`, or identically zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Envelope<S> {
    Zero { from: u64 },
    Bound { coef: S, rate: S, poly: u32, factorial: bool, from: u64 },
}

impl<S: Scalar> Envelope<S> {
    pub(crate) fn bound(coef: S, rate: S, poly: u32, factorial: bool, from: u64) -> Self {
        if coef.is_zero() {
            Envelope::Zero { from }
        } else {
            Envelope::Bound { coef, rate, poly, factorial, from }
        }
    }

    /// Product envelope for `n! · x_n · y_n` (the inner-product summand).
    pub(crate) fn inner_product(&self, other: &Self) -> Option<Self> {
        match (*self, *other) {
            (Envelope::Zero { from: a }, Envelope::Zero { from: b }) => Some(Envelope::Zero { from: a.min(b) }),
            (Envelope::Zero { from }, _) | (_, Envelope::Zero { from }) => Some(Envelope::Zero { from }),
            (
                Envelope::Bound { coef: c1, rate: r1, poly: k1, factorial: f1, from: s1 },
                Envelope::Bound { coef: c2, rate: r2, poly: k2, factorial: f2, from: s2 },
            ) => {
                // n! / (n!)^{f1+f2}
                match (f1, f2) {
                    (true, true) => Some(Envelope::bound(c1 * c2, r1 * r2, k1 + k2, true, s1.max(s2))),
                    (true, false) | (false, true) => {
                        Some(Envelope::bound(c1 * c2, r1 * r2, k1 + k2, false, s1.max(s2)))
                    }
                    (false, false) => None,
                }
            }
        }
    }

    /// Certified upper bound on `Σ_{n>N} t_n`; `+∞` when nothing can be certified.
    pub(crate) fn tail(&self, last: u64) -> S {
        match *self {
            Envelope::Zero { from } => {
                if last + 1 >= from {
                    S::zero()
                } else {
                    S::infinity()
                }
            }
            Envelope::Bound { coef, rate, poly, factorial, from } => {
                if last + 1 < from {
                    return S::infinity();
                }
                if rate.is_zero() {
                    // t_n = 0 for every n ≥ 1, and last + 1 ≥ 1
                    return S::zero();
                }
                let n1 = last + 1;
                let k = S::of(poly as f64);
                let np2 = S::of_u64(last + 2);
                let np3 = S::of_u64(last + 3);
                let mut q = (np3 / np2).powf(k) * rate;
                if factorial {
                    q /= np2;
                }
                let mut best = S::infinity();
                if q < S::one() {
                    let ln_coef = coef.ln();
                    let ln_poly = k * np2.ln();
                    let ln_rate = S::of_u64(n1) * rate.ln();
                    let ln_fact = if factorial { ln_factorial::<S>(n1) } else { S::zero() };
                    let ln_t = ln_coef + ln_poly + ln_rate - ln_fact;
                    let magnitude = ln_coef.abs() + ln_poly.abs() + ln_rate.abs() + ln_fact.abs();
                    let safety = (S::of(16.0) * S::epsilon() * (magnitude + S::one())).exp();
                    best = ln_t.exp() * safety / (S::one() - q);
                }
                if factorial && poly == 0 {
                    let full = coef * rate.exp() * (S::one() + S::of(16.0) * S::epsilon() * (rate + S::one()));
                    best = best.min(full);
                }
                best
            }
        }
    }

    /// Smallest `N` (doubling, then bisection) with `tail(N) ≤ eps`.
    pub(crate) fn plan(&self, eps: S) -> Result<TruncationPlan<S>> {
        const MAX_INDEX: u64 = 1 << 26;
        if !(eps > S::zero()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        if let Envelope::Zero { from } = *self {
            let last = from.saturating_sub(1);
            return Ok(TruncationPlan { last_index: last, tail_bound: S::zero() });
        }
        let ok = |n: u64| self.tail(n) <= eps;
        if ok(0) {
            return Ok(TruncationPlan { last_index: 0, tail_bound: self.tail(0) });
        }
        let mut hi = 1u64;
        while !ok(hi) {
            if hi >= MAX_INDEX {
                return Err(Error::TruncationLimit { max_index: MAX_INDEX, eps: eps.to_f64_lossy() });
            }
            hi *= 2;
        }
        let mut lo = hi / 2; // !ok(lo)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(TruncationPlan { last_index: hi, tail_bound: self.tail(hi) })
    }
}

/// Certificate for the canonical (`γ = 1`) coefficients `a_n = n! Σ_i w_i t_i(n)`
/// of a weighted sum of sequences whose terms obey the given envelopes.
pub(crate) fn combination_certificate<S: Scalar>(parts: &[(S, Option<Envelope<S>>)]) -> GrowthCertificate<S> {
    let mut acc: Option<Envelope<S>> = None;
    for &(w, env) in parts {
        let e = if w.is_zero() {
            Envelope::Zero { from: 0 }
        } else {
            match env {
                None => return GrowthCertificate::Unverified,
                Some(Envelope::Bound { rate, from, .. }) if rate.is_zero() => Envelope::Zero { from: from.max(1) },
                Some(Envelope::Bound { coef, rate, poly, factorial, from }) => {
                    Envelope::Bound { coef: coef * w.abs(), rate, poly, factorial, from }
                }
                Some(z) => z,
            }
        };
        acc = Some(match acc {
            None => e,
            Some(prev) => match envelope_sum(prev, e) {
                Some(sum) => sum,
                None => return GrowthCertificate::Unverified,
            },
        });
    }
    match acc.unwrap_or(Envelope::Zero { from: 0 }) {
        Envelope::Zero { from } => GrowthCertificate::FiniteSupport(from.saturating_sub(1)),
        Envelope::Bound { coef, rate, poly: 0, factorial: true, from } => {
            GrowthCertificate::GeometricEquiv { m: coef / S::of(2.0), b: rate, from }
        }
        Envelope::Bound { coef, rate, poly, factorial: false, from } => {
            GrowthCertificate::Factorial { m: coef, b: rate, degree: poly, from }
        }
        Envelope::Bound { .. } => GrowthCertificate::Unverified,
    }
}

fn envelope_sum<S: Scalar>(a: Envelope<S>, b: Envelope<S>) -> Option<Envelope<S>> {
    use Envelope::*;
    Some(match (a, b) {
        (Zero { from: x }, Zero { from: y }) => Zero { from: x.max(y) },
        (Zero { from: z }, Bound { coef, rate, poly, factorial, from })
        | (Bound { coef, rate, poly, factorial, from }, Zero { from: z }) => {
            Bound { coef, rate, poly, factorial, from: from.max(z) }
        }
        (
            Bound { coef: c1, rate: r1, poly: k1, factorial: f1, from: s1 },
            Bound { coef: c2, rate: r2, poly: k2, factorial: f2, from: s2 },
        ) => {
            let from = s1.max(s2);
            match (f1, f2) {
                (true, true) if k1 == 0 && k2 == 0 => {
                    Bound { coef: c1 + c2, rate: r1.max(r2), poly: 0, factorial: true, from }
                }
                (false, false) => Bound { coef: c1 + c2, rate: r1.max(r2), poly: k1.max(k2), factorial: false, from },
                // C r_g^n / n! ≤ C e^{r_g / r_f} r_f^n
                (true, false) if k1 == 0 => {
                    Bound { coef: c1 * (r1 / r2).exp() + c2, rate: r2, poly: k2, factorial: false, from }
                }
                (false, true) if k2 == 0 => {
                    Bound { coef: c2 * (r2 / r1).exp() + c1, rate: r1, poly: k1, factorial: false, from }
                }
                _ => return None,
            }
        }
    })
}

/// Truncation decision for an infinite series: sum `n = 0..=last_index`, the
/// omitted tail is at most `tail_bound` in absolute value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPlan<S> {
    pub last_index: u64,
    pub tail_bound: S,
}

type Rule<S> = Arc<dyn Fn(u64) -> S + Send + Sync>;

#[derive(Clone)]
enum Source<S> {
    Explicit {
        prefix: Arc<[S]>,
        tail: TailModel<S>,
    },
    Custom(Rule<S>),
    /// `a_n = n! p(n) / scale^n`, stored through the term function `p`.
    Terms {
        term: Rule<S>,
        scale: S,
    },
}

/// A coefficient rule `n ↦ a_n` together with its growth certificate.
#[derive(Clone)]
pub struct CoefficientSequence<S> {
    source: Source<S>,
    certificate: GrowthCertificate<S>,
}

impl<S: fmt::Debug> fmt::Debug for CoefficientSequence<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Explicit { prefix, tail } => format!("Explicit(prefix={prefix:?}, tail={tail:?})"),
            Source::Custom(_) => "Custom".to_string(),
            Source::Terms { scale, .. } => format!("Terms(scale={scale:?})"),
        };
        f.debug_struct("CoefficientSequence").field("source", &kind).field("certificate", &self.certificate).finish()
    }
}

impl<S: Scalar> CoefficientSequence<S> {
    /// Explicit prefix plus tail model, with the tightest certificate derivable from both.
    pub fn explicit(prefix: Vec<S>, tail: TailModel<S>) -> Result<Self> {
        check_finite(&prefix, &tail)?;
        let certificate = derive_explicit_certificate(&prefix, &tail);
        Ok(CoefficientSequence { source: Source::Explicit { prefix: prefix.into(), tail }, certificate })
    }

    /// Explicit prefix plus tail model under a caller-supplied certificate,
    /// which is checked against the whole sequence.
    pub fn explicit_with_certificate(
        prefix: Vec<S>,
        tail: TailModel<S>,
        certificate: GrowthCertificate<S>,
    ) -> Result<Self> {
        check_finite(&prefix, &tail)?;
        validate_explicit_certificate(&prefix, &tail, &certificate)?;
        Ok(CoefficientSequence { source: Source::Explicit { prefix: prefix.into(), tail }, certificate })
    }

    /// Finite coefficient list, zero afterwards.
    pub fn finite(prefix: Vec<S>) -> Result<Self> {
        Self::explicit(prefix, TailModel::Zero)
    }

    /// `a_n ≡ c`.
    pub fn constant(c: S) -> Self {
        Self::explicit(Vec::new(), TailModel::Constant(c)).expect("finite constant")
    }

    /// Arbitrary rule; the certificate is trusted (see [`Self::verify_certificate`]).
    pub fn custom<F>(rule: F, certificate: GrowthCertificate<S>) -> Self
    where
        F: Fn(u64) -> S + Send + Sync + 'static,
    {
        CoefficientSequence { source: Source::Custom(Arc::new(rule)), certificate }
    }

    /// Sequence defined through its term function at scale `scale`:
    /// `a_n = n! p(n) / scale^n`, so that `a_n scale^n / n! = p(n)` exactly.
    pub fn from_terms<F>(term: F, scale: S, certificate: GrowthCertificate<S>) -> Result<Self>
    where
        F: Fn(u64) -> S + Send + Sync + 'static,
    {
        if scale.is_zero() || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("term scale must be finite and non-zero, got {scale}")));
        }
        Ok(CoefficientSequence { source: Source::Terms { term: Arc::new(term), scale }, certificate })
    }

    pub(crate) fn from_terms_arc(term: Rule<S>, scale: S, certificate: GrowthCertificate<S>) -> Self {
        CoefficientSequence { source: Source::Terms { term, scale }, certificate }
    }

    pub fn certificate(&self) -> &GrowthCertificate<S> {
        &self.certificate
    }

    /// Replace the certificate without checking it.
    pub fn with_certificate_unchecked(mut self, certificate: GrowthCertificate<S>) -> Self {
        self.certificate = certificate;
        self
    }

    /// Explicit prefix and tail, when the sequence was built that way.
    pub fn explicit_parts(&self) -> Option<(&[S], &TailModel<S>)> {
        match &self.source {
            Source::Explicit { prefix, tail } => Some((prefix, tail)),
            _ => None,
        }
    }

    /// `a_n` in extended range.
    pub(crate) fn coefficient_wide(&self, n: u64) -> Wide<S> {
        match &self.source {
            Source::Explicit { prefix, tail } => {
                if let Some(&v) = usize::try_from(n).ok().and_then(|i| prefix.get(i)) {
                    return Wide::from_scalar(v);
                }
                match *tail {
                    TailModel::Zero => Wide::zero(),
                    TailModel::Constant(c) => Wide::from_scalar(c),
                    TailModel::Geometric { m, b } => Wide::from_scalar(m).mul(Wide::from_scalar(b).powu(n)),
                }
            }
            Source::Custom(rule) => Wide::from_scalar(rule(n)),
            Source::Terms { term, scale } => {
                let p = Wide::from_scalar(term(n));
                p.mul(factorial::<S>(n)).div(Wide::from_scalar(*scale).powu(n))
            }
        }
    }

    /// `a_n`, rounded to the working precision (may be infinite for term-defined
    /// sequences whose coefficients leave the floating range).
    pub fn coefficient(&self, n: u64) -> S {
        self.coefficient_wide(n).to_scalar()
    }

    /// Extended-range term `a_n γ^n / n!`.
    pub(crate) fn term_wide(&self, gamma: S, n: u64) -> Wide<S> {
        match &self.source {
            Source::Terms { term, scale } => {
                let p = Wide::from_scalar(term(n));
                if gamma == *scale || n == 0 {
                    p
                } else {
                    p.mul(Wide::from_scalar(gamma).powu(n)).div(Wide::from_scalar(*scale).powu(n))
                }
            }
            _ => {
                let a = self.coefficient_wide(n);
                if a.is_zero() {
                    return a;
                }
                a.mul(Wide::from_scalar(gamma).powu(n)).div(factorial::<S>(n))
            }
        }
    }

    /// Terms for the consecutive indices `0..=last` in one O(last) sweep.
    pub(crate) fn terms_prefix(&self, gamma: S, last: u64) -> Vec<S> {
        self.terms_prefix_wide(gamma, last).into_iter().map(Wide::to_scalar).collect()
    }

    pub(crate) fn terms_prefix_wide(&self, gamma: S, last: u64) -> Vec<Wide<S>> {
        match &self.source {
            Source::Terms { .. } => (0..=last).map(|n| self.term_wide(gamma, n)).collect(),
            _ => {
                let mut out = Vec::with_capacity(last as usize + 1);
                let g = Wide::from_scalar(gamma);
                let mut weight = Wide::<S>::one(); // γ^n / n!
                for n in 0..=last {
                    if n > 0 {
                        weight = weight.mul(g).div(Wide::from_scalar(S::of_u64(n)));
                    }
                    let a = self.coefficient_wide(n);
                    out.push(if a.is_zero() { a } else { a.mul(weight) });
                }
                out
            }
        }
    }

    /// Spot-check the certificate on `0..=upto`; returns the first violating index.
    pub fn verify_certificate(&self, upto: u64) -> std::result::Result<(), u64> {
        for n in 0..=upto {
            if !self.certificate.admits_wide(n, self.coefficient_wide(n)) {
                return Err(n);
            }
        }
        Ok(())
    }

    /// Bound `|a_n| ≤ C r^n` (geometric kind) or `|a_n| ≤ C (n+1)^k n! r^n`
    /// (factorial kind), valid for every `n`.
    pub(crate) fn coefficient_envelope(&self) -> Option<CoefficientEnvelope<S>> {
        match self.certificate {
            GrowthCertificate::FiniteSupport(k) => {
                let mut c = S::zero();
                for n in 0..=k {
                    c = c.max(self.coefficient(n).abs());
                }
                Some(CoefficientEnvelope::Finite { last: k, max_abs: c })
            }
            GrowthCertificate::Bounded(m) => Some(CoefficientEnvelope::Geometric { coef: m.abs(), rate: S::one() }),
            GrowthCertificate::GeometricEquiv { m, b, from: 0 } => {
                Some(CoefficientEnvelope::Geometric { coef: S::of(2.0) * m.abs(), rate: b.abs() })
            }
            GrowthCertificate::Factorial { m, b, degree, from: 0 } => {
                Some(CoefficientEnvelope::Factorial { coef: m.abs(), rate: b.abs(), degree })
            }
            _ => None,
        }
    }
}

/// Whole-sequence coefficient bound used by the algebra of expansions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum CoefficientEnvelope<S> {
    Finite { last: u64, max_abs: S },
    Geometric { coef: S, rate: S },
    Factorial { coef: S, rate: S, degree: u32 },
}

impl<S: Scalar> CoefficientEnvelope<S> {
    /// Envelope of the binomial convolution `c_l = Σ C(l,n) a_n b_{l-n}`.
    pub(crate) fn binomial_product(self, other: Self) -> GrowthCertificate<S> {
        use CoefficientEnvelope::*;
        let as_geometric = |e: Self| match e {
            Finite { max_abs, .. } => Some((max_abs, S::one())),
            Geometric { coef, rate } => Some((coef, rate)),
            Factorial { .. } => None,
        };
        match (self, other) {
            (Finite { last: k1, .. }, Finite { last: k2, .. }) => GrowthCertificate::FiniteSupport(k1 + k2),
            (Factorial { coef: c1, rate: r1, degree: d1 }, Factorial { coef: c2, rate: r2, degree: d2 }) => {
                GrowthCertificate::Factorial { m: c1 * c2, b: r1.max(r2), degree: d1 + d2 + 1, from: 0 }
            }
            (Factorial { coef, rate, degree }, g) | (g, Factorial { coef, rate, degree }) => {
                let (cg, rg) = as_geometric(g).expect("non-factorial envelope");
                if rate.is_zero() {
                    return GrowthCertificate::Unverified;
                }
                GrowthCertificate::Factorial { m: coef * cg * (rg / rate).exp(), b: rate, degree, from: 0 }
            }
            (a, b) => {
                let (c1, r1) = as_geometric(a).expect("geometric");
                let (c2, r2) = as_geometric(b).expect("geometric");
                let m = c1 * c2;
                if m.is_zero() {
                    GrowthCertificate::FiniteSupport(0)
                } else {
                    GrowthCertificate::GeometricEquiv { m: m / S::of(2.0), b: r1 + r2, from: 0 }
                }
            }
        }
    }
}

fn check_finite<S: Scalar>(prefix: &[S], tail: &TailModel<S>) -> Result<()> {
    if let Some((i, v)) = prefix.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("coefficient a_{i} = {v} is not finite")));
    }
    let ok = match *tail {
        TailModel::Zero => true,
        TailModel::Constant(c) => c.is_finite(),
        TailModel::Geometric { m, b } => m.is_finite() && b.is_finite(),
    };
    if !ok {
        return Err(Error::InvalidParameter(format!("tail model {tail:?} is not finite")));
    }
    Ok(())
}

fn derive_explicit_certificate<S: Scalar>(prefix: &[S], tail: &TailModel<S>) -> GrowthCertificate<S> {
    let len = prefix.len() as u64;
    let max_prefix = prefix.iter().fold(S::zero(), |m, v| m.max(v.abs()));
    let last_nonzero = prefix.iter().rposition(|v| !v.is_zero()).map(|i| i as u64);
    let finite = || GrowthCertificate::FiniteSupport(last_nonzero.unwrap_or(0));
    match *tail {
        TailModel::Zero => finite(),
        TailModel::Constant(c) => {
            if c.is_zero() {
                finite()
            } else {
                GrowthCertificate::Bounded(max_prefix.max(c.abs()))
            }
        }
        TailModel::Geometric { m, b } => {
            if m.is_zero() || (b.is_zero() && len > 0) {
                return finite();
            }
            if b.is_zero() {
                // only a_0 = m survives
                return GrowthCertificate::FiniteSupport(0);
            }
            let bb = b.abs();
            if bb <= S::one() {
                return GrowthCertificate::Bounded(max_prefix.max(m.abs()));
            }
            // 2M|b|^n must dominate every prefix entry and |m||b|^n
            let mut half = m.abs() / S::of(2.0);
            for (n, v) in prefix.iter().enumerate() {
                let need =
                    Wide::from_scalar(v.abs() / S::of(2.0)).div(Wide::from_scalar(bb).powu(n as u64)).to_scalar();
                half = half.max(need);
            }
            GrowthCertificate::GeometricEquiv { m: half, b: bb, from: 0 }
        }
    }
}

fn validate_explicit_certificate<S: Scalar>(
    prefix: &[S],
    tail: &TailModel<S>,
    cert: &GrowthCertificate<S>,
) -> Result<()> {
    let len = prefix.len() as u64;
    for (n, v) in prefix.iter().enumerate() {
        if !cert.admits(n as u64, *v) {
            return Err(Error::InvalidCertificate(format!("a_{n} = {v} violates {cert:?}")));
        }
    }
    let bad = |why: &str| Err(Error::InvalidCertificate(format!("tail {tail:?} violates {cert:?}: {why}")));
    let one = S::one();
    match (*tail, *cert) {
        (TailModel::Zero, _) | (_, GrowthCertificate::Unverified) => Ok(()),
        (TailModel::Constant(c), _) | (TailModel::Geometric { m: c, b: _ }, _) if c.is_zero() => Ok(()),
        (_, GrowthCertificate::FiniteSupport(_)) => bad("non-zero tail under finite support"),
        (TailModel::Constant(c), GrowthCertificate::Bounded(_)) => {
            if cert.admits(len, c) {
                Ok(())
            } else {
                bad("constant exceeds bound")
            }
        }
        (TailModel::Geometric { m, b }, GrowthCertificate::Bounded(_)) => {
            if b.abs() <= one && cert.admits(len, m) {
                Ok(())
            } else {
                bad("geometric tail is not bounded")
            }
        }
        (TailModel::Constant(c), GrowthCertificate::GeometricEquiv { b, from, .. }) => {
            let n0 = len.max(from);
            if b.abs() >= one && cert.admits(n0, c) {
                Ok(())
            } else {
                bad("constant exceeds envelope")
            }
        }
        (TailModel::Geometric { m, b: tb }, GrowthCertificate::GeometricEquiv { b, from, .. }) => {
            let n0 = len.max(from);
            let a = Wide::from_scalar(m).mul(Wide::from_scalar(tb).powu(n0)).to_scalar();
            if tb.abs() <= b.abs() && cert.admits(n0, a) {
                Ok(())
            } else {
                bad("geometric rate exceeds envelope")
            }
        }
        (TailModel::Constant(c), GrowthCertificate::Factorial { b, from, .. }) => {
            let n0 = len.max(from);
            if b.abs() * S::of_u64(n0 + 1) >= one && cert.admits(n0, c) {
                Ok(())
            } else {
                bad("constant exceeds envelope")
            }
        }
        (TailModel::Geometric { m, b: tb }, GrowthCertificate::Factorial { b, from, .. }) => {
            let n0 = len.max(from);
            let a = Wide::from_scalar(m).mul(Wide::from_scalar(tb).powu(n0)).to_scalar();
            if tb.abs() <= b.abs() * S::of_u64(n0 + 1) && cert.admits(n0, a) {
                Ok(())
            } else {
                bad("geometric rate exceeds envelope")
            }
        }
    }
}

/// `p_T(n) = a_n γ^n / n!` in sign / log-magnitude form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLogTerm<S> {
    pub n: u64,
    pub sign: i8,
    /// `ln |a_n γ^n / n!|`, `-∞` for a zero term.
    pub log_mag: S,
    exact: Wide<S>,
}

impl<S: Scalar> SignedLogTerm<S> {
    /// The term in the working precision, rounded once from the extended form.
    pub fn value(&self) -> S {
        self.exact.to_scalar()
    }

    /// `sign · exp(log_mag)`; loses `~|log_mag|` ulp relative to [`Self::value`].
    pub fn value_from_log(&self) -> S {
        if self.sign == 0 {
            S::zero()
        } else {
            S::of(self.sign as f64) * self.log_mag.exp()
        }
    }
}

/// Single term `a_n γ^n / n!` with the convention `0^0 = 1`.
pub fn term<S: Scalar>(seq: &CoefficientSequence<S>, gamma: S, n: u64) -> SignedLogTerm<S> {
    let w = seq.term_wide(gamma, n);
    SignedLogTerm { n, sign: w.signum(), log_mag: w.ln_abs(), exact: w }
}

/// Certified upper bound on `Σ_{n>N} |a_n γ^n / n!|`; `+∞` means unbounded.
pub fn tail_bound<S: Scalar>(cert: &GrowthCertificate<S>, gamma: S, last: u64) -> S {
    match cert.term_envelope(gamma) {
        Some(env) => env.tail(last),
        None => S::infinity(),
    }
}

/// Smallest truncation index whose certified tail is at most `eps`.
pub fn plan_truncation<S: Scalar>(cert: &GrowthCertificate<S>, gamma: S, eps: S) -> Result<TruncationPlan<S>> {
    match cert.term_envelope(gamma) {
        Some(env) => env.plan(eps),
        None => {
            Err(Error::DivergenceUnknown("sequence has no growth certificate; infinite sets cannot be summed".into()))
        }
    }
}

/// Positive and negative part sums, each compensated.
#[derive(Clone, Copy, Debug, Default)]
pub struct PartSums<S> {
    pub positive: NeumaierSum<S>,
    pub negative: NeumaierSum<S>,
}

impl<S: Scalar> PartSums<S> {
    pub fn new() -> Self {
        PartSums { positive: NeumaierSum::new(), negative: NeumaierSum::new() }
    }

    #[inline]
    pub fn push(&mut self, t: S) {
        if t > S::zero() {
            self.positive.add(t);
        } else if t < S::zero() {
            self.negative.add(-t);
        }
    }

    /// `Σ` over positive terms (≥ 0).
    pub fn pos(&self) -> S {
        self.positive.value().max(S::zero())
    }

    /// `-Σ` over negative terms (≥ 0).
    pub fn neg(&self) -> S {
        self.negative.value().max(S::zero())
    }

    pub fn signed(&self) -> S {
        self.pos() - self.neg()
    }

    pub fn error_bound(&self) -> S {
        self.positive.error_bound() + self.negative.error_bound()
    }
}

/// Split sums of the terms at `indices` by sign.
pub fn sum_terms<S, I>(seq: &CoefficientSequence<S>, gamma: S, indices: I) -> PartSums<S>
where
    S: Scalar,
    I: IntoIterator<Item = u64>,
{
    let mut sums = PartSums::new();
    for n in indices {
        sums.push(seq.term_wide(gamma, n).to_scalar());
    }
    sums
}
