//! Analytic functions as Taylor measures: `f(x) = T_{x−x₀, a}(ℕ)` with
//! `a_n = f⁽ⁿ⁾(x₀)`.
//!
//! Sums, products and powers stay inside the representation. Sequences whose
//! derivatives grow factorially (finite radius of convergence) are combined in
//! term form `a_n / n!`, so their coefficients never need to leave the floating
//! range.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    plan_truncation, CoefficientEnvelope, CoefficientSequence, GrowthCertificate, PartSums, TailModel,
};
use crate::measure::{MeasureValue, TaylorMeasure};
use crate::scalar::Scalar;
use crate::summation::NeumaierSum;
use crate::wide::{factorial, ln_factorial, Wide};

/// Functions with known derivative sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Builtin {
    Exp,
    Sin,
    Cos,
    /// `Σ coeffs[k] x^k`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `1 / (1 − x)`.
    Geometric,
}

#[derive(Clone, Debug)]
pub struct AnalyticRep<S> {
    pub center: S,
    pub coefficients: CoefficientSequence<S>,
    /// Evaluation is allowed for `|x − center| < radius_hint` (may be `+∞`).
    pub radius_hint: S,
}

fn is_factorial<S>(c: &GrowthCertificate<S>) -> bool {
    matches!(c, GrowthCertificate::Factorial { .. })
}

/// Per-index cache in front of a coefficient rule.
struct Memo<S> {
    cache: Mutex<HashMap<u64, S>>,
    rule: Box<dyn Fn(u64) -> S + Send + Sync>,
}

impl<S: Scalar> Memo<S> {
    fn wrap<F: Fn(u64) -> S + Send + Sync + 'static>(rule: F) -> impl Fn(u64) -> S + Send + Sync + 'static {
        let memo = Arc::new(Memo { cache: Mutex::new(HashMap::new()), rule: Box::new(rule) });
        move |n| {
            if let Some(&v) = memo.cache.lock().expect("memo lock").get(&n) {
                return v;
            }
            let v = (memo.rule)(n);
            memo.cache.lock().expect("memo lock").insert(n, v);
            v
        }
    }
}

/// Growing prefix of `seq`'s values at consecutive indices.
struct Prefix<S> {
    seq: CoefficientSequence<S>,
    term_form: bool,
    values: Mutex<Vec<S>>,
}

impl<S: Scalar> Prefix<S> {
    fn new(seq: CoefficientSequence<S>, term_form: bool) -> Self {
        Prefix { seq, term_form, values: Mutex::new(Vec::new()) }
    }

    /// Values at `0..=last`: `a_n / n!` in term form, else `a_n`.
    fn upto(&self, last: u64) -> Vec<S> {
        let mut v = self.values.lock().expect("prefix lock");
        if (v.len() as u64) <= last {
            let want = (last + 1).max(2 * v.len() as u64);
            *v = if self.term_form {
                self.seq.terms_prefix(S::one(), want - 1)
            } else {
                (0..want).map(|n| self.seq.coefficient(n)).collect()
            };
        }
        v[..=last as usize].to_vec()
    }
}

/// Bound on `|a_k|` implied by a certificate, in extended range.
fn envelope_at<S: Scalar>(cert: &GrowthCertificate<S>, k: u64) -> Option<Wide<S>> {
    match *cert {
        GrowthCertificate::FiniteSupport(_) | GrowthCertificate::Unverified => None,
        GrowthCertificate::Bounded(m) => Some(Wide::from_scalar(m.abs())),
        GrowthCertificate::GeometricEquiv { m, b, from } if k >= from => {
            Some(Wide::from_scalar(S::of(2.0) * m.abs()).mul(Wide::from_scalar(b.abs()).powu(k)))
        }
        GrowthCertificate::Factorial { m, b, degree, from } if k >= from => Some(
            Wide::from_scalar(m.abs())
                .mul(Wide::from_scalar(b.abs()).powu(k))
                .mul(Wide::from_scalar(S::of_u64(k + 1)).powu(degree as u64))
                .mul(factorial::<S>(k)),
        ),
        _ => None,
    }
}

/// `max_m (m+1)^d q^m` for `0 < q < 1`.
fn poly_geometric_sup<S: Scalar>(d: u32, q: S) -> S {
    if d == 0 {
        return S::one();
    }
    let peak = (S::of(d as f64) / -q.ln() - S::one()).max(S::zero());
    let m0 = peak.floor().to_u64().unwrap_or(0);
    [m0, m0 + 1].iter().map(|&m| S::of_u64(m + 1).powi(d as i32) * q.powi(m as i32)).fold(S::one(), S::max)
}

impl<S: Scalar> AnalyticRep<S> {
    pub fn new(center: S, coefficients: CoefficientSequence<S>, radius_hint: S) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidParameter(format!("center must be finite, got {center}")));
        }
        if !(radius_hint > S::zero()) {
            return Err(Error::InvalidParameter(format!("radius_hint must be positive, got {radius_hint}")));
        }
        Ok(AnalyticRep { center, coefficients, radius_hint })
    }

    pub fn builtin(f: &Builtin, center: S) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidParameter(format!("center must be finite, got {center}")));
        }
        let inf = S::infinity();
        match f {
            Builtin::Exp => Self::new(center, CoefficientSequence::constant(center.exp()), inf),
            Builtin::Sin | Builtin::Cos => {
                let (s, c) = center.sin_cos();
                let cycle = if *f == Builtin::Sin { [s, c, -s, -c] } else { [c, -s, -c, s] };
                let seq =
                    CoefficientSequence::custom(move |n| cycle[(n % 4) as usize], GrowthCertificate::Bounded(S::one()));
                Self::new(center, seq, inf)
            }
            Builtin::Polynomial { coeffs } => {
                let p: Vec<S> = coeffs.iter().map(|&c| S::of(c)).collect();
                Self::polynomial(&p, center)
            }
            Builtin::Geometric => {
                if !(center.abs() < S::one()) {
                    return Err(Error::OutOfDomain(format!("1/(1−x) needs |center| < 1, got {center}")));
                }
                let r = S::one() / (S::one() - center);
                // a_n = n! / (1−c)^{n+1}, held as a_n / n! = r^{n+1}
                let seq = CoefficientSequence::from_terms(
                    move |n| Wide::from_scalar(r).powu(n + 1).to_scalar(),
                    S::one(),
                    GrowthCertificate::Factorial { m: r, b: r, degree: 0, from: 0 },
                )?;
                Self::new(center, seq, S::one() - center.abs())
            }
        }
    }

    /// `Σ p[k] x^k` expanded at `center`; derivatives computed exactly up to rounding.
    pub fn polynomial(p: &[S], center: S) -> Result<Self> {
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("polynomial coefficients must be finite".into()));
        }
        // f^(n)(c) = Σ_{k≥n} p_k k!/(k−n)! c^{k−n}
        let a: Vec<S> = (0..p.len())
            .map(|n| {
                let mut acc = NeumaierSum::new();
                let mut falling = S::one();
                for j in 1..=n {
                    falling *= S::of_u64(j as u64);
                }
                let mut cp = S::one();
                for (k, &pk) in p.iter().enumerate().skip(n) {
                    if k > n {
                        falling = falling * S::of_u64(k as u64) / S::of_u64((k - n) as u64);
                        cp *= center;
                    }
                    acc.add(pk * falling * cp);
                }
                acc.value()
            })
            .collect();
        Self::new(center, CoefficientSequence::explicit(a, TailModel::Zero)?, S::infinity())
    }

    pub fn constant(c: S, center: S) -> Result<Self> {
        Self::polynomial(&[c], center)
    }

    /// `f(t) = t`.
    pub fn identity(center: S) -> Result<Self> {
        Self::polynomial(&[S::zero(), S::one()], center)
    }

    /// Taylor polynomial of degree `degree` at the same center.
    pub fn truncated(&self, degree: u64) -> Result<Self> {
        let a = (0..=degree).map(|n| self.coefficients.coefficient(n)).collect();
        Self::new(self.center, CoefficientSequence::explicit(a, TailModel::Zero)?, S::infinity())
    }

    fn check_domain(&self, x: S) -> Result<S> {
        let h = x - self.center;
        if !(h.abs() < self.radius_hint) {
            return Err(Error::OutOfDomain(format!(
                "|{x} − {}| is not below the validity radius {}",
                self.center, self.radius_hint
            )));
        }
        Ok(h)
    }

    /// `f(x)` within `eps`; `x = center` returns `a_0` exactly.
    pub fn eval(&self, x: S, eps: S) -> Result<MeasureValue<S>> {
        let h = self.check_domain(x)?;
        if h.is_zero() {
            return Ok(MeasureValue::exact(self.coefficients.coefficient(0)));
        }
        TaylorMeasure::new(self.coefficients.clone(), h)?.total_mass(eps)
    }

    /// Pointwise product; both factors must share their center.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.center != other.center {
            return Err(Error::CenterMismatch(self.center.to_f64_lossy(), other.center.to_f64_lossy()));
        }
        let radius = self.radius_hint.min(other.radius_hint);
        let (c1, c2) = (self.coefficients.certificate(), other.coefficients.certificate());
        let certificate = match (self.coefficients.coefficient_envelope(), other.coefficients.coefficient_envelope()) {
            (Some(e1), Some(e2)) => e1.binomial_product(e2),
            _ => GrowthCertificate::Unverified,
        };
        if let (GrowthCertificate::FiniteSupport(k1), GrowthCertificate::FiniteSupport(k2)) = (*c1, *c2) {
            let a: Vec<S> = (0..=k1).map(|n| self.coefficients.coefficient(n)).collect();
            let b: Vec<S> = (0..=k2).map(|n| other.coefficients.coefficient(n)).collect();
            let c = (0..=k1 + k2).map(|l| binomial_convolution(&a, &b, l)).collect();
            return Self::new(self.center, CoefficientSequence::explicit(c, TailModel::Zero)?, radius);
        }
        let term_form = is_factorial(c1) || is_factorial(c2);
        let p1 = Prefix::new(self.coefficients.clone(), term_form);
        let p2 = Prefix::new(other.coefficients.clone(), term_form);
        let seq = if term_form {
            // c_l / l! = Σ (a_n / n!) (b_{l−n} / (l−n)!)
            let rule = Memo::wrap(move |l| {
                let (a, b) = (p1.upto(l), p2.upto(l));
                (0..=l as usize).map(|n| a[n] * b[l as usize - n]).collect::<NeumaierSum<S>>().value()
            });
            CoefficientSequence::from_terms(rule, S::one(), certificate)?
        } else {
            let rule = Memo::wrap(move |l| binomial_convolution(&p1.upto(l), &p2.upto(l), l));
            CoefficientSequence::custom(rule, certificate)
        };
        Self::new(self.center, seq, radius)
    }

    /// `f^n` by binary exponentiation; `f^0 = 1`.
    pub fn power(&self, mut n: u64) -> Result<Self> {
        let mut acc = Self::constant(S::one(), self.center)?;
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.multiply(&base)?;
            }
            n >>= 1;
            if n > 0 {
                base = base.multiply(&base)?;
            }
        }
        Ok(acc)
    }

    /// `α f + β g` at a common center.
    pub fn linear_combination(alpha: S, f: &Self, beta: S, g: &Self) -> Result<Self> {
        if f.center != g.center {
            return Err(Error::CenterMismatch(f.center.to_f64_lossy(), g.center.to_f64_lossy()));
        }
        let radius = f.radius_hint.min(g.radius_hint);
        let (c1, c2) = (f.coefficients.certificate(), g.coefficients.certificate());
        if let (GrowthCertificate::FiniteSupport(k1), GrowthCertificate::FiniteSupport(k2)) = (*c1, *c2) {
            let c = (0..=k1.max(k2))
                .map(|n| alpha * f.coefficients.coefficient(n) + beta * g.coefficients.coefficient(n))
                .collect();
            return Self::new(f.center, CoefficientSequence::explicit(c, TailModel::Zero)?, radius);
        }
        let certificate = match (f.coefficients.coefficient_envelope(), g.coefficients.coefficient_envelope()) {
            (Some(e1), Some(e2)) => combine_envelopes(alpha.abs(), e1, beta.abs(), e2),
            _ => GrowthCertificate::Unverified,
        };
        let (s1, s2) = (f.coefficients.clone(), g.coefficients.clone());
        let seq = if is_factorial(c1) || is_factorial(c2) {
            let (p1, p2) = (Prefix::new(s1, true), Prefix::new(s2, true));
            let rule = Memo::wrap(move |n| {
                let (a, b) = (p1.upto(n), p2.upto(n));
                alpha * a[n as usize] + beta * b[n as usize]
            });
            CoefficientSequence::from_terms(rule, S::one(), certificate)?
        } else {
            CoefficientSequence::custom(move |n| alpha * s1.coefficient(n) + beta * s2.coefficient(n), certificate)
        };
        Self::new(f.center, seq, radius)
    }

    /// Taylor shift to `new_center`: `c_k = Σ_m a_{k+m} h^m / m!`, `h = x₁ − x₀`.
    ///
    /// Each `c_k` is accurate to `eps` relative to the original certificate's
    /// envelope at `k`; the new certificate absorbs that error.
    pub fn recenter(&self, new_center: S, eps: S) -> Result<Self> {
        let h = self.check_domain(new_center)?;
        if !(eps > S::zero()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        let radius = self.radius_hint - h.abs();
        let cert = *self.coefficients.certificate();
        if let GrowthCertificate::FiniteSupport(k) = cert {
            let a: Vec<S> = (0..=k).map(|n| self.coefficients.coefficient(n)).collect();
            let c = (0..=k as usize)
                .map(|k0| {
                    let mut w = S::one();
                    let mut acc = NeumaierSum::new();
                    for (m, &am) in a[k0..].iter().enumerate() {
                        if m > 0 {
                            w = w * h / S::of_u64(m as u64);
                        }
                        acc.add(am * w);
                    }
                    acc.value()
                })
                .collect();
            return Self::new(new_center, CoefficientSequence::explicit(c, TailModel::Zero)?, radius);
        }
        let envelope = self
            .coefficients
            .coefficient_envelope()
            .ok_or_else(|| Error::DivergenceUnknown("recentering needs a certificate valid from index 0".into()))?;
        let new_cert = shifted_certificate(envelope, h, eps)?;
        let seq = self.coefficients.clone();
        let term_form = is_factorial(&cert);
        let rule = Memo::wrap(move |k| shift_coefficient(&seq, &cert, h, k, eps, term_form));
        let coefficients = if term_form {
            CoefficientSequence::from_terms(rule, S::one(), new_cert)?
        } else {
            CoefficientSequence::custom(rule, new_cert)
        };
        Self::new(new_center, coefficients, radius)
    }

    /// `max_i |f(x_i) − oracle(x_i)|` over `m` equispaced points of `[lo, hi]`.
    pub fn sup_distance_on_grid(&self, oracle: &dyn Fn(S) -> S, lo: S, hi: S, m: usize, eps: S) -> Result<S> {
        if m < 2 || !(lo <= hi) {
            return Err(Error::InvalidParameter(format!("need m ≥ 2 and lo ≤ hi, got m = {m}, [{lo}, {hi}]")));
        }
        let mut worst = S::zero();
        for i in 0..m {
            let x = lo + (hi - lo) * S::of_u64(i as u64) / S::of_u64(m as u64 - 1);
            let d = (self.eval(x, eps)?.value - oracle(x)).abs();
            worst = worst.max(d);
        }
        Ok(worst)
    }

    /// `(∫_lo^hi |f|^p)^{1/p}` by composite Simpson with Richardson extrapolation,
    /// refined until successive estimates differ by at most `eps`.
    pub fn lp_norm_on_interval(&self, p: S, lo: S, hi: S, eps: S) -> Result<S> {
        self.lp_norm_with_depth(p, lo, hi, eps, LP_MAX_DEPTH)
    }

    /// [`Self::lp_norm_on_interval`] with an explicit cap on interval halvings.
    pub fn lp_norm_with_depth(&self, p: S, lo: S, hi: S, eps: S, max_depth: u32) -> Result<S> {
        if !(p >= S::one()) || !(lo <= hi) || !(eps > S::zero()) {
            return Err(Error::InvalidParameter(format!("need p ≥ 1, lo ≤ hi and eps > 0, got p = {p}, [{lo}, {hi}]")));
        }
        if lo == hi {
            return Ok(S::zero());
        }
        let point_eps = eps * S::of(1e-3);
        let g = |x: S| -> Result<S> { Ok(self.eval(x, point_eps)?.value.abs().powf(p)) };
        let width = hi - lo;
        // endpoints, then odd-indexed points of each refinement
        let ends = g(lo)? + g(hi)?;
        let mut evens = NeumaierSum::new();
        let mut odds = g(lo + width / S::of(2.0))?;
        let mut intervals: u64 = 2;
        let simpson = |ends: S, evens: S, odds: S, n: u64| {
            width / S::of_u64(3 * n) * (ends + S::of(2.0) * evens + S::of(4.0) * odds)
        };
        let mut prev = simpson(ends, S::zero(), odds, intervals);
        let mut prev_rich: Option<S> = None;
        for _ in 0..max_depth {
            evens.add(odds);
            intervals *= 2;
            let mut new_odds = NeumaierSum::new();
            for i in (1..intervals).step_by(2) {
                new_odds.add(g(lo + width * S::of_u64(i) / S::of_u64(intervals))?);
            }
            odds = new_odds.value();
            let cur = simpson(ends, evens.value(), odds, intervals);
            let rich = cur + (cur - prev) / S::of(15.0);
            if let Some(r) = prev_rich {
                if (rich - r).abs() <= eps {
                    return Ok(rich.max(S::zero()).powf(S::one() / p));
                }
            }
            prev = cur;
            prev_rich = Some(rich);
        }
        Err(Error::QuadratureStall { depth: max_depth })
    }
}

/// Default refinement cap for [`AnalyticRep::lp_norm_on_interval`] (`2^21` intervals).
pub const LP_MAX_DEPTH: u32 = 20;

/// `c_l = Σ_n C(l, n) a_n b_{l−n}` over the available entries.
fn binomial_convolution<S: Scalar>(a: &[S], b: &[S], l: u64) -> S {
    let mut acc = NeumaierSum::new();
    let mut binom = S::one();
    for n in 0..=l {
        if n > 0 {
            binom = binom * S::of_u64(l - n + 1) / S::of_u64(n);
        }
        let (i, j) = (n as usize, (l - n) as usize);
        if i < a.len() && j < b.len() {
            acc.add(binom * a[i] * b[j]);
        }
    }
    acc.value()
}

/// Certificate for `α a + β b`.
fn combine_envelopes<S: Scalar>(
    wa: S,
    a: CoefficientEnvelope<S>,
    wb: S,
    b: CoefficientEnvelope<S>,
) -> GrowthCertificate<S> {
    use CoefficientEnvelope::*;
    let geo = |e: CoefficientEnvelope<S>| match e {
        Finite { max_abs, .. } => Some((max_abs, S::one())),
        Geometric { coef, rate } => Some((coef, rate)),
        Factorial { .. } => None,
    };
    match (a, b) {
        (Factorial { coef: c1, rate: r1, degree: d1 }, Factorial { coef: c2, rate: r2, degree: d2 }) => {
            GrowthCertificate::Factorial { m: wa * c1 + wb * c2, b: r1.max(r2), degree: d1.max(d2), from: 0 }
        }
        (Factorial { coef, rate, degree }, g) | (g, Factorial { coef, rate, degree }) => {
            let (wf, wg) = if matches!(a, Factorial { .. }) { (wa, wb) } else { (wb, wa) };
            let (cg, rg) = geo(g).expect("non-factorial envelope");
            if rate.is_zero() {
                return GrowthCertificate::Unverified;
            }
            // r_g^n ≤ e^{r_g / r_f} n! r_f^n
            GrowthCertificate::Factorial { m: wf * coef + wg * cg * (rg / rate).exp(), b: rate, degree, from: 0 }
        }
        (x, y) => {
            let (c1, r1) = geo(x).expect("geometric");
            let (c2, r2) = geo(y).expect("geometric");
            let r = r1.max(r2);
            let m = wa * c1 + wb * c2;
            if r <= S::one() {
                GrowthCertificate::Bounded(m)
            } else {
                GrowthCertificate::GeometricEquiv { m: m / S::of(2.0), b: r, from: 0 }
            }
        }
    }
}

/// Certificate of `c_k = Σ_m a_{k+m} h^m / m!`.
///
/// The shifted envelope dominates the original one, so inflating it by
/// `(1 + eps)` covers the truncation error of each computed `c_k`.
fn shifted_certificate<S: Scalar>(env: CoefficientEnvelope<S>, h: S, eps: S) -> Result<GrowthCertificate<S>> {
    let ha = h.abs();
    let grow = (S::one() + eps) * (S::one() + S::of(64.0) * S::epsilon());
    Ok(match env {
        CoefficientEnvelope::Finite { last, .. } => GrowthCertificate::FiniteSupport(last),
        // |c_k| ≤ C r^k e^{r|h|}
        CoefficientEnvelope::Geometric { coef, rate } => {
            let m = coef * (rate * ha).exp() * grow;
            if rate <= S::one() {
                GrowthCertificate::Bounded(m)
            } else {
                GrowthCertificate::GeometricEquiv { m: m / S::of(2.0), b: rate, from: 0 }
            }
        }
        // Σ_m (k+m)!/m! y^m = k! (1−y)^{−k−1}, with (m+1)^d x^m ≤ K y^m
        CoefficientEnvelope::Factorial { coef, rate, degree } => {
            let x = rate * ha;
            if !(x < S::one()) {
                return Err(Error::OutOfDomain(format!("shift {h} leaves the certified disc (rate {rate})")));
            }
            let y = if degree == 0 { x } else { (S::one() + x) / S::of(2.0) };
            let k = if degree == 0 { S::one() } else { poly_geometric_sup(degree, x / y) };
            let s = S::one() - y;
            GrowthCertificate::Factorial { m: coef * k / s * grow, b: rate / s, degree, from: 0 }
        }
    })
}

/// One shifted coefficient, as `c_k` or (term form) `c_k / k!`.
fn shift_coefficient<S: Scalar>(
    seq: &CoefficientSequence<S>,
    cert: &GrowthCertificate<S>,
    h: S,
    k: u64,
    eps: S,
    term_form: bool,
) -> S {
    // the shifted sequence a_{k+m} inherits a bound from the original certificate
    let (shifted, scale) = match *cert {
        GrowthCertificate::Bounded(m) => (GrowthCertificate::Bounded(m), Wide::one()),
        GrowthCertificate::GeometricEquiv { m, b, from } => (
            GrowthCertificate::GeometricEquiv { m: m * b.abs().powi(k as i32), b, from: from.saturating_sub(k) },
            Wide::one(),
        ),
        GrowthCertificate::Factorial { m, b, degree, from } => {
            // (k+m)! ≤ m! (k+1)^k (m+1)^k and (k+m+1)^d ≤ (k+1)^d (m+1)^d; divided by k!
            let ln = m.abs().ln() + S::of_u64(k) * b.abs().ln() + S::of_u64(k + degree as u64) * S::of_u64(k + 1).ln()
                - ln_factorial::<S>(k);
            (
                GrowthCertificate::Factorial {
                    m: ln.exp(),
                    b,
                    degree: degree + k as u32,
                    from: from.saturating_sub(k),
                },
                factorial::<S>(k),
            )
        }
        _ => return S::nan(),
    };
    let budget = envelope_at(cert, k).map_or(S::zero(), |e| e.div(scale).to_scalar());
    let tol = if budget > S::zero() && budget.is_finite() { eps * budget } else { eps };
    let last = match plan_truncation(&shifted, h, tol) {
        Ok(p) => p.last_index,
        Err(_) => return S::nan(),
    };
    let mut sums = PartSums::new();
    let hw = Wide::from_scalar(h);
    let mut w = Wide::<S>::one().div(if term_form { scale } else { Wide::one() }); // h^m / (m! [k!])
    for m in 0..=last {
        if m > 0 {
            w = w.mul(hw).div(Wide::from_scalar(S::of_u64(m)));
        }
        let a = seq.coefficient_wide(k + m);
        if !a.is_zero() {
            sums.push(a.mul(w).to_scalar());
        }
    }
    sums.signed()
}
