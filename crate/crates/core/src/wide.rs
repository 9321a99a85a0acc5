//! Extended-range double-word arithmetic.
//!
//! A [`Wide`] value is `(hi + lo) * 2^exp` where `hi + lo` is an unevaluated
//! double-word sum with `|hi|` in `[0.5, 1)`. Products and quotients carry roughly
//! twice the working precision and never overflow, so `a_n * gamma^n / n!` can be
//! formed with a single final rounding even when `gamma^n` and `n!` individually
//! leave the floating range.

use crate::scalar::{ldexp, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Wide<S> {
    hi: S,
    lo: S,
    exp: i64,
}

#[inline]
fn two_sum<S: Scalar>(a: S, b: S) -> (S, S) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn fast_two_sum<S: Scalar>(a: S, b: S) -> (S, S) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod<S: Scalar>(a: S, b: S) -> (S, S) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Binary exponent `e` with `x = m * 2^e`, `|m|` in `[0.5, 1)`.
fn frexp_exp<S: Scalar>(x: S) -> i64 {
    let (mantissa, exponent, _) = x.integer_decode();
    let bits = 64 - mantissa.leading_zeros() as i64;
    exponent as i64 + bits
}

impl<S: Scalar> Wide<S> {
    pub(crate) fn zero() -> Self {
        Wide { hi: S::zero(), lo: S::zero(), exp: 0 }
    }

    pub(crate) fn one() -> Self {
        Wide { hi: S::of(0.5), lo: S::zero(), exp: 1 }
    }

    pub(crate) fn from_scalar(x: S) -> Self {
        Self::normalize(x, S::zero(), 0)
    }

    fn normalize(hi: S, lo: S, exp: i64) -> Self {
        let (hi, lo) = fast_two_sum(hi, lo);
        if hi.is_zero() {
            return Self::zero();
        }
        let shift = frexp_exp(hi);
        Wide { hi: ldexp(hi, -shift), lo: ldexp(lo, -shift), exp: exp + shift }
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.hi.is_zero()
    }

    pub(crate) fn signum(&self) -> i8 {
        if self.hi > S::zero() {
            1
        } else if self.hi < S::zero() {
            -1
        } else {
            0
        }
    }

    pub(crate) fn abs(self) -> Self {
        if self.hi < S::zero() {
            Wide { hi: -self.hi, lo: -self.lo, exp: self.exp }
        } else {
            self
        }
    }

    pub(crate) fn mul(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + (self.hi * other.lo + self.lo * other.hi);
        Self::normalize(p, e, self.exp + other.exp)
    }

    pub(crate) fn div(self, other: Self) -> Self {
        assert!(!other.is_zero(), "Wide division by zero");
        if self.is_zero() {
            return Self::zero();
        }
        let q1 = self.hi / other.hi;
        // remainder r = self - q1 * other, formed in double-word
        let (p, pe) = two_prod(q1, other.hi);
        let (r, re) = two_sum(self.hi, -p);
        let r = r + (re - pe + self.lo - q1 * other.lo);
        let q2 = r / other.hi;
        Self::normalize(q1, q2, self.exp - other.exp)
    }

    pub(crate) fn mul_scalar(self, x: S) -> Self {
        self.mul(Self::from_scalar(x))
    }

    /// `self^n` by binary exponentiation with `0^0 = 1`.
    pub(crate) fn powu(self, mut n: u64) -> Self {
        let mut base = self;
        let mut acc = Self::one();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(base);
            }
        }
        acc
    }

    /// `n!` by direct product; callers bound `n` (see [`factorial`]).
    fn factorial_product(n: u64) -> Self {
        let mut acc = Self::one();
        for k in 2..=n {
            acc = acc.mul_scalar(S::of_u64(k));
        }
        acc
    }

    /// Round to the nearest scalar (one rounding for normal results).
    pub(crate) fn to_scalar(self) -> S {
        if self.is_zero() {
            return S::zero();
        }
        ldexp(self.hi + self.lo, self.exp)
    }

    /// Natural log of the magnitude; `-inf` for zero.
    pub(crate) fn ln_abs(self) -> S {
        if self.is_zero() {
            return S::neg_infinity();
        }
        let m = (self.hi + self.lo).abs();
        m.ln() + S::of(self.exp as f64) * S::LN_2()
    }

    /// Rebuild a magnitude from its natural log (precision limited by `|ln|`).
    pub(crate) fn from_ln(ln: S) -> Self {
        if ln == S::neg_infinity() {
            return Self::zero();
        }
        let k = (ln / S::LN_2()).floor();
        let frac = ln - k * S::LN_2();
        let kk = k.to_i64().unwrap_or(i64::MAX / 4);
        Self::normalize(frac.exp(), S::zero(), kk)
    }
}

/// Largest `n` for which `n!` is formed by exact double-word products; beyond it
/// the Stirling series is used.
pub(crate) const FACTORIAL_PRODUCT_LIMIT: u64 = 4096;

pub(crate) fn factorial<S: Scalar>(n: u64) -> Wide<S> {
    if n <= FACTORIAL_PRODUCT_LIMIT {
        Wide::factorial_product(n)
    } else {
        Wide::from_ln(ln_factorial_stirling::<S>(n))
    }
}

/// `ln n!` for any `n`.
pub(crate) fn ln_factorial<S: Scalar>(n: u64) -> S {
    if n <= FACTORIAL_PRODUCT_LIMIT {
        Wide::<S>::factorial_product(n).ln_abs()
    } else {
        ln_factorial_stirling(n)
    }
}

fn ln_factorial_stirling<S: Scalar>(n: u64) -> S {
    let z = S::of_u64(n) + S::one();
    let half = S::of(0.5);
    let inv = z.recip();
    let inv2 = inv * inv;
    let series = inv
        * (S::of(1.0 / 12.0) - inv2 * (S::of(1.0 / 360.0) - inv2 * (S::of(1.0 / 1260.0) - inv2 * S::of(1.0 / 1680.0))));
    (z - half) * z.ln() - z + half * (S::of(2.0) * S::PI()).ln() + series
}
