//! Scalar abstraction shared by every deterministic kernel.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the numerical kernels are generic over (f32 or f64).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Number of explicit mantissa bits plus the hidden bit.
    const MANTISSA_DIGITS: u32;

    /// Lossless for integers and every finite `f64`/`f32` literal used in the crate.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn of_u64(n: u64) -> Self {
        Self::from_u64(n).expect("u64 is representable in every Scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const MANTISSA_DIGITS: u32 = f32::MANTISSA_DIGITS;
}

impl Scalar for f64 {
    const MANTISSA_DIGITS: u32 = f64::MANTISSA_DIGITS;
}

/// Exact `2^e`, assembled in steps so that exponents past the `powi` range stay exact
/// until the result itself under/overflows.
pub(crate) fn pow2<S: Scalar>(e: i64) -> S {
    let two = S::of(2.0);
    let step: i64 = 60;
    let mut rest = e;
    let mut out = S::one();
    while rest > step {
        out *= two.powi(step as i32);
        rest -= step;
        if out.is_infinite() {
            return out;
        }
    }
    while rest < -step {
        out *= two.powi(-step as i32);
        rest += step;
        if out.is_zero() {
            return out;
        }
    }
    out * two.powi(rest as i32)
}

/// `x * 2^e`; exact unless the result is subnormal, over- or underflows.
pub(crate) fn ldexp<S: Scalar>(x: S, e: i64) -> S {
    if x.is_zero() || !x.is_finite() {
        return x;
    }
    let min_normal_exp: i64 = if S::MANTISSA_DIGITS > 24 { -1022 } else { -126 };
    if e > 0 {
        let half = e / 2;
        x * pow2::<S>(half) * pow2::<S>(e - half)
    } else if e >= min_normal_exp {
        x * pow2::<S>(e)
    } else {
        ldexp(x * pow2::<S>(min_normal_exp), e - min_normal_exp)
    }
}
