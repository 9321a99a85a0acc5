//! Compensated (Kahan–Babuška–Neumaier) accumulation.

use crate::scalar::Scalar;

/// Running compensated sum that also tracks `Σ|x|` for error estimates.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum<S> {
    sum: S,
    comp: S,
    abs_total: S,
    count: u64,
}

impl<S: Scalar> NeumaierSum<S> {
    pub fn new() -> Self {
        NeumaierSum { sum: S::zero(), comp: S::zero(), abs_total: S::zero(), count: 0 }
    }

    #[inline]
    pub fn add(&mut self, x: S) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs_total += x.abs();
        self.count += 1;
    }

    pub fn value(&self) -> S {
        if !self.sum.is_finite() {
            // an overflowed running sum poisons the compensation with inf - inf
            return self.sum;
        }
        self.sum + self.comp
    }

    /// Sum of magnitudes of everything added so far.
    pub fn abs_total(&self) -> S {
        self.abs_total
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// A-posteriori bound on the accumulation error: `2u|s| + n u^2 Σ|x|`,
    /// inflated to cover the per-summand rounding of the inputs themselves.
    pub fn error_bound(&self) -> S {
        let u = S::epsilon();
        let n = S::of_u64(self.count.max(1));
        S::of(2.0) * u * self.value().abs() + u * self.abs_total * (S::one() + n * u)
    }
}

impl<S: Scalar> Extend<S> for NeumaierSum<S> {
    fn extend<I: IntoIterator<Item = S>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl<S: Scalar> FromIterator<S> for NeumaierSum<S> {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        acc.extend(iter);
        acc
    }
}

/// Pairwise (cascade) summation for order-independent reductions of fixed-size blocks.
pub fn pairwise_sum<S: Scalar>(xs: &[S]) -> S {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        let acc: NeumaierSum<S> = xs.iter().copied().collect();
        return acc.value();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
