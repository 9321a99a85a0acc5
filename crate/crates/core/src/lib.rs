//! Taylor measures on the natural numbers.
//!
//! A Taylor measure assigns to `B ⊆ ℕ` the value `Σ_{n∈B} a_n γ^n / n!`. The
//! crate evaluates such measures with certified truncation error, decomposes
//! them into positive and negative parts, equips them with an inner product,
//! turns them into probability mass functions, samples from them, randomizes
//! them, and uses them to represent analytic functions.
//!
//! Deterministic kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! Monte Carlo and stochastic layers work in `f64`.

// `!(x > 0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod measure;
pub mod montecarlo;
pub mod natset;
pub mod probability;
pub mod scalar;
pub mod stochastic;
pub mod summation;
mod wide;

pub use analytic::{AnalyticRep, Builtin};
pub use error::{Error, Result};
pub use geometry::{distance, hilbert_axiom_report, inner_product, norm, rational_approximation, HilbertReport};
pub use kernel::{
    plan_truncation, sum_terms, tail_bound, term, CoefficientSequence, GrowthCertificate, PartSums, SignedLogTerm,
    TailModel, TruncationPlan,
};
pub use measure::{linear_combination, JordanPair, MeasureValue, PartValues, TaylorMeasure};
pub use montecarlo::{
    estimate_measure, estimate_normalizer_poisson, replicate, sample_pmf, sample_power_series, EstimateOptions,
    McEstimate, NormalizerMode, PowerSeriesSampler, RngSpec, SampleDraws, SamplerStrategy,
};
pub use natset::NatSet;
pub use probability::{
    from_pmf, measure_from_densities, normalizer, probability_pair, PmfSource, PowerSeriesPmf, TaylorProbabilityPair,
};
pub use scalar::Scalar;
pub use stochastic::{
    gaussian_truncation, sample_stm, simulate_ar1, simulate_brownian, simulate_random_walk, stm_moments, ParamSequence,
    SamplePath, StepDistribution, StmSampler, StmSpec,
};
pub use summation::{pairwise_sum, NeumaierSum};

pub type TaylorMeasureF64 = TaylorMeasure<f64>;
pub type TaylorMeasureF32 = TaylorMeasure<f32>;
pub type CoefficientSequenceF64 = CoefficientSequence<f64>;
pub type MeasureValueF64 = MeasureValue<f64>;
pub type PowerSeriesPmfF64 = PowerSeriesPmf<f64>;
pub type AnalyticRepF64 = AnalyticRep<f64>;
