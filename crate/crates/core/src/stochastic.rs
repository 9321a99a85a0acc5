//! Stochastic Taylor measures `X(ω)(B) = Σ_{n∈B} a_n(ω) γ(ω)^n / n!`.
//!
//! Randomness is declared with [`StmSpec`]; realizations come from [`StmSampler`]
//! (or [`sample_stm`]) and paths from the random-walk, AR(1) and Brownian
//! simulators. Every realization is summed with split positive/negative
//! compensated sums, the same way [`TaylorMeasure::evaluate`] sums finite sets.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{plan_truncation, CoefficientSequence, GrowthCertificate, PartSums, TailModel, TruncationPlan};
use crate::measure::TaylorMeasure;
use crate::montecarlo::{chunked, RngSpec};
use crate::natset::NatSet;
use crate::summation::NeumaierSum;

/// Gaussian coefficient envelope width, in standard deviations.
pub const GAUSSIAN_ENVELOPE_SIGMAS: f64 = 6.0;

/// A real sequence given by a finite prefix followed by a constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSequence {
    pub prefix: Vec<f64>,
    #[serde(default)]
    pub tail: f64,
}

impl ParamSequence {
    pub fn new(prefix: Vec<f64>, tail: f64) -> Self {
        ParamSequence { prefix, tail }
    }

    pub fn constant(c: f64) -> Self {
        ParamSequence { prefix: Vec::new(), tail: c }
    }

    pub fn get(&self, n: u64) -> f64 {
        usize::try_from(n).ok().and_then(|i| self.prefix.get(i)).copied().unwrap_or(self.tail)
    }

    pub fn sup_abs(&self) -> f64 {
        self.prefix.iter().fold(self.tail.abs(), |m, x| m.max(x.abs()))
    }

    fn all(&self, pred: impl Fn(f64) -> bool) -> bool {
        self.prefix.iter().all(|&x| pred(x)) && pred(self.tail)
    }

    fn coefficients(&self) -> CoefficientSequence<f64> {
        let tail = if self.tail == 0.0 { TailModel::Zero } else { TailModel::Constant(self.tail) };
        CoefficientSequence::explicit(self.prefix.clone(), tail).expect("finite parameters give a valid sequence")
    }
}

/// Random-walk step law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum StepDistribution {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// `high` with probability `p`, else `low`.
    ShiftedBernoulli {
        p: f64,
        low: f64,
        high: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
}

impl StepDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            StepDistribution::Normal { mean, .. } => mean,
            StepDistribution::ShiftedBernoulli { p, low, high } => low + p * (high - low),
            StepDistribution::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            StepDistribution::Normal { sd, .. } => sd * sd,
            StepDistribution::ShiftedBernoulli { p, low, high } => p * (1.0 - p) * (high - low) * (high - low),
            StepDistribution::Uniform { low, high } => (high - low) * (high - low) / 12.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepDistribution::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
            StepDistribution::ShiftedBernoulli { p, low, high } => {
                (0.0..=1.0).contains(&p) && low.is_finite() && high.is_finite()
            }
            StepDistribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid step distribution {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            StepDistribution::Normal { mean, sd } => mean + sd * standard_normal(rng),
            StepDistribution::ShiftedBernoulli { p, low, high } => {
                if rng.random::<f64>() < p {
                    high
                } else {
                    low
                }
            }
            StepDistribution::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

/// Declarative randomness over `(γ, a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StmSpec {
    /// `a_n ~ N(μ_a, σ_a²)` iid, fixed `γ`.
    GaussianIid { mu_a: f64, sigma_a: f64, gamma: f64 },
    /// `a_n ~ N(μ_n, σ_n²)` independent, fixed `γ`.
    GaussianIndep { mu: ParamSequence, sigma: ParamSequence, gamma: f64 },
    /// `γ = I_A` with `P(A) = p_a`, coefficients as in `GaussianIndep`.
    IndicatorGamma { p_a: f64, mu: ParamSequence, sigma: ParamSequence },
    /// `Σ c_n I_{A_n}` over a partition with `P(A_n) = probs[n]`.
    SimpleFunction { c: Vec<f64>, probs: Vec<f64> },
    /// `a_n = n! X_n`, `γ = 1`, `X_n` iid steps, `n = 1..=t`.
    RandomWalk { step: StepDistribution, t: u64 },
    /// `Y_t = φ Y_{t-1} + ε_t`, `ε ~ N(0, σ²)`, as `a_n = n! ε_{t-n}`, `γ = φ`.
    Ar1 { phi: f64, sigma2: f64, t: u64 },
    /// `X_{k/n} = (S_k − kμ) / (σ√n)` with `N(μ, σ²)` steps.
    BrownianApprox { n: u64, mu: f64, sigma: f64 },
}

impl StmSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            StmSpec::GaussianIid { mu_a, sigma_a, gamma } => {
                if !(mu_a.is_finite() && gamma.is_finite() && sigma_a.is_finite() && *sigma_a >= 0.0) {
                    return bad(format!("GaussianIid needs finite mu_a, gamma and sigma_a ≥ 0, got {self:?}"));
                }
            }
            StmSpec::GaussianIndep { mu, sigma, gamma } => {
                if !gamma.is_finite() {
                    return bad(format!("gamma must be finite, got {gamma}"));
                }
                check_gaussian_sequences(mu, sigma)?;
            }
            StmSpec::IndicatorGamma { p_a, mu, sigma } => {
                if !(0.0..=1.0).contains(p_a) {
                    return bad(format!("p_a must lie in [0, 1], got {p_a}"));
                }
                check_gaussian_sequences(mu, sigma)?;
            }
            StmSpec::SimpleFunction { c, probs } => {
                if c.is_empty() || c.len() != probs.len() {
                    return bad("SimpleFunction needs equally long, non-empty c and probs".into());
                }
                if c.iter().any(|x| !x.is_finite()) || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return bad("SimpleFunction values must be finite and probabilities in [0, 1]".into());
                }
                let total = probs.iter().copied().collect::<NeumaierSum<f64>>().value();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("SimpleFunction probabilities sum to {total}, not 1"));
                }
            }
            StmSpec::RandomWalk { step, .. } => step.validate()?,
            StmSpec::Ar1 { phi, sigma2, .. } => {
                if !(0.0..=1.0).contains(phi) || !(sigma2.is_finite() && *sigma2 > 0.0) {
                    return bad(format!("Ar1 needs phi in [0, 1] and sigma2 > 0, got {self:?}"));
                }
            }
            StmSpec::BrownianApprox { n, mu, sigma } => {
                if *n == 0 || !mu.is_finite() || !(sigma.is_finite() && *sigma > 0.0) {
                    return bad(format!("BrownianApprox needs n ≥ 1, finite mu and sigma > 0, got {self:?}"));
                }
            }
        }
        Ok(())
    }

    /// `(sup |μ_n|, sup σ_n, γ)` for the Gaussian-coefficient variants.
    fn gaussian_bounds(&self) -> Option<(f64, f64, f64)> {
        match self {
            StmSpec::GaussianIid { mu_a, sigma_a, gamma } => Some((mu_a.abs(), *sigma_a, *gamma)),
            StmSpec::GaussianIndep { mu, sigma, gamma } => Some((mu.sup_abs(), sigma.sup_abs(), *gamma)),
            StmSpec::IndicatorGamma { mu, sigma, .. } => Some((mu.sup_abs(), sigma.sup_abs(), 1.0)),
            _ => None,
        }
    }
}

fn check_gaussian_sequences(mu: &ParamSequence, sigma: &ParamSequence) -> Result<()> {
    if mu.all(f64::is_finite) && sigma.all(|s| s.is_finite() && s >= 0.0) {
        Ok(())
    } else {
        Err(Error::InvalidParameter("mu must be finite and sigma finite and non-negative".into()))
    }
}

/// Truncation for infinite `B` under the Gaussian variants: omitted terms are
/// bounded through `|a_n| ≤ sup|μ_n| + 6 sup σ_n`.
pub fn gaussian_truncation(spec: &StmSpec, eps: f64) -> Result<TruncationPlan<f64>> {
    spec.validate()?;
    let (mu, sigma, gamma) = spec
        .gaussian_bounds()
        .ok_or_else(|| Error::UnsupportedSpec("only Gaussian-coefficient specs need a truncation plan".into()))?;
    let bound = mu + GAUSSIAN_ENVELOPE_SIGMAS * sigma;
    plan_truncation(&GrowthCertificate::Bounded(bound), gamma, eps)
}

/// A path (or value sequence) with the `StmSpec` that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub times_or_indices: Vec<f64>,
    pub values: Vec<f64>,
    pub rng: RngSpec,
}

impl SamplePath {
    /// Piecewise-linear interpolation; clamps outside the recorded range.
    pub fn interpolate(&self, x: f64) -> f64 {
        let t = &self.times_or_indices;
        let k = t.partition_point(|&s| s <= x);
        if k == 0 {
            return self.values[0];
        }
        if k == t.len() {
            return self.values[t.len() - 1];
        }
        let (t0, t1) = (t[k - 1], t[k]);
        let w = (x - t0) / (t1 - t0);
        self.values[k - 1] + w * (self.values[k] - self.values[k - 1])
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("paths are never empty")
    }
}

#[derive(Clone, Debug)]
enum Plan {
    /// `a_n ~ N(μ_n, σ_n²)` at the listed `(n, γ^n/n!)`, optionally gated by `I_A`.
    Gaussian {
        terms: Vec<(f64, f64, f64)>,
        gate: Option<f64>,
    },
    Simple {
        c: Vec<f64>,
        cdf: Vec<f64>,
    },
    Walk {
        step: StepDistribution,
        t: u64,
        members: Vec<u64>,
    },
    Ar1 {
        sd: f64,
        t: u64,
        weights: Vec<(u64, f64)>,
    },
    Brownian {
        n: u64,
        mu: f64,
        sigma: f64,
        members: Vec<u64>,
    },
}

/// Precomputed sampler for `X(·)(B)`.
#[derive(Clone, Debug)]
pub struct StmSampler {
    plan: Plan,
}

fn power_weights(gamma: f64, indices: &[u64]) -> Vec<f64> {
    let seq = CoefficientSequence::constant(1.0);
    indices.iter().map(|&n| crate::kernel::term(&seq, gamma, n).value()).collect()
}

impl StmSampler {
    /// `truncation`, when given, drops every index above its `last_index`; it
    /// is required for infinite `B` under the Gaussian variants.
    pub fn new(spec: &StmSpec, set: &NatSet, truncation: Option<&TruncationPlan<f64>>) -> Result<Self> {
        spec.validate()?;
        let bounded_members = |limit: u64| -> Vec<u64> {
            let last = truncation.map_or(limit, |p| p.last_index.min(limit));
            set.members_up_to(last).collect()
        };
        let plan = match spec {
            StmSpec::GaussianIid { .. } | StmSpec::GaussianIndep { .. } | StmSpec::IndicatorGamma { .. } => {
                let indices: Vec<u64> = match (set, truncation) {
                    (_, Some(p)) => set.members_up_to(p.last_index).collect(),
                    (NatSet::Finite(v), None) => v.clone(),
                    (_, None) => return Err(Error::DivergenceUnknown(
                        "realized Gaussian coefficients carry no certificate; pass a truncation plan for infinite B"
                            .into(),
                    )),
                };
                let (mu, sigma, gamma, gate) = match spec {
                    StmSpec::GaussianIid { mu_a, sigma_a, gamma } => {
                        (ParamSequence::constant(*mu_a), ParamSequence::constant(*sigma_a), *gamma, None)
                    }
                    StmSpec::GaussianIndep { mu, sigma, gamma } => (mu.clone(), sigma.clone(), *gamma, None),
                    StmSpec::IndicatorGamma { p_a, mu, sigma } => (mu.clone(), sigma.clone(), 1.0, Some(*p_a)),
                    _ => unreachable!(),
                };
                let w = power_weights(gamma, &indices);
                let terms = indices.iter().zip(w).map(|(&n, w)| (mu.get(n), sigma.get(n), w)).collect();
                Plan::Gaussian { terms, gate }
            }
            StmSpec::SimpleFunction { c, probs } => {
                let mut acc = NeumaierSum::new();
                let cdf = probs
                    .iter()
                    .map(|&p| {
                        acc.add(p);
                        acc.value()
                    })
                    .collect();
                Plan::Simple { c: c.clone(), cdf }
            }
            StmSpec::RandomWalk { step, t } => Plan::Walk {
                step: *step,
                t: *t,
                members: bounded_members(*t).into_iter().filter(|&n| n >= 1).collect(),
            },
            StmSpec::Ar1 { phi, sigma2, t } => {
                let idx: Vec<u64> = if *t == 0 { Vec::new() } else { bounded_members(t - 1) };
                let weights = idx.into_iter().map(|n| (n, phi.powi(n as i32))).collect();
                Plan::Ar1 { sd: sigma2.sqrt(), t: *t, weights }
            }
            StmSpec::BrownianApprox { n, mu, sigma } => Plan::Brownian {
                n: *n,
                mu: *mu,
                sigma: *sigma,
                members: bounded_members(*n).into_iter().filter(|&k| k >= 1).collect(),
            },
        };
        Ok(StmSampler { plan })
    }

    /// One realization, consuming draws from `rng`.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let mut sums = PartSums::new();
        match &self.plan {
            Plan::Gaussian { terms, gate } => {
                if let Some(p) = gate {
                    if rng.random::<f64>() >= *p {
                        return 0.0;
                    }
                }
                for &(mu, sigma, w) in terms {
                    sums.push((mu + sigma * standard_normal(rng)) * w);
                }
            }
            Plan::Simple { c, cdf } => {
                let u: f64 = rng.random();
                let k = cdf.partition_point(|&x| x <= u).min(c.len() - 1);
                return c[k];
            }
            Plan::Walk { step, t, members } => {
                let x: Vec<f64> = (0..*t).map(|_| step.sample(rng)).collect();
                for &n in members {
                    sums.push(x[n as usize - 1]);
                }
            }
            Plan::Ar1 { sd, t, weights } => {
                // ε_1..ε_t in time order; index n carries ε_{t-n}
                let eps: Vec<f64> = (0..*t).map(|_| sd * standard_normal(rng)).collect();
                for &(n, w) in weights {
                    sums.push(w * eps[(*t - 1 - n) as usize]);
                }
            }
            Plan::Brownian { n, mu, sigma, members } => {
                let steps: Vec<f64> = (0..*n).map(|_| mu + sigma * standard_normal(rng)).collect();
                let scale = sigma * (*n as f64).sqrt();
                for &k in members {
                    sums.push((steps[k as usize - 1] - mu) / scale);
                }
            }
        }
        sums.signed()
    }

    /// `reps` independent realizations, identical for any `threads`.
    pub fn replicate(&self, rng: RngSpec, reps: usize, threads: usize) -> Result<Vec<f64>> {
        chunked(reps, threads, |c, len| {
            let mut g = rng.generator(c);
            Ok((0..len).map(|_| self.draw(&mut g)).collect())
        })
    }
}

/// One realization of `X(ω)(B)`.
pub fn sample_stm(spec: &StmSpec, set: &NatSet, truncation: Option<&TruncationPlan<f64>>, rng: RngSpec) -> Result<f64> {
    Ok(StmSampler::new(spec, set, truncation)?.draw(&mut rng.generator(0)))
}

/// `Σ_{n∈B} (σ_n γ^n / n!)²`; the omitted squares are below `eps` once the
/// absolute tail is below `√eps`.
fn sum_of_squared_terms(s: &TaylorMeasure<f64>, set: &NatSet, eps: f64) -> Result<f64> {
    let last = match set {
        NatSet::Finite(v) => v.last().copied().unwrap_or(0),
        _ => plan_truncation(s.certificate(), s.gamma(), eps.sqrt())?.last_index,
    };
    let mut acc = NeumaierSum::new();
    for n in set.members_up_to(last) {
        let t = s.term(n).value();
        acc.add(t * t);
    }
    Ok(acc.value())
}

/// Closed-form `(E X(B), Var X(B))`; infinite sums are evaluated within `eps`.
pub fn stm_moments(spec: &StmSpec, set: &NatSet, eps: f64) -> Result<(f64, f64)> {
    spec.validate()?;
    let mean_var = |mu: &ParamSequence, sigma: &ParamSequence, gamma: f64| -> Result<(f64, f64)> {
        let m = TaylorMeasure::new(mu.coefficients(), gamma)?.evaluate(set, eps)?.value;
        Ok((m, sum_of_squared_terms(&TaylorMeasure::new(sigma.coefficients(), gamma)?, set, eps)?))
    };
    match spec {
        StmSpec::GaussianIid { mu_a, sigma_a, gamma } => {
            mean_var(&ParamSequence::constant(*mu_a), &ParamSequence::constant(*sigma_a), *gamma)
        }
        StmSpec::GaussianIndep { mu, sigma, gamma } => mean_var(mu, sigma, *gamma),
        StmSpec::IndicatorGamma { p_a, mu, sigma } => {
            // X = I_A Y with A independent of Y: Var X = p Var Y + p(1 − p)(E Y)²
            let (ey, vy) = mean_var(mu, sigma, 1.0)?;
            Ok((p_a * ey, p_a * vy + p_a * (1.0 - p_a) * ey * ey))
        }
        StmSpec::SimpleFunction { c, probs } => {
            let mean = c.iter().zip(probs).map(|(c, p)| c * p).collect::<NeumaierSum<f64>>().value();
            let var =
                c.iter().zip(probs).map(|(c, p)| p * (c - mean) * (c - mean)).collect::<NeumaierSum<f64>>().value();
            Ok((mean, var))
        }
        StmSpec::RandomWalk { step, t } => {
            let k = set.members_up_to(*t).filter(|&n| n >= 1).count() as f64;
            Ok((k * step.mean(), k * step.variance()))
        }
        StmSpec::Ar1 { phi, sigma2, t } => {
            if *t == 0 {
                return Ok((0.0, 0.0));
            }
            let var = set.members_up_to(t - 1).map(|j| phi.powi(2 * j as i32)).collect::<NeumaierSum<f64>>().value();
            Ok((0.0, sigma2 * var))
        }
        StmSpec::BrownianApprox { n, .. } => {
            let k = match set {
                NatSet::All => *n,
                NatSet::Finite(v) if v.iter().enumerate().all(|(i, &x)| x == i as u64) => {
                    v.len().saturating_sub(1) as u64
                }
                _ => {
                    return Err(Error::UnsupportedSpec(
                        "Brownian moments are given per fixed time k/n, i.e. for B = {0, …, k}".into(),
                    ))
                }
            };
            Ok((0.0, k.min(*n) as f64 / *n as f64))
        }
    }
}

fn path_from_steps(steps: impl Iterator<Item = f64>, rng: RngSpec) -> SamplePath {
    let mut sums = PartSums::new();
    let mut values = vec![0.0];
    for x in steps {
        sums.push(x);
        values.push(sums.signed());
    }
    let times_or_indices = (0..values.len()).map(|k| k as f64).collect();
    SamplePath { times_or_indices, values, rng }
}

/// `S_0 = 0`, `S_k = X_1 + … + X_k` for `k ≤ t`. Uses the same draws as
/// [`sample_stm`] on the matching `RandomWalk` spec.
pub fn simulate_random_walk(step: StepDistribution, t: u64, rng: RngSpec) -> Result<SamplePath> {
    step.validate()?;
    let mut g = rng.generator(0);
    let x: Vec<f64> = (0..t).map(|_| step.sample(&mut g)).collect();
    Ok(path_from_steps(x.into_iter(), rng))
}

/// `Y_0 = 0`, `Y_k = φ Y_{k-1} + ε_k`. Uses the same draws as [`sample_stm`]
/// on the matching `Ar1` spec, whose value is `Y_t`.
pub fn simulate_ar1(phi: f64, sigma2: f64, t: u64, rng: RngSpec) -> Result<SamplePath> {
    StmSpec::Ar1 { phi, sigma2, t }.validate()?;
    let mut g = rng.generator(0);
    let sd = sigma2.sqrt();
    let mut values = vec![0.0];
    let mut y = 0.0;
    for _ in 0..t {
        y = phi * y + sd * standard_normal(&mut g);
        values.push(y);
    }
    let times_or_indices = (0..values.len()).map(|k| k as f64).collect();
    Ok(SamplePath { times_or_indices, values, rng })
}

/// `X_{k/n} = (S_k − kμ) / (σ√n)` on the grid `k/n`; use
/// [`SamplePath::interpolate`] between grid points.
pub fn simulate_brownian(n: u64, mu: f64, sigma: f64, rng: RngSpec) -> Result<SamplePath> {
    StmSpec::BrownianApprox { n, mu, sigma }.validate()?;
    let mut g = rng.generator(0);
    let scale = sigma * (n as f64).sqrt();
    let steps: Vec<f64> = (0..n).map(|_| (mu + sigma * standard_normal(&mut g) - mu) / scale).collect();
    let mut path = path_from_steps(steps.into_iter(), rng);
    for t in &mut path.times_or_indices {
        *t /= n as f64;
    }
    Ok(path)
}
