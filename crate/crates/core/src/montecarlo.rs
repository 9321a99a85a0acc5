//! Samplers for power-series pmfs and Monte Carlo estimators of Taylor measures.
//!
//! Every random quantity is a pure function of an [`RngSpec`]. Draws are produced
//! in fixed-size chunks, chunk `c` using ChaCha stream `c` of the `RngSpec` key, so
//! the output does not depend on how many worker threads run the chunks.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{CoefficientSequence, GrowthCertificate};
use crate::natset::NatSet;
use crate::probability::{normalizer, PowerSeriesPmf};
use crate::summation::NeumaierSum;

/// Draws per chunk; one ChaCha stream per chunk.
pub const CHUNK: usize = 4096;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed plus substream identifier; together they fix every draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        RngSpec { seed, stream: 0 }
    }

    /// Child spec for an independent sub-computation.
    pub fn substream(&self, k: u64) -> Self {
        let mut s = self.stream ^ k.wrapping_mul(0xD1B5_4A32_D192_ED03);
        RngSpec { seed: self.seed, stream: splitmix64(&mut s) ^ k }
    }

    /// Generator for chunk `chunk` of this spec.
    pub fn generator(&self, chunk: u64) -> ChaCha8Rng {
        let mut state = self.seed ^ self.stream.rotate_left(32).wrapping_mul(0x2545_F491_4F6C_DD1D);
        let mut key = [0u8; 32];
        for word in key.chunks_exact_mut(8) {
            word.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(chunk);
        rng
    }
}

/// Run `f(chunk, len)` for every chunk covering `total` items and concatenate in order.
pub(crate) fn chunked<T, F>(total: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, usize) -> Result<Vec<T>> + Sync + Send,
{
    let chunks = total.div_ceil(CHUNK);
    let len = |c: usize| CHUNK.min(total - c * CHUNK);
    let parts: Vec<Result<Vec<T>>> = if threads == 1 || chunks <= 1 {
        (0..chunks).map(|c| f(c as u64, len(c))).collect()
    } else {
        in_pool(threads, || (0..chunks).into_par_iter().map(|c| f(c as u64, len(c))).collect())?
    };
    let mut out = Vec::with_capacity(total);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Run `op` on a pool of `threads` workers (`0` = rayon default).
pub(crate) fn in_pool<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(op))
}

/// `f(rng.substream(r))` for `r = 0..reps`, in order, parallel across replications.
pub fn replicate<T, F>(rng: RngSpec, reps: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(RngSpec) -> Result<T> + Sync + Send,
{
    let run = |r: usize| f(rng.substream(r as u64));
    let out: Vec<Result<T>> = if threads == 1 {
        (0..reps).map(run).collect()
    } else {
        in_pool(threads, || (0..reps).into_par_iter().map(run).collect())?
    };
    out.into_iter().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplerStrategy {
    /// Inverse CDF when the normalizer can be certified, else rejection.
    #[default]
    Auto,
    InverseCdf,
    Rejection,
}

/// Sampler for `f(n | ζ, b)`.
#[derive(Clone, Debug)]
pub enum PowerSeriesSampler {
    InverseCdf(PowerSeriesPmf<f64>),
    /// Poisson(ζ) proposals accepted with probability `b_n / M`.
    Rejection {
        zeta: f64,
        b: CoefficientSequence<f64>,
        bound: f64,
    },
}

/// Draws plus the number of proposals that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleDraws {
    pub draws: Vec<u64>,
    pub proposals: u64,
}

impl SampleDraws {
    pub fn acceptance_rate(&self) -> f64 {
        self.draws.len() as f64 / self.proposals as f64
    }
}

const MAX_PROPOSALS_PER_DRAW: u64 = 10_000_000;

impl PowerSeriesSampler {
    pub fn new(zeta: f64, b: &CoefficientSequence<f64>, strategy: SamplerStrategy) -> Result<Self> {
        let rejection = || -> Result<Self> {
            match *b.certificate() {
                GrowthCertificate::Bounded(m) if m > 0.0 => {
                    if !(zeta >= 0.0) || !zeta.is_finite() {
                        return Err(Error::InvalidParameter(format!(
                            "zeta must be finite and non-negative, got {zeta}"
                        )));
                    }
                    if zeta == 0.0 && !(b.coefficient(0) > 0.0) {
                        return Err(Error::DegenerateDistribution("b_0 = 0 with zeta = 0".into()));
                    }
                    Ok(PowerSeriesSampler::Rejection { zeta, b: b.clone(), bound: m })
                }
                other => Err(Error::NoSamplerAvailable(format!(
                    "rejection needs a Bounded certificate on b, found {other:?}"
                ))),
            }
        };
        match strategy {
            SamplerStrategy::Rejection => rejection(),
            SamplerStrategy::InverseCdf | SamplerStrategy::Auto => match PowerSeriesPmf::new(zeta, b.clone()) {
                Ok(p) => Ok(PowerSeriesSampler::InverseCdf(p)),
                Err(e @ (Error::DivergenceUnknown(_) | Error::TruncationLimit { .. })) => {
                    if strategy == SamplerStrategy::Auto {
                        rejection().map_err(|r| Error::NoSamplerAvailable(format!("{e}; {r}")))
                    } else {
                        Err(Error::NoSamplerAvailable(e.to_string()))
                    }
                }
                Err(e) => Err(e),
            },
        }
    }

    pub fn strategy(&self) -> SamplerStrategy {
        match self {
            PowerSeriesSampler::InverseCdf(_) => SamplerStrategy::InverseCdf,
            PowerSeriesSampler::Rejection { .. } => SamplerStrategy::Rejection,
        }
    }

    /// `len` iid draws from `rng`'s chunk stream, plus proposal count.
    fn sample_chunk(&self, rng: &mut ChaCha8Rng, len: usize) -> Result<(Vec<u64>, u64)> {
        match self {
            PowerSeriesSampler::InverseCdf(p) => {
                let cdf = p.cdf_table();
                let last = cdf.len() - 1;
                let draws = (0..len)
                    .map(|_| {
                        let u: f64 = rng.random();
                        cdf.partition_point(|&c| c <= u).min(last) as u64
                    })
                    .collect();
                Ok((draws, len as u64))
            }
            PowerSeriesSampler::Rejection { zeta, b, bound } => {
                let poisson = if *zeta > 0.0 {
                    Some(Poisson::new(*zeta).map_err(|e| Error::InvalidParameter(e.to_string()))?)
                } else {
                    None
                };
                let mut draws = Vec::with_capacity(len);
                let mut proposals = 0u64;
                for _ in 0..len {
                    let mut tries = 0u64;
                    loop {
                        tries += 1;
                        if tries > MAX_PROPOSALS_PER_DRAW {
                            return Err(Error::NoSamplerAvailable(format!(
                                "rejection acceptance below 1 in {MAX_PROPOSALS_PER_DRAW}"
                            )));
                        }
                        let n = poisson.as_ref().map_or(0, |d| d.sample(rng) as u64);
                        let bn = b.coefficient(n);
                        if !(bn >= 0.0) {
                            return Err(Error::InvalidPmf(format!("b_{n} = {bn} is negative")));
                        }
                        let u: f64 = rng.random();
                        if u * bound < bn {
                            draws.push(n);
                            break;
                        }
                    }
                    proposals += tries;
                }
                Ok((draws, proposals))
            }
        }
    }

    /// `l` iid draws; bit-identical for a given `(rng, l)` whatever `threads` is.
    pub fn sample(&self, rng: RngSpec, l: usize, threads: usize) -> Result<SampleDraws> {
        let per_chunk = chunked(l, threads, |c, len| {
            let mut g = rng.generator(c);
            let (d, p) = self.sample_chunk(&mut g, len)?;
            Ok(vec![(d, p)])
        })?;
        let mut draws = Vec::with_capacity(l);
        let mut proposals = 0;
        for (d, p) in per_chunk {
            draws.extend(d);
            proposals += p;
        }
        Ok(SampleDraws { draws, proposals })
    }
}

/// `l` iid draws from `p` by inverse CDF.
pub fn sample_pmf(p: &PowerSeriesPmf<f64>, rng: RngSpec, l: usize, threads: usize) -> Result<Vec<u64>> {
    if l == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    Ok(PowerSeriesSampler::InverseCdf(p.clone()).sample(rng, l, threads)?.draws)
}

/// `l` iid draws from `f(n | ζ, b)` with an explicit strategy.
pub fn sample_power_series(
    zeta: f64,
    b: &CoefficientSequence<f64>,
    strategy: SamplerStrategy,
    rng: RngSpec,
    l: usize,
    threads: usize,
) -> Result<SampleDraws> {
    if l == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    PowerSeriesSampler::new(zeta, b, strategy)?.sample(rng, l, threads)
}

/// Point estimate with its standard error and a named breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub point: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub components: BTreeMap<String, f64>,
}

/// Mean and standard error (`sd / √n`, sample sd with `n − 1`).
fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().copied().collect::<NeumaierSum<f64>>().value() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).collect::<NeumaierSum<f64>>().value();
    let var = if values.len() > 1 { ss / (n - 1.0) } else { f64::INFINITY };
    (mean, (var / n).sqrt())
}

/// `(e^ζ / L) Σ b_{n_i}` with `n_i ~ Poisson(ζ)`.
pub fn estimate_normalizer_poisson(
    zeta: f64,
    b: &CoefficientSequence<f64>,
    l: usize,
    rng: RngSpec,
    threads: usize,
) -> Result<McEstimate> {
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(Error::InvalidParameter(format!("zeta must be positive, got {zeta}")));
    }
    if l < 2 {
        return Err(Error::InvalidParameter("at least two samples are needed".into()));
    }
    let poisson = Poisson::new(zeta).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let draws = chunked(l, threads, |c, len| {
        let mut g = rng.generator(c);
        Ok((0..len).map(|_| poisson.sample(&mut g) as u64).collect())
    })?;
    let max = draws.iter().copied().max().unwrap_or(0);
    let table: Vec<f64> = (0..=max).map(|n| b.coefficient(n)).collect();
    let values: Vec<f64> = draws.iter().map(|&n| table[n as usize]).collect();
    let (mean, se) = mean_stderr(&values);
    let scale = zeta.exp();
    let mut components = BTreeMap::new();
    components.insert("mean_b".into(), mean);
    components.insert("exp_zeta".into(), scale);
    Ok(McEstimate { point: scale * mean, stderr: scale * se, n_samples: l as u64, components })
}

/// How the two normalizing masses enter [`estimate_measure`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizerMode {
    /// Deterministic value within `eps`.
    Exact { eps: f64 },
    /// Poisson-weighted Monte Carlo on separate substreams.
    Estimated,
}

impl Default for NormalizerMode {
    fn default() -> Self {
        NormalizerMode::Exact { eps: 1e-14 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EstimateOptions {
    pub normalizers: NormalizerMode,
    pub strategy: SamplerStrategy,
    pub threads: usize,
}

/// `T(B) ≈ T⁺(ℕ)·(1/L1) Σ I(n_{1i} ∈ B) − T⁻(ℕ)·(1/L2) Σ I(n_{2j} ∈ B)` for the
/// measure with densities `(ζ1, b1)` and `(ζ2, b2)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_measure(
    zeta1: f64,
    b1: &CoefficientSequence<f64>,
    zeta2: f64,
    b2: &CoefficientSequence<f64>,
    set: &NatSet,
    l1: usize,
    l2: usize,
    rng: RngSpec,
    options: EstimateOptions,
) -> Result<McEstimate> {
    if l1 < 2 || l2 < 2 {
        return Err(Error::InvalidParameter("L1 and L2 must both be at least 2".into()));
    }
    let threads = options.threads;
    let side = |zeta: f64, b: &CoefficientSequence<f64>, l: usize, k: u64| -> Result<(f64, f64, f64, f64)> {
        let sampler = PowerSeriesSampler::new(zeta, b, options.strategy)?;
        let draws = sampler.sample(rng.substream(k), l, threads)?.draws;
        let hits = draws.iter().filter(|&&n| set.contains(n)).count() as f64;
        let p = hits / l as f64;
        let var_p = p * (1.0 - p) / (l as f64 - 1.0);
        let (mass, var_mass) = match options.normalizers {
            NormalizerMode::Exact { eps } => (normalizer(zeta, b, eps)?.value, 0.0),
            NormalizerMode::Estimated => {
                let est = estimate_normalizer_poisson(zeta, b, l, rng.substream(k + 2), threads)?;
                (est.point, est.stderr * est.stderr)
            }
        };
        Ok((p, var_p, mass, var_mass))
    };
    let (p1, vp1, m1, vm1) = side(zeta1, b1, l1, 1)?;
    let (p2, vp2, m2, vm2) = side(zeta2, b2, l2, 2)?;
    // Var(XY) = μx² Vy + μy² Vx + Vx Vy for independent X, Y
    let var1 = m1 * m1 * vp1 + p1 * p1 * vm1 + vp1 * vm1;
    let var2 = m2 * m2 * vp2 + p2 * p2 * vm2 + vp2 * vm2;
    let mut components = BTreeMap::new();
    for (k, v) in [
        ("mass_pos", m1),
        ("mass_neg", m2),
        ("prob_pos", p1),
        ("prob_neg", p2),
        ("stderr_prob_pos", vp1.sqrt()),
        ("stderr_prob_neg", vp2.sqrt()),
        ("stderr_mass_pos", vm1.sqrt()),
        ("stderr_mass_neg", vm2.sqrt()),
    ] {
        components.insert(k.to_string(), v);
    }
    Ok(McEstimate { point: m1 * p1 - m2 * p2, stderr: (var1 + var2).sqrt(), n_samples: (l1 + l2) as u64, components })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn ones() -> CoefficientSequence<f64> {
        CoefficientSequence::constant(1.0)
    }

    fn even() -> CoefficientSequence<f64> {
        CoefficientSequence::custom(|n| if n % 2 == 0 { 1.0 } else { 0.0 }, GrowthCertificate::Bounded(1.0))
    }

    #[test]
    fn poisson_mean() {
        let p = PowerSeriesPmf::new(1.0, ones()).unwrap();
        let d = sample_pmf(&p, RngSpec::new(11), 100_000, 0).unwrap();
        let mean = d.iter().sum::<u64>() as f64 / d.len() as f64;
        assert!((mean - 1.0).abs() < 3.0 * (1.0f64 / 1e5).sqrt(), "{mean}");
    }

    #[test]
    fn point_mass() {
        let b = CoefficientSequence::finite(vec![3.0, 1.0]).unwrap();
        let p = PowerSeriesPmf::new(0.0, b.clone()).unwrap();
        assert!(sample_pmf(&p, RngSpec::new(1), 500, 1).unwrap().iter().all(|&n| n == 0));
        let b = CoefficientSequence::constant(2.0);
        let r = sample_power_series(0.0, &b, SamplerStrategy::Rejection, RngSpec::new(1), 50, 1).unwrap();
        assert!(r.draws.iter().all(|&n| n == 0));
    }

    #[test]
    fn rejection_even_support() {
        let r = sample_power_series(1.0, &even(), SamplerStrategy::Rejection, RngSpec::new(5), 100_000, 0).unwrap();
        assert!(r.draws.iter().all(|n| n % 2 == 0));
        let expected = 1f64.cosh() / E;
        let se = (expected * (1.0 - expected) / r.proposals as f64).sqrt();
        assert!((r.acceptance_rate() - expected).abs() < 4.0 * se, "{}", r.acceptance_rate());
    }

    #[test]
    fn rejection_needs_bounded_certificate() {
        let b = CoefficientSequence::custom(|n| n as f64, GrowthCertificate::geometric(1.0, 2.0));
        let e = sample_power_series(1.0, &b, SamplerStrategy::Rejection, RngSpec::new(0), 10, 1).unwrap_err();
        assert_eq!(e.kind(), "NoSamplerAvailable");
        let unv = CoefficientSequence::custom(|n| n as f64, GrowthCertificate::Unverified);
        let e = sample_power_series(1.0, &unv, SamplerStrategy::Auto, RngSpec::new(0), 10, 1).unwrap_err();
        assert_eq!(e.kind(), "NoSamplerAvailable");
    }

    #[test]
    fn draws_do_not_depend_on_threads() {
        let p = PowerSeriesPmf::new(2.5, ones()).unwrap();
        let rng = RngSpec { seed: 99, stream: 3 };
        let a = sample_pmf(&p, rng, 3 * CHUNK + 17, 1).unwrap();
        let b = sample_pmf(&p, rng, 3 * CHUNK + 17, 4).unwrap();
        assert_eq!(a, b);
        let r1 = sample_power_series(1.0, &even(), SamplerStrategy::Rejection, rng, 2 * CHUNK + 1, 1).unwrap();
        let r3 = sample_power_series(1.0, &even(), SamplerStrategy::Rejection, rng, 2 * CHUNK + 1, 3).unwrap();
        assert_eq!(r1, r3);
    }

    #[test]
    fn substreams_differ() {
        let p = PowerSeriesPmf::new(2.5, ones()).unwrap();
        let rng = RngSpec::new(1);
        assert_ne!(sample_pmf(&p, rng.substream(1), 64, 1).unwrap(), sample_pmf(&p, rng.substream(2), 64, 1).unwrap());
        assert_ne!(rng.substream(1), rng.substream(2));
    }

    #[test]
    fn samplers_agree_in_distribution() {
        // two-sample chi-square on Poisson(1), bins 0..=5 and ≥ 6; seeds 0 and 1
        let n = 100_000;
        let inv = sample_power_series(1.0, &ones(), SamplerStrategy::InverseCdf, RngSpec::new(0), n, 0).unwrap();
        let rej = sample_power_series(1.0, &ones(), SamplerStrategy::Rejection, RngSpec::new(1), n, 0).unwrap();
        let bins = |d: &[u64]| {
            let mut c = [0f64; 7];
            for &x in d {
                c[(x as usize).min(6)] += 1.0;
            }
            c
        };
        let (a, b) = (bins(&inv.draws), bins(&rej.draws));
        let stat: f64 = a.iter().zip(&b).filter(|(x, y)| **x + **y > 0.0).map(|(x, y)| (x - y).powi(2) / (x + y)).sum();
        // 0.999 quantile of chi-square with 6 degrees of freedom
        assert!(stat < 22.458, "{stat}");
    }

    #[test]
    fn normalizer_estimates() {
        let e = estimate_normalizer_poisson(1.0, &ones(), 10_000, RngSpec::new(3), 0).unwrap();
        assert_eq!((e.point, e.stderr), (E, 0.0));

        let id = CoefficientSequence::custom(|n| n as f64, GrowthCertificate::geometric(1.0, 2.0));
        let e = estimate_normalizer_poisson(2.0, &id, 1_000_000, RngSpec::new(4), 0).unwrap();
        assert!((e.point - 2.0 * E * E).abs() < 3.0 * e.stderr, "{e:?}");

        let e = estimate_normalizer_poisson(1.0, &even(), 1_000_000, RngSpec::new(5), 0).unwrap();
        assert!((e.point - 1f64.cosh()).abs() < 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn measure_estimates() {
        let set = NatSet::prefix(2);
        let opts = EstimateOptions::default();
        let e = estimate_measure(2.0, &ones(), 1.0, &ones(), &set, 100_000, 100_000, RngSpec::new(8), opts).unwrap();
        assert!((e.point - 2.5).abs() < 3.0 * e.stderr, "{e:?}");

        let e = estimate_measure(1.5, &ones(), 1.5, &ones(), &set, 50_000, 50_000, RngSpec::new(9), opts).unwrap();
        assert!(e.point.abs() < 3.0 * e.stderr, "{e:?}");

        let est = EstimateOptions { normalizers: NormalizerMode::Estimated, ..opts };
        let e = estimate_measure(2.0, &ones(), 1.0, &ones(), &NatSet::All, 100_000, 100_000, RngSpec::new(10), est)
            .unwrap();
        // indicators are all 1 and b ≡ 1 makes each normalizer sample constant
        assert_eq!((e.components["prob_pos"], e.components["prob_neg"]), (1.0, 1.0));
        assert_eq!(e.stderr, 0.0);
        assert!((e.point - (E * E - E)).abs() <= 4.0 * f64::EPSILON * e.point, "{e:?}");

        let id = CoefficientSequence::custom(|n| n as f64, GrowthCertificate::geometric(1.0, 2.0));
        let e =
            estimate_measure(2.0, &id, 1.0, &ones(), &NatSet::All, 100_000, 100_000, RngSpec::new(11), est).unwrap();
        assert!(e.stderr > 0.0);
        assert!((e.point - (2.0 * E * E - E)).abs() < 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn coverage_calibration() {
        let set = NatSet::prefix(2);
        let exact = 2.5;
        let opts = EstimateOptions { threads: 1, ..Default::default() };
        let reps = replicate(RngSpec::new(777), 200, 0, |rng| {
            estimate_measure(2.0, &ones(), 1.0, &ones(), &set, 10_000, 10_000, rng, opts)
        })
        .unwrap();
        let covered = reps.iter().filter(|e| (e.point - exact).abs() <= 3.0 * e.stderr).count();
        assert!(covered >= 193, "{covered}");
    }
}
