use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde_json::{json, Value};
use taylor_measure::{
    distance, estimate_measure, estimate_normalizer_poisson, gaussian_truncation, hilbert_axiom_report, inner_product,
    norm, normalizer, probability_pair, replicate, simulate_ar1, simulate_brownian, simulate_random_walk, stm_moments,
    Builtin, CoefficientSequence, EstimateOptions, MeasureValue, NatSet, NormalizerMode, PowerSeriesPmf,
    PowerSeriesSampler, RngSpec, SamplerStrategy, StmSampler, StmSpec, TailModel, TaylorMeasure,
};

use crate::docs::{self, MeasureDoc, RepDoc, SetDoc, Source};
use crate::{Cli, CliError, Command, MeasureArgs, Normalizers, PairArgs, Side, Strategy};

pub struct Output {
    pub doc: Value,
    pub table: Option<Table>,
}

/// A CSV table; floats use the shortest round-trip representation.
pub struct Table {
    headers: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[&'static str]) -> Self {
        Table { headers: headers.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let fail = |e: csv::Error| CliError::Input(format!("--csv {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(fail)?;
        w.write_record(&self.headers).map_err(fail)?;
        for r in &self.rows {
            w.write_record(r).map_err(fail)?;
        }
        w.flush().map_err(|e| CliError::Input(format!("--csv {}: {e}", path.display())))
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn mv(v: MeasureValue<f64>) -> Value {
    json!({"value": v.value, "abs_error": v.abs_error})
}

fn done(doc: Value) -> Result<Output, CliError> {
    Ok(Output { doc, table: None })
}

fn strategy(s: Strategy) -> SamplerStrategy {
    match s {
        Strategy::Auto => SamplerStrategy::Auto,
        Strategy::InverseCdf => SamplerStrategy::InverseCdf,
        Strategy::Rejection => SamplerStrategy::Rejection,
    }
}

struct Ctx<'a> {
    src: Source<'a>,
    eps: f64,
    threads: usize,
}

impl Ctx<'_> {
    fn measure(&mut self, what: &str, arg: &str) -> Result<(Value, TaylorMeasure<f64>), CliError> {
        let v = self.src.load(what, arg)?;
        let t = docs::parse::<MeasureDoc>(what, &v)?.measure(what)?;
        Ok((v, t))
    }

    fn density(&mut self, what: &str, arg: &str) -> Result<(Value, f64, CoefficientSequence<f64>), CliError> {
        let v = self.src.load(what, arg)?;
        let (zeta, b) = docs::parse::<MeasureDoc>(what, &v)?.density(what)?;
        Ok((v, zeta, b))
    }

    fn set(&mut self, arg: Option<&String>) -> Result<(Value, NatSet), CliError> {
        let v = match arg {
            Some(a) => self.src.load("set", a)?,
            None => json!({"kind": "all"}),
        };
        let s = docs::parse::<SetDoc>("set", &v)?.set();
        Ok((v, s))
    }

    fn rep(&mut self, what: &str, arg: &str) -> Result<RepDoc, CliError> {
        let v = self.src.load(what, arg)?;
        docs::parse(what, &v)
    }
}

fn interval(v: &[f64]) -> Result<(f64, f64), CliError> {
    match *v {
        [lo, hi] if lo.is_finite() && hi.is_finite() && lo <= hi => Ok((lo, hi)),
        _ => Err(CliError::Input(format!("--interval must be LO,HI with LO ≤ HI, got {v:?}"))),
    }
}

/// Mean, sample variance, and their standard errors.
fn moments(xs: &[f64]) -> Value {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (m2, m4) = xs.iter().fold((0.0, 0.0), |(a, b), x| {
        let d = (x - mean) * (x - mean);
        (a + d, b + d * d)
    });
    let var = m2 / (n - 1.0);
    let (c2, c4) = (m2 / n, m4 / n);
    json!({
        "reps": xs.len(),
        "mean": mean,
        "variance": var,
        "mean_stderr": (var / n).sqrt(),
        "variance_stderr": ((c4 - c2 * c2) / n).max(0.0).sqrt(),
    })
}

fn is_gaussian(spec: &StmSpec) -> bool {
    matches!(spec, StmSpec::GaussianIid { .. } | StmSpec::GaussianIndep { .. } | StmSpec::IndicatorGamma { .. })
}

fn stm_sampler(spec: &StmSpec, set: &NatSet, eps: f64) -> Result<StmSampler, CliError> {
    let plan = if is_gaussian(spec) && !set.is_finite() { Some(gaussian_truncation(spec, eps)?) } else { None };
    Ok(StmSampler::new(spec, set, plan.as_ref())?)
}

fn coefficient_list(rep: &taylor_measure::AnalyticRep<f64>, terms: u64) -> Vec<f64> {
    (0..terms).map(|n| rep.coefficients.coefficient(n)).collect()
}

pub fn execute(cli: &Cli, stdin: &mut dyn Read) -> Result<Output, CliError> {
    if !cli.eps.is_finite() || cli.eps <= 0.0 {
        return Err(CliError::Input(format!("--eps must be positive and finite, got {}", cli.eps)));
    }
    let mut cx = Ctx { src: Source::new(stdin), eps: cli.eps, threads: cli.threads };
    let eps = cx.eps;
    match &cli.command {
        Command::Eval(MeasureArgs { measure, set }) => {
            let (mdoc, t) = cx.measure("measure", measure)?;
            let (sdoc, s) = cx.set(set.as_ref())?;
            let v = t.evaluate(&s, eps)?;
            done(json!({
                "command": "eval", "value": v.value, "abs_error": v.abs_error,
                "inputs": {"measure": mdoc, "set": sdoc, "eps": eps},
            }))
        }
        Command::Decompose { m: MeasureArgs { measure, set }, upto } => {
            let (mdoc, t) = cx.measure("measure", measure)?;
            let (sdoc, s) = cx.set(set.as_ref())?;
            let p = t.parts(&s, eps)?;
            let j = t.jordan_decompose();
            let mut table = Table::new(&["n", "term", "hahn_positive", "in_set"]);
            for n in 0..=*upto {
                table.push(vec![
                    n.to_string(),
                    num(t.term(n).value()),
                    j.hahn_positive(n).to_string(),
                    s.contains(n).to_string(),
                ]);
            }
            let doc = json!({
                "command": "decompose",
                "pos_mass": p.positive.value, "pos_error": p.positive.abs_error,
                "neg_mass": p.negative.value, "neg_error": p.negative.abs_error,
                "signed": mv(p.signed()), "variation": mv(p.variation()),
                "inputs": {"measure": mdoc, "set": sdoc, "eps": eps},
            });
            Ok(Output { doc, table: Some(table) })
        }
        Command::Tv(MeasureArgs { measure, set }) => {
            let (mdoc, t) = cx.measure("measure", measure)?;
            let (sdoc, s) = cx.set(set.as_ref())?;
            let v = t.total_variation(&s, eps)?;
            done(json!({
                "command": "tv", "value": v.value, "abs_error": v.abs_error,
                "inputs": {"measure": mdoc, "set": sdoc, "eps": eps},
            }))
        }
        Command::Norm(MeasureArgs { measure, set }) => {
            let (mdoc, t) = cx.measure("measure", measure)?;
            let (sdoc, s) = cx.set(set.as_ref())?;
            let v = norm(&t, &s, eps)?;
            done(json!({
                "command": "norm", "value": v.value, "abs_error": v.abs_error,
                "inputs": {"measure": mdoc, "set": sdoc, "eps": eps},
            }))
        }
        Command::Inner(PairArgs { measure, other, set }) | Command::Dist(PairArgs { measure, other, set }) => {
            let (m1, t1) = cx.measure("measure", measure)?;
            let (m2, t2) = cx.measure("other", other)?;
            let (sdoc, s) = cx.set(set.as_ref())?;
            let (name, v) = match cli.command {
                Command::Inner(_) => ("inner", inner_product(&t1, &t2, &s, eps)?),
                _ => ("dist", distance(&t1, &t2, &s, eps)?),
            };
            done(json!({
                "command": name, "value": v.value, "abs_error": v.abs_error,
                "inputs": {"measure": m1, "other": m2, "set": sdoc, "eps": eps},
            }))
        }
        Command::Pmf { density, measure, side, set } => {
            let (input, pmf, mass): (Value, PowerSeriesPmf<f64>, Option<MeasureValue<f64>>) =
                match (density, measure, side) {
                    (Some(d), None, _) => {
                        let (v, zeta, b) = cx.density("density", d)?;
                        (json!({"density": v}), PowerSeriesPmf::new(zeta, b)?, None)
                    }
                    (None, Some(m), Some(side)) => {
                        let (v, t) = cx.measure("measure", m)?;
                        let pair = probability_pair(&t)?;
                        let (q, mass, name) = match side {
                            Side::Positive => (pair.q_pos()?, pair.mass_pos, "positive"),
                            Side::Negative => (pair.q_neg()?, pair.mass_neg, "negative"),
                        };
                        (json!({"measure": v, "side": name}), q.clone(), Some(mass))
                    }
                    _ => return Err(CliError::Input("pmf needs --density, or --measure with --side".into())),
                };
            let mut table = Table::new(&["n", "pmf", "cdf"]);
            let (p, c) = (pmf.pmf_table(), pmf.cdf_table());
            for n in 0..p.len() {
                table.push(vec![n.to_string(), num(p[n]), num(c[n])]);
            }
            let mut doc = json!({
                "command": "pmf",
                "zeta": pmf.zeta(),
                "normalizer": mv(pmf.normalizer()),
                "horizon": pmf.horizon(),
                "tail_probability": pmf.tail_probability(),
                "mean": pmf.mean(),
            });
            if let Some(m) = mass {
                doc["mass"] = mv(m);
            }
            let mut inputs = input;
            if let Some(arg) = set {
                let (sdoc, s) = cx.set(Some(arg))?;
                doc["probability"] = mv(pmf.probability(&s));
                inputs["set"] = sdoc;
            }
            doc["inputs"] = inputs;
            Ok(Output { doc, table: Some(table) })
        }
        Command::Sample { density, l, seed, strategy: st } => {
            let (ddoc, zeta, b) = cx.density("density", density)?;
            let sampler = PowerSeriesSampler::new(zeta, &b, strategy(*st))?;
            let out = sampler.sample(RngSpec::new(seed.seed), *l, cx.threads)?;
            let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
            let mut table = Table::new(&["index", "n"]);
            for (i, &n) in out.draws.iter().enumerate() {
                *counts.entry(n).or_default() += 1;
                table.push(vec![i.to_string(), n.to_string()]);
            }
            let xs: Vec<f64> = out.draws.iter().map(|&n| n as f64).collect();
            let stats = moments(&xs);
            let doc = json!({
                "command": "sample",
                "strategy": sampler.strategy(),
                "n_draws": out.draws.len(),
                "mean": stats["mean"],
                "variance": stats["variance"],
                "proposals": out.proposals,
                "acceptance_rate": out.acceptance_rate(),
                "counts": counts,
                "seed": seed.seed,
                "inputs": {"density": ddoc, "L": l, "seed": seed.seed, "strategy": strategy(*st)},
            });
            Ok(Output { doc, table: Some(table) })
        }
        Command::McMeasure { positive, negative, set, l, l1, l2, seed, strategy: st, normalizers, reps, exact } => {
            let (pdoc, z1, b1) = cx.density("positive", positive)?;
            let (ndoc, z2, b2) = cx.density("negative", negative)?;
            let (sdoc, s) = cx.set(set.as_ref())?;
            let need = |x: Option<usize>, name: &str| {
                x.or(*l).ok_or_else(|| CliError::Input(format!("mc-measure needs --L or --{name}")))
            };
            let (l1, l2) = (need(*l1, "L1")?, need(*l2, "L2")?);
            if *reps == 0 {
                return Err(CliError::Input("--reps must be at least 1".into()));
            }
            let mode = match normalizers {
                Normalizers::Exact => NormalizerMode::Exact { eps },
                Normalizers::Estimated => NormalizerMode::Estimated,
            };
            let options = EstimateOptions { normalizers: mode, strategy: strategy(*st), threads: cx.threads };
            let rng = RngSpec::new(seed.seed);
            let inputs = json!({
                "positive": pdoc, "negative": ndoc, "set": sdoc, "L1": l1, "L2": l2, "seed": seed.seed,
                "strategy": options.strategy, "normalizers": mode, "reps": reps, "exact": exact,
            });
            if *reps == 1 {
                let e = estimate_measure(z1, &b1, z2, &b2, &s, l1, l2, rng, options)?;
                let mut doc = json!({
                    "command": "mc-measure", "point": e.point, "stderr": e.stderr, "n_samples": e.n_samples,
                    "components": e.components, "seed": seed.seed, "inputs": inputs,
                });
                if let Some(x) = exact {
                    doc["within_3se"] = json!((e.point - x).abs() <= 3.0 * e.stderr);
                }
                return done(doc);
            }
            let inner = EstimateOptions { threads: 1, ..options };
            let runs = replicate(rng, *reps, cx.threads, |r| estimate_measure(z1, &b1, z2, &b2, &s, l1, l2, r, inner))?;
            let mut table = Table::new(&["rep", "point", "stderr"]);
            for (i, e) in runs.iter().enumerate() {
                table.push(vec![i.to_string(), num(e.point), num(e.stderr)]);
            }
            let points: Vec<f64> = runs.iter().map(|e| e.point).collect();
            let stats = moments(&points);
            let mut doc = json!({
                "command": "mc-measure",
                "reps": reps,
                "mean_point": stats["mean"],
                "sd_point": stats["variance"].as_f64().map(f64::sqrt),
                "mean_stderr": runs.iter().map(|e| e.stderr).sum::<f64>() / *reps as f64,
                "seed": seed.seed,
                "inputs": inputs,
            });
            if let Some(x) = exact {
                let covered = runs.iter().filter(|e| (e.point - x).abs() <= 3.0 * e.stderr).count();
                doc["coverage"] = json!(covered);
            }
            Ok(Output { doc, table: Some(table) })
        }
        Command::McNormalizer { density, l, seed } => {
            let (ddoc, zeta, b) = cx.density("density", density)?;
            let e = estimate_normalizer_poisson(zeta, &b, *l, RngSpec::new(seed.seed), cx.threads)?;
            let mut doc = json!({
                "command": "mc-normalizer", "point": e.point, "stderr": e.stderr, "n_samples": e.n_samples,
                "components": e.components, "seed": seed.seed,
                "inputs": {"density": ddoc, "L": l, "seed": seed.seed},
            });
            if let Ok(c) = normalizer(zeta, &b, eps) {
                doc["exact"] = mv(c);
            }
            done(doc)
        }
        Command::StmMoments { stm, set, seed, reps } => {
            let v = cx.src.load("stm", stm)?;
            let spec: StmSpec = docs::parse("stm", &v)?;
            let (sdoc, s) = cx.set(set.as_ref())?;
            let (mean, var) = stm_moments(&spec, &s, eps)?;
            let mut doc = json!({
                "command": "stm-moments", "mean": mean, "variance": var,
                "inputs": {"stm": v, "set": sdoc, "eps": eps, "seed": seed, "reps": reps},
            });
            if let (Some(seed), Some(reps)) = (seed, reps) {
                if *reps < 2 {
                    return Err(CliError::Input("--reps must be at least 2".into()));
                }
                let xs = stm_sampler(&spec, &s, eps)?.replicate(RngSpec::new(*seed), *reps, cx.threads)?;
                doc["empirical"] = moments(&xs);
                let mut table = Table::new(&["rep", "value"]);
                for (i, x) in xs.iter().enumerate() {
                    table.push(vec![i.to_string(), num(*x)]);
                }
                return Ok(Output { doc, table: Some(table) });
            }
            done(doc)
        }
        Command::StmSim { stm, set, seed, reps, path } => {
            let v = cx.src.load("stm", stm)?;
            let spec: StmSpec = docs::parse("stm", &v)?;
            let rng = RngSpec::new(seed.seed);
            if *path {
                if set.is_some() {
                    return Err(CliError::Input("--set does not apply to --path".into()));
                }
                let p = match &spec {
                    StmSpec::RandomWalk { step, t } => simulate_random_walk(*step, *t, rng)?,
                    StmSpec::Ar1 { phi, sigma2, t } => simulate_ar1(*phi, *sigma2, *t, rng)?,
                    StmSpec::BrownianApprox { n, mu, sigma } => simulate_brownian(*n, *mu, *sigma, rng)?,
                    _ => return Err(CliError::Input("--path needs a random_walk, ar1 or brownian_approx spec".into())),
                };
                let mut table = Table::new(&["index", "time", "value"]);
                for (i, (t, x)) in p.times_or_indices.iter().zip(&p.values).enumerate() {
                    table.push(vec![i.to_string(), num(*t), num(*x)]);
                }
                let doc = json!({
                    "command": "stm-sim", "times": p.times_or_indices, "values": p.values, "seed": seed.seed,
                    "inputs": {"stm": v, "seed": seed.seed, "path": true},
                });
                return Ok(Output { doc, table: Some(table) });
            }
            let (sdoc, s) = cx.set(set.as_ref())?;
            let xs = stm_sampler(&spec, &s, eps)?.replicate(rng, *reps, cx.threads)?;
            let mut table = Table::new(&["rep", "value"]);
            for (i, x) in xs.iter().enumerate() {
                table.push(vec![i.to_string(), num(*x)]);
            }
            let doc = json!({
                "command": "stm-sim", "values": xs, "seed": seed.seed,
                "inputs": {"stm": v, "set": sdoc, "eps": eps, "seed": seed.seed, "reps": reps},
            });
            Ok(Output { doc, table: Some(table) })
        }
        Command::FnEval { function, x, interval: iv, grid } => {
            let r = cx.rep("fn", function)?;
            let rep = r.rep(eps)?;
            let points: Vec<f64> = match (x.is_empty(), iv.is_empty()) {
                (false, true) => x.clone(),
                (true, false) => {
                    let (lo, hi) = interval(iv)?;
                    if *grid < 2 {
                        return Err(CliError::Input("--grid must be at least 2".into()));
                    }
                    (0..*grid).map(|i| lo + (hi - lo) * i as f64 / (*grid - 1) as f64).collect()
                }
                _ => return Err(CliError::Input("fn-eval needs exactly one of --x and --interval".into())),
            };
            let mut table = Table::new(&["x", "f", "bound"]);
            let mut rows = Vec::new();
            for &p in &points {
                let v = rep.eval(p, eps)?;
                table.push(vec![num(p), num(v.value), num(v.abs_error)]);
                rows.push(json!({"x": p, "f": v.value, "bound": v.abs_error}));
            }
            let doc = json!({"command": "fn-eval", "points": rows, "inputs": {"fn": r, "eps": eps}});
            Ok(Output { doc, table: Some(table) })
        }
        Command::FnMul { function, other, terms } => {
            let f = cx.rep("fn", function)?;
            let g = cx.rep("other", other)?;
            let result = RepDoc::Mul(Box::new(f), Box::new(g));
            let rep = result.rep(eps)?;
            done(json!({
                "command": "fn-mul", "result": result, "center": rep.center, "radius": rep.radius_hint,
                "coefficients": coefficient_list(&rep, *terms), "inputs": {"eps": eps, "terms": terms},
            }))
        }
        Command::FnRecenter { function, at, terms } => {
            let f = cx.rep("fn", function)?;
            let result = RepDoc::Recenter { f: Box::new(f), at: *at };
            let rep = result.rep(eps)?;
            done(json!({
                "command": "fn-recenter", "result": result, "center": rep.center, "radius": rep.radius_hint,
                "coefficients": coefficient_list(&rep, *terms), "inputs": {"eps": eps, "terms": terms},
            }))
        }
        Command::FnSupdist { function, oracle, interval: iv, grid } => {
            let r = cx.rep("fn", function)?;
            let ov = cx.src.load("oracle", oracle)?;
            let b: Builtin = docs::parse("oracle", &ov)?;
            let (lo, hi) = interval(iv)?;
            let d = r.rep(eps)?.sup_distance_on_grid(&docs::reference(&b), lo, hi, *grid, eps)?;
            done(json!({
                "command": "fn-supdist", "value": d,
                "inputs": {"fn": r, "oracle": ov, "interval": [lo, hi], "grid": grid, "eps": eps},
            }))
        }
        Command::FnLpnorm { function, p, interval: iv } => {
            let r = cx.rep("fn", function)?;
            let (lo, hi) = interval(iv)?;
            let v = r.rep(eps)?.lp_norm_on_interval(*p, lo, hi, eps)?;
            done(json!({
                "command": "fn-lpnorm", "value": v,
                "inputs": {"fn": r, "p": p, "interval": [lo, hi], "eps": eps},
            }))
        }
        Command::Axioms { seed, samples, measures, set } => {
            let (sdoc, s) = cx.set(set.as_ref())?;
            let list: Vec<TaylorMeasure<f64>> = match measures {
                Some(arg) => {
                    let v = cx.src.load("measures", arg)?;
                    let ds: Vec<MeasureDoc> = docs::parse("measures", &v)?;
                    ds.iter()
                        .enumerate()
                        .map(|(i, d)| d.measure(&format!("measures[{i}]")))
                        .collect::<Result<_, _>>()?
                }
                None => random_measures(seed.seed, *samples)?,
            };
            let r = hilbert_axiom_report(&list, &s, eps, seed.seed)?;
            done(json!({
                "command": "axioms",
                "symmetry": r.symmetry,
                "bilinearity": r.bilinearity,
                "cauchy_schwarz_slack": r.cauchy_schwarz_slack,
                "parallelogram_rho": r.parallelogram_rho,
                "parallelogram_tv": r.parallelogram_tv,
                "pairs": r.pairs,
                "seed": seed.seed,
                "inputs": {"set": sdoc, "eps": eps, "seed": seed.seed, "samples": list.len()},
            }))
        }
    }
}

/// Bounded-coefficient measures with short random prefixes.
fn random_measures(seed: u64, count: usize) -> Result<Vec<TaylorMeasure<f64>>, CliError> {
    let mut g = RngSpec::new(seed).substream(1).generator(0);
    (0..count)
        .map(|_| {
            let len = g.random_range(1..=8);
            let prefix = (0..len).map(|_| g.random_range(-3.0..3.0)).collect();
            let tail = TailModel::Constant(g.random_range(-1.0..1.0));
            let seq = CoefficientSequence::explicit(prefix, tail)?;
            Ok(TaylorMeasure::new(seq, g.random_range(-2.0..2.0))?)
        })
        .collect()
}
