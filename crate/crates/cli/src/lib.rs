//! Command-line front end for `taylor-measure`.
//!
//! Each subcommand reads JSON documents (a path, `-` for stdin, or inline
//! JSON), prints one JSON result document to stdout and optionally writes a
//! CSV table with `--csv PATH`. Exit status is 0 on success, 2 for bad input
//! and 3 for numerical failures.

mod commands;
pub mod docs;

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] taylor_measure::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "InputError",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Core(e) if e.is_input_error() => EXIT_INPUT,
            CliError::Core(_) => EXIT_NUMERIC,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "taylor", version, about = "Taylor measures on the natural numbers")]
pub struct Cli {
    /// Target absolute error for deterministic sums.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub eps: f64,
    /// Worker threads (0 = all cores). Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Also write the command's table to this CSV file.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// Measure document.
    #[arg(long)]
    pub measure: String,
    /// Set document (default: all of ℕ).
    #[arg(long)]
    pub set: Option<String>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub measure: String,
    /// Second measure document.
    #[arg(long)]
    pub other: String,
    #[arg(long)]
    pub set: Option<String>,
}

#[derive(Debug, Args)]
pub struct Seed {
    /// Seed for every random draw; required, there is no clock seeding.
    #[arg(long)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Strategy {
    Auto,
    InverseCdf,
    Rejection,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Side {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Normalizers {
    Exact,
    Estimated,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// T(B) with a certified error bound.
    Eval(MeasureArgs),
    /// Jordan parts T⁺(B), T⁻(B).
    Decompose {
        #[command(flatten)]
        m: MeasureArgs,
        /// Last index of the CSV term table.
        #[arg(long, default_value_t = 20)]
        upto: u64,
    },
    /// Total variation ‖T‖(B).
    Tv(MeasureArgs),
    /// ρ_B(T1, T2).
    Inner(PairArgs),
    /// ‖T‖_ρ on B.
    Norm(MeasureArgs),
    /// ‖T1 − T2‖_ρ on B.
    Dist(PairArgs),
    /// Power-series pmf b_n ζ^n / (n! c), or Q± of a measure.
    Pmf {
        /// Density document `(zeta, coefficients)`.
        #[arg(long, conflicts_with = "measure")]
        density: Option<String>,
        #[arg(long, requires = "side")]
        measure: Option<String>,
        #[arg(long, value_enum)]
        side: Option<Side>,
        /// Also report the probability of this set.
        #[arg(long)]
        set: Option<String>,
    },
    /// Draws from a power-series pmf.
    Sample {
        #[arg(long)]
        density: String,
        #[arg(long = "L")]
        l: usize,
        #[command(flatten)]
        seed: Seed,
        #[arg(long, value_enum, default_value = "auto")]
        strategy: Strategy,
    },
    /// Monte Carlo estimate of T(B) from the densities of T⁺ and T⁻.
    McMeasure {
        #[arg(long)]
        positive: String,
        #[arg(long)]
        negative: String,
        #[arg(long)]
        set: Option<String>,
        /// Sample size for both sides unless `--L1`/`--L2` are given.
        #[arg(long = "L")]
        l: Option<usize>,
        #[arg(long = "L1")]
        l1: Option<usize>,
        #[arg(long = "L2")]
        l2: Option<usize>,
        #[command(flatten)]
        seed: Seed,
        #[arg(long, value_enum, default_value = "auto")]
        strategy: Strategy,
        #[arg(long, value_enum, default_value = "exact")]
        normalizers: Normalizers,
        /// Independent replications.
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Reference value for the ±3·stderr coverage count.
        #[arg(long)]
        exact: Option<f64>,
    },
    /// Monte Carlo estimate of Σ b_n ζ^n / n! under Poisson(ζ) sampling.
    McNormalizer {
        #[arg(long)]
        density: String,
        #[arg(long = "L")]
        l: usize,
        #[command(flatten)]
        seed: Seed,
    },
    /// Exact mean and variance of X(B), optionally with empirical moments.
    StmMoments {
        #[arg(long)]
        stm: String,
        #[arg(long)]
        set: Option<String>,
        /// Seed for the empirical moments.
        #[arg(long, requires = "reps")]
        seed: Option<u64>,
        #[arg(long, requires = "seed")]
        reps: Option<usize>,
    },
    /// Realizations of X(B), or one path with `--path`.
    StmSim {
        #[arg(long)]
        stm: String,
        #[arg(long)]
        set: Option<String>,
        #[command(flatten)]
        seed: Seed,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Emit the underlying path (random walk, AR(1), Brownian).
        #[arg(long)]
        path: bool,
    },
    /// f(x) with error bounds at listed points or on a grid.
    FnEval {
        #[arg(long = "fn")]
        function: String,
        /// Comma-separated points.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        /// `LO,HI` for a uniform grid.
        #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
        interval: Vec<f64>,
        #[arg(long, default_value_t = 11)]
        grid: usize,
    },
    /// Product of two representations with a common center.
    FnMul {
        #[arg(long = "fn")]
        function: String,
        #[arg(long)]
        other: String,
        /// Number of leading coefficients to print.
        #[arg(long, default_value_t = 10)]
        terms: u64,
    },
    /// Taylor shift to a new center.
    FnRecenter {
        #[arg(long = "fn")]
        function: String,
        #[arg(long, allow_hyphen_values = true)]
        at: f64,
        #[arg(long, default_value_t = 10)]
        terms: u64,
    },
    /// Max grid distance to a builtin's closed form.
    FnSupdist {
        #[arg(long = "fn")]
        function: String,
        /// Builtin document, e.g. `{"name":"exp"}`.
        #[arg(long)]
        oracle: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        interval: Vec<f64>,
        #[arg(long, default_value_t = 1001)]
        grid: usize,
    },
    /// (∫_K |f|^p)^{1/p} on an interval.
    FnLpnorm {
        #[arg(long = "fn")]
        function: String,
        #[arg(long)]
        p: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        interval: Vec<f64>,
    },
    /// Inner-product axiom residuals on sampled or given measures.
    Axioms {
        #[command(flatten)]
        seed: Seed,
        /// Number of random measures when `--measures` is absent.
        #[arg(long, default_value_t = 12)]
        samples: usize,
        /// JSON list of measure documents.
        #[arg(long)]
        measures: Option<String>,
        #[arg(long)]
        set: Option<String>,
    },
}

/// Run the CLI on `args` (including the program name). Returns the exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let csv = cli.csv.clone();
    match commands::execute(&cli, stdin) {
        Ok(result) => {
            if let Some(path) = csv {
                let written = match &result.table {
                    Some(t) => t.write(&path),
                    None => Err(CliError::Input("this command has no table for --csv".into())),
                };
                if let Err(e) = written {
                    return report(&e, out, err);
                }
            }
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&result.doc).expect("JSON values serialize"));
            EXIT_OK
        }
        Err(e) => report(&e, out, err),
    }
}

fn report(e: &CliError, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let doc = json!({"error": e.kind(), "message": e.to_string()});
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("JSON values serialize"));
    let _ = writeln!(err, "error: {e}");
    e.exit_code()
}
