use thiserror::Error;

/// Errors raised by the measure kernels, samplers and representations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An infinite set was queried on a sequence without a usable growth certificate.
    #[error("DivergenceUnknown: {0}")]
    DivergenceUnknown(String),
    #[error("TruncationLimit: no truncation index up to {max_index} meets tolerance {eps:e}")]
    TruncationLimit { max_index: u64, eps: f64 },
    #[error("InvalidCertificate: {0}")]
    InvalidCertificate(String),
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error("DegenerateDistribution: {0}")]
    DegenerateDistribution(String),
    #[error("QuantileTailUnresolved: u = {u} exceeds the resolvable mass {resolved}")]
    QuantileTailUnresolved { u: f64, resolved: f64 },
    #[error("InvalidPmf: {0}")]
    InvalidPmf(String),
    #[error("NoSamplerAvailable: {0}")]
    NoSamplerAvailable(String),
    #[error("NegativeRadicand: squared norm {value:e} below zero beyond its error {abs_error:e}")]
    NegativeRadicand { value: f64, abs_error: f64 },
    #[error("OutOfDomain: {0}")]
    OutOfDomain(String),
    #[error("CenterMismatch: expansions centred at {0} and {1}")]
    CenterMismatch(f64, f64),
    #[error("QuadratureStall: no convergence after {depth} refinements")]
    QuadratureStall { depth: u32 },
    #[error("UnsupportedSpec: {0}")]
    UnsupportedSpec(String),
    #[error("ToleranceUnattainable: {0}")]
    ToleranceUnattainable(String),
}

impl Error {
    /// Stable identifier (the variant name) used by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DivergenceUnknown(_) => "DivergenceUnknown",
            Error::TruncationLimit { .. } => "TruncationLimit",
            Error::InvalidCertificate(_) => "InvalidCertificate",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::DegenerateDistribution(_) => "DegenerateDistribution",
            Error::QuantileTailUnresolved { .. } => "QuantileTailUnresolved",
            Error::InvalidPmf(_) => "InvalidPmf",
            Error::NoSamplerAvailable(_) => "NoSamplerAvailable",
            Error::NegativeRadicand { .. } => "NegativeRadicand",
            Error::OutOfDomain(_) => "OutOfDomain",
            Error::CenterMismatch(..) => "CenterMismatch",
            Error::QuadratureStall { .. } => "QuadratureStall",
            Error::UnsupportedSpec(_) => "UnsupportedSpec",
            Error::ToleranceUnattainable(_) => "ToleranceUnattainable",
        }
    }

    /// Whether the failure is about the caller's input rather than the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidCertificate(_)
                | Error::InvalidParameter(_)
                | Error::InvalidPmf(_)
                | Error::CenterMismatch(..)
                | Error::UnsupportedSpec(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
