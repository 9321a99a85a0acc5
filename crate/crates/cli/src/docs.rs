//! JSON input documents and their conversion into library objects.

use std::fs;
use std::io::Read;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use taylor_measure::{AnalyticRep, Builtin, CoefficientSequence, GrowthCertificate, NatSet, TailModel, TaylorMeasure};

use crate::CliError;

/// Where a document comes from: `-` for stdin, inline JSON, or a file path.
pub struct Source<'a> {
    stdin: &'a mut dyn Read,
    stdin_used: bool,
}

impl<'a> Source<'a> {
    pub fn new(stdin: &'a mut dyn Read) -> Self {
        Source { stdin, stdin_used: false }
    }

    /// Raw JSON value of the document named by `arg`.
    pub fn load(&mut self, what: &str, arg: &str) -> Result<Value, CliError> {
        let text = if arg == "-" {
            if self.stdin_used {
                return Err(CliError::Input(format!("{what}: stdin can only be read once")));
            }
            self.stdin_used = true;
            let mut s = String::new();
            self.stdin.read_to_string(&mut s).map_err(|e| CliError::Input(format!("{what}: reading stdin: {e}")))?;
            s
        } else if arg.trim_start().starts_with(['{', '[']) {
            arg.to_string()
        } else {
            fs::read_to_string(arg).map_err(|e| CliError::Input(format!("{what}: cannot read {arg}: {e}")))?
        };
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{what}: {e}")))
    }
}

/// Parse `value` as `T`, naming the document in the diagnostic.
pub fn parse<T: for<'de> Deserialize<'de>>(what: &str, value: &Value) -> Result<T, CliError> {
    serde_json::from_value(value.clone()).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailDoc {
    Zero,
    Constant {
        #[serde(rename = "M")]
        m: f64,
    },
    Geometric {
        #[serde(rename = "M")]
        m: f64,
        b: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceDoc {
    #[serde(default)]
    pub prefix: Vec<f64>,
    #[serde(default = "zero_tail")]
    pub tail: TailDoc,
}

fn zero_tail() -> TailDoc {
    TailDoc::Zero
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CertificateDoc {
    FiniteSupport {
        #[serde(rename = "N")]
        n: u64,
    },
    Bounded {
        #[serde(rename = "M")]
        m: f64,
    },
    GeometricEquiv {
        #[serde(rename = "M")]
        m: f64,
        b: f64,
        #[serde(default)]
        from: u64,
    },
    Unverified,
}

impl CertificateDoc {
    fn certificate(&self) -> GrowthCertificate<f64> {
        match *self {
            CertificateDoc::FiniteSupport { n } => GrowthCertificate::FiniteSupport(n),
            CertificateDoc::Bounded { m } => GrowthCertificate::Bounded(m),
            CertificateDoc::GeometricEquiv { m, b, from } => GrowthCertificate::GeometricEquiv { m, b, from },
            CertificateDoc::Unverified => GrowthCertificate::Unverified,
        }
    }
}

/// Coefficients with an optional certificate. Without one, the tightest
/// certificate derivable from the tail model is used; `unverified` is always
/// accepted, any other certificate is checked against the sequence.
pub fn sequence(seq: &SequenceDoc, cert: Option<&CertificateDoc>) -> Result<CoefficientSequence<f64>, CliError> {
    let tail = match seq.tail {
        TailDoc::Zero => TailModel::Zero,
        TailDoc::Constant { m } => TailModel::Constant(m),
        TailDoc::Geometric { m, b } => TailModel::Geometric { m, b },
    };
    let prefix = seq.prefix.clone();
    Ok(match cert {
        None => CoefficientSequence::explicit(prefix, tail)?,
        Some(CertificateDoc::Unverified) => {
            CoefficientSequence::explicit(prefix, tail)?.with_certificate_unchecked(GrowthCertificate::Unverified)
        }
        Some(c) => CoefficientSequence::explicit_with_certificate(prefix, tail, c.certificate())?,
    })
}

/// A measure, either as `(gamma, coefficients[, certificate])` or as a finite
/// list of term values `p(0), p(1), …`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureDoc {
    #[serde(default, alias = "zeta")]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub coefficients: Option<SequenceDoc>,
    #[serde(default)]
    pub terms: Option<Vec<f64>>,
    #[serde(default)]
    pub certificate: Option<CertificateDoc>,
    #[serde(default)]
    pub label: Option<String>,
}

impl MeasureDoc {
    pub fn measure(&self, what: &str) -> Result<TaylorMeasure<f64>, CliError> {
        let t = match (&self.terms, self.gamma, &self.coefficients) {
            (Some(terms), None, None) => {
                if self.certificate.is_some() {
                    return Err(CliError::Input(format!("{what}: field `certificate` is not allowed with `terms`")));
                }
                TaylorMeasure::from_term_values(terms)?
            }
            (Some(_), _, _) => {
                return Err(CliError::Input(format!("{what}: field `terms` excludes `gamma` and `coefficients`")))
            }
            (None, None, _) => return Err(CliError::Input(format!("{what}: missing field `gamma`"))),
            (None, _, None) => return Err(CliError::Input(format!("{what}: missing field `coefficients`"))),
            (None, Some(gamma), Some(seq)) => TaylorMeasure::new(sequence(seq, self.certificate.as_ref())?, gamma)?,
        };
        Ok(match &self.label {
            Some(l) => t.with_label(l.clone()),
            None => t,
        })
    }

    /// `(ζ, b)` for the power-series family `b_n ζ^n / n!`.
    pub fn density(&self, what: &str) -> Result<(f64, CoefficientSequence<f64>), CliError> {
        if self.terms.is_some() {
            return Err(CliError::Input(format!("{what}: a density needs `zeta` and `coefficients`, not `terms`")));
        }
        let t = self.measure(what)?;
        Ok((t.gamma(), t.coefficients().clone()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetDoc {
    Finite { elements: Vec<u64> },
    Cofinite { elements: Vec<u64> },
    All,
}

impl SetDoc {
    pub fn set(&self) -> NatSet {
        match self {
            SetDoc::Finite { elements } => NatSet::finite(elements.iter().copied()),
            SetDoc::Cofinite { elements } => NatSet::cofinite(elements.iter().copied()),
            SetDoc::All => NatSet::All,
        }
    }
}

fn zero() -> f64 {
    0.0
}

/// An analytic function as an expression over builtins and explicit series.
/// Results of `fn-mul` and `fn-recenter` are emitted in this form, so they can
/// be fed back in.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepDoc {
    /// `{"builtin": {"name": "exp", "center": 0}}`.
    Builtin {
        #[serde(flatten)]
        function: Builtin,
        #[serde(default = "zero")]
        center: f64,
    },
    /// Derivatives `a_n = f⁽ⁿ⁾(center)`; `radius` defaults to `+∞`.
    Series {
        coefficients: SequenceDoc,
        #[serde(default)]
        certificate: Option<CertificateDoc>,
        #[serde(default = "zero")]
        center: f64,
        #[serde(default)]
        radius: Option<f64>,
    },
    Mul(Box<RepDoc>, Box<RepDoc>),
    Combine {
        alpha: f64,
        f: Box<RepDoc>,
        beta: f64,
        g: Box<RepDoc>,
    },
    Power {
        f: Box<RepDoc>,
        n: u64,
    },
    Recenter {
        f: Box<RepDoc>,
        at: f64,
    },
    Truncate {
        f: Box<RepDoc>,
        degree: u64,
    },
}

impl RepDoc {
    /// `eps` is the accuracy of each recentered coefficient.
    pub fn rep(&self, eps: f64) -> Result<AnalyticRep<f64>, CliError> {
        Ok(match self {
            RepDoc::Builtin { function, center } => AnalyticRep::builtin(function, *center)?,
            RepDoc::Series { coefficients, certificate, center, radius } => AnalyticRep::new(
                *center,
                sequence(coefficients, certificate.as_ref())?,
                radius.unwrap_or(f64::INFINITY),
            )?,
            RepDoc::Mul(f, g) => f.rep(eps)?.multiply(&g.rep(eps)?)?,
            RepDoc::Combine { alpha, f, beta, g } => {
                AnalyticRep::linear_combination(*alpha, &f.rep(eps)?, *beta, &g.rep(eps)?)?
            }
            RepDoc::Power { f, n } => f.rep(eps)?.power(*n)?,
            RepDoc::Recenter { f, at } => f.rep(eps)?.recenter(*at, eps)?,
            RepDoc::Truncate { f, degree } => f.rep(eps)?.truncated(*degree)?,
        })
    }
}

/// Closed-form reference values for the builtins.
pub fn reference(f: &Builtin) -> impl Fn(f64) -> f64 + '_ {
    move |x| match f {
        Builtin::Exp => x.exp(),
        Builtin::Sin => x.sin(),
        Builtin::Cos => x.cos(),
        Builtin::Geometric => 1.0 / (1.0 - x),
        Builtin::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn measure_document_forms() {
        let doc: MeasureDoc =
            parse("m", &json!({"gamma": 1.0, "coefficients": {"prefix": [], "tail": {"kind": "constant", "M": 1.0}}}))
                .unwrap();
        let t = doc.measure("m").unwrap();
        assert!((t.total_mass(1e-14).unwrap().value - std::f64::consts::E).abs() < 1e-14);

        let doc: MeasureDoc = parse("m", &json!({"terms": [1.0, -2.0, 1.5]})).unwrap();
        assert_eq!(doc.measure("m").unwrap().term(1).value(), -2.0);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let err = parse::<MeasureDoc>("measure", &json!({"gamma": "x"})).unwrap_err();
        assert!(err.to_string().contains("measure"));
        let doc: MeasureDoc = parse("measure", &json!({"gamma": 1.0})).unwrap();
        assert!(doc.measure("measure").unwrap_err().to_string().contains("`coefficients`"));
        let err = parse::<MeasureDoc>("measure", &json!({"gamma": 1.0, "coefs": {}})).unwrap_err();
        assert!(err.to_string().contains("coefs"), "{err}");
        let err = parse::<SetDoc>("set", &json!({"kind": "finite"})).unwrap_err();
        assert!(err.to_string().contains("elements"), "{err}");
    }

    #[test]
    fn certificates_are_checked() {
        let seq = SequenceDoc { prefix: vec![5.0], tail: TailDoc::Constant { m: 1.0 } };
        assert!(sequence(&seq, Some(&CertificateDoc::Bounded { m: 2.0 })).is_err());
        assert!(sequence(&seq, Some(&CertificateDoc::Bounded { m: 5.0 })).is_ok());
        let s = sequence(&seq, Some(&CertificateDoc::Unverified)).unwrap();
        assert!(!s.certificate().is_verified());
    }

    #[test]
    fn rep_documents_nest() {
        let doc: RepDoc =
            parse("fn", &json!({"mul": [{"builtin": {"name": "exp"}}, {"builtin": {"name": "sin", "center": 0.0}}]}))
                .unwrap();
        let r = doc.rep(1e-15).unwrap();
        let v = r.eval(0.5, 1e-14).unwrap().value;
        assert!((v - 0.5f64.exp() * 0.5f64.sin()).abs() < 1e-13);
        let back: RepDoc = parse("fn", &serde_json::to_value(&doc).unwrap()).unwrap();
        assert_eq!(back.rep(1e-15).unwrap().eval(0.5, 1e-14).unwrap().value, v);
    }
}
