//! Probability distributions on the naturals with exact PGF evaluation.
//!
//! Series truncation limits where a generating function can be trusted;
//! these evaluators are exact at any point of the PGF's true domain, which
//! the root solvers need at arguments beyond 1.

use crate::error::{Error, Result};
use crate::series::TruncatedSeries;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum Pgf {
    /// P(k) for k = 0..=d.
    FiniteSupport { probs: Vec<f64> },
    /// Distribution on positive integers with PGF p·s/(1−(1−p)s).
    GeometricShifted { p: f64 },
}

impl Pgf {
    /// Mass 1−p at 0 and p at m.
    pub fn bimodal(p: f64, m: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability { p });
        }
        assert!(m >= 1, "bimodal jump must be positive");
        let mut probs = vec![0.0; m + 1];
        probs[0] = 1.0 - p;
        probs[m] += p;
        Ok(Pgf::FiniteSupport { probs })
    }

    /// Mass 1−p at 0 and p at 1. Service must complete sometimes, so p > 0.
    pub fn bernoulli_service(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidProbability { p });
        }
        Ok(Pgf::FiniteSupport {
            probs: vec![1.0 - p, p],
        })
    }

    /// Arbitrary finite-support mass function, index = value.
    pub fn finite(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        let min_coeff = probs.iter().cloned().fold(f64::INFINITY, f64::min);
        if probs.is_empty() || !sum.is_finite() || (sum - 1.0).abs() > 1e-12 || min_coeff < 0.0 {
            return Err(Error::NotADistribution { sum, min_coeff });
        }
        Ok(Pgf::FiniteSupport { probs })
    }

    pub fn geometric_shifted(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidProbability { p });
        }
        Ok(Pgf::GeometricShifted { p })
    }

    /// Distribution of the independent sum: convolution of mass functions.
    pub fn product(a: &Pgf, b: &Pgf) -> Result<Self> {
        let (pa, pb) = match (a, b) {
            (Pgf::FiniteSupport { probs: pa }, Pgf::FiniteSupport { probs: pb }) => (pa, pb),
            _ => return Err(Error::UnsupportedKind),
        };
        let mut probs = vec![0.0; pa.len() + pb.len() - 1];
        for (i, &x) in pa.iter().enumerate() {
            for (j, &y) in pb.iter().enumerate() {
                probs[i + j] += x * y;
            }
        }
        Ok(Pgf::FiniteSupport { probs })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            Pgf::FiniteSupport { probs } => Ok(horner(probs, x)),
            Pgf::GeometricShifted { p } => {
                let q = 1.0 - p;
                check_geometric_domain(q, x)?;
                Ok(p * x / (1.0 - q * x))
            }
        }
    }

    pub fn deriv(&self, x: f64) -> Result<f64> {
        match self {
            Pgf::FiniteSupport { probs } => {
                let d: Vec<f64> = probs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, &p)| k as f64 * p)
                    .collect();
                Ok(horner(&d, x))
            }
            Pgf::GeometricShifted { p } => {
                let q = 1.0 - p;
                check_geometric_domain(q, x)?;
                let den = 1.0 - q * x;
                Ok(p / (den * den))
            }
        }
    }

    pub fn deriv2(&self, x: f64) -> Result<f64> {
        match self {
            Pgf::FiniteSupport { probs } => {
                let d: Vec<f64> = probs
                    .iter()
                    .enumerate()
                    .skip(2)
                    .map(|(k, &p)| (k * (k - 1)) as f64 * p)
                    .collect();
                if d.is_empty() {
                    return Ok(0.0);
                }
                Ok(horner(&d, x))
            }
            Pgf::GeometricShifted { p } => {
                let q = 1.0 - p;
                check_geometric_domain(q, x)?;
                let den = 1.0 - q * x;
                Ok(2.0 * p * q / (den * den * den))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Pgf::FiniteSupport { probs } => {
                probs.iter().enumerate().map(|(k, &p)| k as f64 * p).sum()
            }
            Pgf::GeometricShifted { p } => 1.0 / p,
        }
    }

    pub fn as_series(&self, order: usize) -> TruncatedSeries {
        let mut coeffs = vec![0.0; order + 1];
        match self {
            Pgf::FiniteSupport { probs } => {
                for (k, &p) in probs.iter().take(order + 1).enumerate() {
                    coeffs[k] = p;
                }
            }
            Pgf::GeometricShifted { p } => {
                let q = 1.0 - p;
                let mut mass = *p;
                for c in coeffs.iter_mut().skip(1) {
                    *c = mass;
                    mass *= q;
                }
            }
        }
        TruncatedSeries::new(coeffs)
    }

    /// P(0); the geometric variant has no mass at zero.
    pub fn p0(&self) -> f64 {
        match self {
            Pgf::FiniteSupport { probs } => probs[0],
            Pgf::GeometricShifted { .. } => 0.0,
        }
    }

    /// Largest point with positive mass; None for infinite support.
    pub fn degree(&self) -> Option<usize> {
        match self {
            Pgf::FiniteSupport { probs } => Some(probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)),
            Pgf::GeometricShifted { p } => {
                if *p == 1.0 {
                    Some(1)
                } else {
                    None
                }
            }
        }
    }

    /// True when the PGF is affine, i.e. support within {0, 1}.
    pub fn is_linear(&self) -> bool {
        matches!(self.degree(), Some(d) if d <= 1)
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

fn check_geometric_domain(q: f64, x: f64) -> Result<()> {
    if q > 0.0 && x.abs() >= 1.0 / q {
        return Err(Error::OutOfDomain { x });
    }
    Ok(())
}

/// Scenario-file form of a distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PgfSpec {
    Bimodal { p: f64, m: usize },
    Finite { probs: Vec<f64> },
}

impl PgfSpec {
    pub fn build(&self) -> Result<Pgf> {
        match self {
            PgfSpec::Bimodal { p, m } => Pgf::bimodal(*p, *m),
            PgfSpec::Finite { probs } => Pgf::finite(probs.clone()),
        }
    }
}
