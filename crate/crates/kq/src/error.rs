use std::fmt;

/// Domain errors shared by all modules. The `Display` form starts with the
/// variant name so callers (and the CLI) can report a stable identifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Series division needs a denominator with a nonzero constant term.
    NonUnitDenominator {
        d0: f64,
    },
    /// Differentiating an order-0 series would leave nothing.
    ZeroOrder,
    /// A series expected to hold a probability distribution fails the
    /// non-negativity or normalization check.
    NotADistribution {
        sum: f64,
        min_coeff: f64,
    },
    InvalidProbability {
        p: f64,
    },
    /// Operation defined for finite-support distributions only.
    UnsupportedKind,
    /// Evaluation point outside the function's domain.
    OutOfDomain {
        x: f64,
    },
    /// Offered load at or above the stability limit.
    Unstable {
        mean: f64,
        limit: f64,
    },
    /// Offspring with P(0) = 0: the tree never terminates, the queue never empties.
    NeverEmpty,
    /// Linear (degree-1) offspring: the characteristic root escapes to infinity.
    DegenerateLinear,
    /// Argument beyond the convergence radius of the tree function.
    BeyondRadius {
        z: f64,
        rho: f64,
    },
    NoConvergence {
        iterations: u64,
    },
    /// The pole equation has no root before the branch point; the exponential
    /// tail asymptotic does not apply.
    NoPoleSingularity {
        h_at_vmax: f64,
    },
    /// The low-priority arrival process has P(0) of 0 or 1.
    DegenerateBoundary {
        b0: f64,
    },
    /// Transient generating function evaluated too close to its pole.
    NearPole {
        denominator: f64,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonUnitDenominator { d0 } => {
                write!(
                    f,
                    "NonUnitDenominator: constant term {d0:e} is too close to zero"
                )
            }
            Error::ZeroOrder => write!(f, "ZeroOrder: cannot differentiate an order-0 series"),
            Error::NotADistribution { sum, min_coeff } => write!(
                f,
                "NotADistribution: coefficients sum to {sum} with minimum {min_coeff:e}"
            ),
            Error::InvalidProbability { p } => {
                write!(f, "InvalidProbability: {p} is not in [0, 1]")
            }
            Error::UnsupportedKind => {
                write!(
                    f,
                    "UnsupportedKind: operation requires finite-support distributions"
                )
            }
            Error::OutOfDomain { x } => write!(f, "OutOfDomain: {x} is outside the domain"),
            Error::Unstable { mean, limit } => {
                write!(
                    f,
                    "Unstable: {mean} is not below the stability threshold {limit}"
                )
            }
            Error::NeverEmpty => write!(f, "NeverEmpty: P(0) = 0, the system never empties"),
            Error::DegenerateLinear => {
                write!(
                    f,
                    "DegenerateLinear: linear generating function has no second root"
                )
            }
            Error::BeyondRadius { z, rho } => {
                write!(f, "BeyondRadius: {z} exceeds the convergence radius {rho}")
            }
            Error::NoConvergence { iterations } => {
                write!(
                    f,
                    "NoConvergence: no fixed point after {iterations} iterations"
                )
            }
            Error::NoPoleSingularity { h_at_vmax } => write!(
                f,
                "NoPoleSingularity: no pole before the branch point (h at v_max = {h_at_vmax:e})"
            ),
            Error::DegenerateBoundary { b0 } => {
                write!(
                    f,
                    "DegenerateBoundary: P(B=0) = {b0} admits no stationary analysis"
                )
            }
            Error::NearPole { denominator } => {
                write!(
                    f,
                    "NearPole: denominator {denominator:e} below safe threshold"
                )
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
