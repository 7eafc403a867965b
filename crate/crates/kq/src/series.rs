//! Truncated power-series arithmetic over `f64` coefficients.
//!
//! Every generating-function computation in this crate bottoms out here.
//! A series holds coefficients for u^0 ..= u^order; mixed-order operations
//! truncate to the smaller order.

use crate::error::{Error, Result};

/// Denominators with |constant term| at or below this cannot be inverted.
pub const EPS_DENOM: f64 = 1e-12;

/// Default working order. Coefficients of the stationary series decay
/// geometrically, so 128 terms reach far below 1e-12 for the models here.
pub const DEFAULT_ORDER: usize = 128;

/// Largest supported working order.
pub const MAX_ORDER: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    coeffs: Vec<f64>,
}

impl TruncatedSeries {
    /// Wraps a coefficient vector; index n is the coefficient of u^n.
    ///
    /// Panics on an empty vector or any non-finite coefficient: NaN or
    /// infinity anywhere is a hard error, never carried along.
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(
            !coeffs.is_empty(),
            "series needs at least the constant term"
        );
        assert!(
            coeffs.iter().all(|c| c.is_finite()),
            "non-finite coefficient in series"
        );
        TruncatedSeries { coeffs }
    }

    pub fn zeros(order: usize) -> Self {
        TruncatedSeries {
            coeffs: vec![0.0; order + 1],
        }
    }

    pub fn constant(c: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = c;
        Self::new(coeffs)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs[n]
    }

    /// Coefficientwise sum at the smaller of the two orders.
    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeffs[i] + other.coeffs[i]).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeffs[i] - other.coeffs[i]).collect())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Cauchy product truncated at the smaller order.
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, &a) in self.coeffs.iter().take(n).enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().take(n - i).enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Series division by the standard recurrence. The denominator needs a
    /// constant term bounded away from zero.
    pub fn divide(&self, den: &Self) -> Result<Self> {
        let d0 = den.coeffs[0];
        if d0.abs() <= EPS_DENOM {
            return Err(Error::NonUnitDenominator { d0 });
        }
        let n = self.coeffs.len().min(den.coeffs.len());
        let mut q = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.coeffs[i];
            for j in 1..=i.min(den.coeffs.len() - 1) {
                acc -= den.coeffs[j] * q[i - j];
            }
            q[i] = acc / d0;
        }
        Ok(Self::new(q))
    }

    /// Horner evaluation of `self`, treated as an exact polynomial, at a
    /// series argument. Result order is the inner order.
    pub fn compose_outer_poly(&self, inner: &Self) -> Self {
        let degree = self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
        let order = inner.order();
        let mut acc = Self::constant(self.coeffs[degree], order);
        for k in (0..degree).rev() {
            acc = acc.mul(inner);
            acc.coeffs[0] += self.coeffs[k];
        }
        acc
    }

    /// Termwise derivative; order drops by one.
    pub fn derivative(&self) -> Result<Self> {
        if self.order() == 0 {
            return Err(Error::ZeroOrder);
        }
        Ok(Self::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, &c)| (i + 1) as f64 * c)
                .collect(),
        ))
    }

    /// Horner evaluation at a scalar point.
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Tail vector of a distribution series: entry R is P(X >= R), computed
    /// by cumulative sums of the mass coefficients. Rejects series that are
    /// not close to a probability distribution; entries are clamped to [0,1].
    pub fn tail_transform(&self) -> Result<Self> {
        let min_coeff = self.coeffs.iter().cloned().fold(f64::INFINITY, f64::min);
        let sum: f64 = self.coeffs.iter().sum();
        if min_coeff < -EPS_DENOM || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::NotADistribution { sum, min_coeff });
        }
        let mut out = Vec::with_capacity(self.coeffs.len());
        let mut cum = 0.0f64;
        for &c in &self.coeffs {
            out.push((1.0 - cum).clamp(0.0, 1.0));
            cum += c.max(0.0);
        }
        Ok(Self::new(out))
    }
}
