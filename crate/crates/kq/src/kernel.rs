//! Tree generating functions and the characteristic roots of the queue
//! kernels.
//!
//! T solves T(z) = z·A(T(z)). Its radius rho and the tangency abscissa tau
//! come from A(x) = x·A'(x); the roots beta, gamma, delta drive the tail
//! asymptotics of the four models.

use crate::error::{Error, Result};
use crate::pgf::Pgf;
use crate::series::TruncatedSeries;

/// Residual target for every scalar root in this module.
const ROOT_TOL: f64 = 1e-13;

/// Bracket-expansion doublings are capped to guarantee termination.
const MAX_DOUBLINGS: u64 = 60;

#[derive(Debug, Clone)]
pub struct TreeFunction {
    offspring: Pgf,
    tau: f64,
    rho: f64,
}

impl TreeFunction {
    /// Solves the tangency equation A(x) = x·A'(x) for tau and sets
    /// rho = tau/A(tau). Linear offspring carry infinite sentinels; their
    /// tree function is rational with a plain pole instead of a branch
    /// point.
    pub fn build(a: &Pgf) -> Result<Self> {
        let mean = a.mean();
        if mean >= 1.0 {
            return Err(Error::Unstable { mean, limit: 1.0 });
        }
        if a.p0() <= 0.0 {
            return Err(Error::NeverEmpty);
        }
        if a.is_linear() {
            return Ok(TreeFunction {
                offspring: a.clone(),
                tau: f64::INFINITY,
                rho: f64::INFINITY,
            });
        }
        // f(x) = x·A'(x) − A(x) is negative at 1 (mean < 1) and eventually
        // positive for degree ≥ 2
        let f = |x: f64| -> Result<f64> { Ok(x * a.deriv(x)? - a.eval(x)?) };
        let mut hi = 2.0;
        let mut doublings = 0;
        while f(hi)? <= 0.0 {
            hi *= 2.0;
            doublings += 1;
            if doublings > MAX_DOUBLINGS {
                return Err(Error::NoConvergence {
                    iterations: doublings,
                });
            }
        }
        let mut lo = 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid)? <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut tau = 0.5 * (lo + hi);
        for _ in 0..60 {
            let r = f(tau)?;
            if r.abs() < ROOT_TOL {
                break;
            }
            let slope = tau * a.deriv2(tau)?;
            if slope.abs() < 1e-300 {
                break;
            }
            let next = tau - r / slope;
            if !next.is_finite() || next <= 1.0 {
                break;
            }
            tau = next;
        }
        let rho = tau / a.eval(tau)?;
        Ok(TreeFunction {
            offspring: a.clone(),
            tau,
            rho,
        })
    }

    pub fn offspring(&self) -> &Pgf {
        &self.offspring
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Where evaluation actually stops being possible: the tangency radius,
    /// or the pole 1/P(A=1) of the rational tree function when the
    /// offspring is linear.
    fn radius(&self) -> f64 {
        if self.rho.is_finite() {
            return self.rho;
        }
        match &self.offspring {
            Pgf::FiniteSupport { probs } if probs.len() > 1 && probs[1] > 0.0 => 1.0 / probs[1],
            _ => f64::INFINITY,
        }
    }

    /// Smallest non-negative root of x = z·A(x): bisection on [0, tau]
    /// keeps the small branch even at the tangency, Newton then polishes
    /// the residual below 1e-13.
    pub fn eval(&self, z: f64) -> Result<f64> {
        if z < 0.0 {
            return Err(Error::OutOfDomain { x: z });
        }
        let radius = self.radius();
        if z > radius + 1e-12 {
            return Err(Error::BeyondRadius { z, rho: radius });
        }
        if z == 0.0 {
            return Ok(0.0);
        }
        let a = &self.offspring;
        if a.is_linear() {
            let (a0, a1) = match a {
                Pgf::FiniteSupport { probs } => (probs[0], probs.get(1).copied().unwrap_or(0.0)),
                Pgf::GeometricShifted { .. } => (0.0, 1.0),
            };
            let den = 1.0 - z * a1;
            if den <= 0.0 {
                return Err(Error::BeyondRadius { z, rho: radius });
            }
            return Ok(a0 * z / den);
        }
        let g = |x: f64| -> Result<f64> { Ok(x - z * a.eval(x)?) };
        let mut lo = 0.0;
        let mut hi = self.tau;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..60 {
            let r = g(x)?;
            if r.abs() < ROOT_TOL {
                break;
            }
            let slope = 1.0 - z * a.deriv(x)?;
            if slope.abs() < 1e-300 {
                break;
            }
            let next = x - r / slope;
            if !next.is_finite() || !(0.0..=self.tau).contains(&next) {
                break;
            }
            if next == x {
                break;
            }
            x = next;
        }
        Ok(x)
    }

    /// d/dz of the tree function, A(T)/(1 − z·A'(T)). The denominator
    /// vanishes at the radius.
    pub fn deriv(&self, z: f64) -> Result<f64> {
        let radius = self.radius();
        if z >= radius {
            return Err(Error::BeyondRadius { z, rho: radius });
        }
        let t = self.eval(z)?;
        Ok(self.offspring.eval(t)? / (1.0 - z * self.offspring.deriv(t)?))
    }

    /// Coefficients of T up to `order` by the fixed-point map T ← z·A(T);
    /// each pass pins one more coefficient, so `order` passes suffice.
    pub fn series(&self, order: usize) -> TruncatedSeries {
        assert!(order >= 1, "series order must be positive");
        let a_poly = self.offspring_poly();
        let mut t = TruncatedSeries::zeros(order);
        for _ in 0..order {
            let a_of_t = a_poly.compose_outer_poly(&t);
            let mut shifted = vec![0.0; order + 1];
            shifted[1..].copy_from_slice(&a_of_t.coeffs()[..order]);
            t = TruncatedSeries::new(shifted);
        }
        t
    }

    /// Coefficients of 1/(1 − T(z)); entry t is the probability that the
    /// initially-empty single queue is empty at slot t.
    pub fn empty_probability_series(&self, t_max: usize) -> TruncatedSeries {
        if t_max == 0 {
            return TruncatedSeries::constant(1.0, 0);
        }
        let t = self.series(t_max);
        let one = TruncatedSeries::constant(1.0, t_max);
        one.divide(&one.sub(&t))
            .expect("1 - T has unit constant term")
    }

    fn offspring_poly(&self) -> TruncatedSeries {
        let degree = self.offspring.degree().unwrap_or(0);
        self.offspring.as_series(degree.max(1))
    }
}

/// The solution beta > 1 of A(u) = u; the kernel root behind the
/// single-queue reference martingale.
pub fn second_fixed_point(a: &Pgf) -> Result<f64> {
    let mean = a.mean();
    if mean >= 1.0 {
        return Err(Error::Unstable { mean, limit: 1.0 });
    }
    if a.is_linear() {
        return Err(Error::DegenerateLinear);
    }
    solve_increasing_crossing(|u| Ok(a.eval(u)? - u), |u| Ok(a.deriv(u)? - 1.0))
}

/// The root gamma > 1 of A(u)·S(1/u) = 1 for Bernoulli service with
/// success probability p; collapses to beta when p = 1.
pub fn geometric_kernel_root(a: &Pgf, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability { p });
    }
    let mean = a.mean();
    if mean >= p {
        return Err(Error::Unstable { mean, limit: p });
    }
    if a.is_linear() {
        return Err(Error::DegenerateLinear);
    }
    let q = 1.0 - p;
    solve_increasing_crossing(
        |u| Ok(a.eval(u)? * (q * u + p) - u),
        |u| Ok(a.deriv(u)? * (q * u + p) + a.eval(u)? * q - 1.0),
    )
}

/// Finds the crossing above 1 of a function that is negative just above 1
/// and eventually positive: doubling bracket, bisection, Newton polish.
fn solve_increasing_crossing(
    f: impl Fn(f64) -> Result<f64>,
    fprime: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let mut hi = 2.0;
    let mut doublings = 0;
    while f(hi)? <= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::NoConvergence {
                iterations: doublings,
            });
        }
    }
    let mut lo = 1.0 + 1e-9;
    if f(lo)? >= 0.0 {
        // crossing sits against the lower end; fall through with a thin
        // bracket so Newton does the work
        lo = 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..60 {
        let r = f(u)?;
        if r.abs() < ROOT_TOL {
            break;
        }
        let slope = fprime(u)?;
        if slope.abs() < 1e-300 {
            break;
        }
        let next = u - r / slope;
        if !next.is_finite() || next <= 1.0 {
            break;
        }
        if next == u {
            break;
        }
        u = next;
    }
    Ok(u)
}

/// Series W(v) = T_A(B(v)), the tree function taken at the second flow's
/// PGF, solving W = B·A(W). Series Newton doubles the number of correct
/// coefficients per step; the scalar seed T_A(B(0)) matches the nonzero
/// constant term.
pub fn tree_compose_series(a: &Pgf, b: &Pgf, order: usize) -> Result<TruncatedSeries> {
    let b_probs = match b {
        Pgf::FiniteSupport { probs } => probs,
        Pgf::GeometricShifted { .. } => return Err(Error::UnsupportedKind),
    };
    let b0 = b_probs[0];
    if b0 <= 0.0 {
        return Err(Error::DegenerateBoundary { b0 });
    }
    let joint_mean = a.mean() + b.mean();
    if joint_mean >= 1.0 {
        return Err(Error::Unstable {
            mean: joint_mean,
            limit: 1.0,
        });
    }
    let tree = TreeFunction::build(a)?;
    let a_poly = tree.offspring_poly();
    let a_poly_deriv = a_poly
        .derivative()
        .expect("offspring poly has positive order");
    let b_series = b.as_series(order);

    let mut w = TruncatedSeries::constant(tree.eval(b0)?, order);
    for _ in 0..200 {
        let a_of_w = a_poly.compose_outer_poly(&w);
        let residual = w.sub(&b_series.mul(&a_of_w));
        let worst = residual.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if worst < ROOT_TOL {
            return Ok(w);
        }
        let denom = TruncatedSeries::constant(1.0, order)
            .sub(&b_series.mul(&a_poly_deriv.compose_outer_poly(&w)));
        w = w.sub(&residual.divide(&denom)?);
    }
    Err(Error::NoConvergence { iterations: 200 })
}

/// The largest solution delta > 1 of v = T_A(B(v)). The search is capped
/// at v_max where B reaches the radius of T_A; if the curve never crosses
/// the diagonal there, the dominant singularity is the branch point and no
/// simple-pole asymptotic exists.
pub fn composite_tree_root(a: &Pgf, b: &Pgf) -> Result<f64> {
    let b_probs = match b {
        Pgf::FiniteSupport { probs } => probs,
        Pgf::GeometricShifted { .. } => return Err(Error::UnsupportedKind),
    };
    if b_probs[0] <= 0.0 {
        return Err(Error::DegenerateBoundary { b0: b_probs[0] });
    }
    let joint_mean = a.mean() + b.mean();
    if joint_mean >= 1.0 {
        return Err(Error::Unstable {
            mean: joint_mean,
            limit: 1.0,
        });
    }
    if b.mean() == 0.0 {
        // B ≡ 1 pins W at 1; the curve never returns to the diagonal
        return Err(Error::NoPoleSingularity {
            h_at_vmax: f64::INFINITY,
        });
    }
    let tree = TreeFunction::build(a)?;
    let cap = tree.radius();

    // v_max: B(v_max) = cap, bisected from below so B stays evaluable
    let mut hi = 2.0;
    let mut doublings = 0;
    while b.eval(hi)? < cap {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::NoConvergence {
                iterations: doublings,
            });
        }
    }
    let mut lo = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if b.eval(mid)? < cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v_max = lo;

    // rounding can push B(v) a hair past the radius; that deep in the
    // bracket the curve is far above the diagonal, so treat it as h < 0
    let h = |v: f64| -> Result<f64> {
        match tree.eval(b.eval(v)?) {
            Ok(w) => Ok(v - w),
            Err(Error::BeyondRadius { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    };
    let h_at_vmax = h(v_max)?;
    if h_at_vmax > 0.0 {
        return Err(Error::NoPoleSingularity { h_at_vmax });
    }

    let mut lo = 1.0 + 1e-9;
    let mut hi = v_max;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..60 {
        let r = h(v)?;
        if r.abs() < ROOT_TOL {
            break;
        }
        if !r.is_finite() {
            v = lo;
            continue;
        }
        let slope = 1.0 - b.deriv(v)? * tree.deriv(b.eval(v)?)?;
        if slope.abs() < 1e-300 {
            break;
        }
        let next = v - r / slope;
        if !next.is_finite() || next <= 1.0 || next > v_max {
            break;
        }
        if next == v {
            break;
        }
        v = next;
    }
    Ok(v)
}
