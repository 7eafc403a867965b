//! Exact distribution iteration on truncated state grids: the measurement
//! side of the crate, independent of the series machinery it validates.
//!
//! A step applies service, then arrivals, exactly as the slot dynamics
//! order them. Mass pushed past the grid edge is folded into the boundary
//! state, which conserves total mass and biases tails upward by at most
//! the reported clip rate.

use crate::error::{Error, Result};
use crate::pgf::Pgf;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Clipped mass per step above this means the boundary is load-bearing
/// and the chain has no trustworthy stationary regime at this grid size.
pub const CLIP_RATE_LIMIT: f64 = 1e-6;

pub const DEFAULT_N_MAX: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERATIONS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone)]
pub enum Dist {
    One(Vec<f64>),
    /// Row-major joint grid; index (x, y) lives at x·side + y.
    Two {
        side: usize,
        grid: Vec<f64>,
    },
}

impl Dist {
    pub fn marginal(&self, axis: Axis) -> Vec<f64> {
        match self {
            Dist::One(d) => {
                assert!(axis == Axis::X, "a 1D distribution has only the X axis");
                d.clone()
            }
            Dist::Two { side, grid } => match axis {
                Axis::X => grid
                    .chunks_exact(*side)
                    .map(|row| row.iter().sum())
                    .collect(),
                Axis::Y => {
                    let mut m = vec![0.0; *side];
                    for row in grid.chunks_exact(*side) {
                        for (y, v) in row.iter().enumerate() {
                            m[y] += v;
                        }
                    }
                    m
                }
            },
        }
    }

    pub fn total(&self) -> f64 {
        match self {
            Dist::One(d) => d.iter().sum(),
            Dist::Two { grid, .. } => grid.iter().sum(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub dist: Dist,
    pub iterations: u64,
    pub final_tv: f64,
    pub clipped_mass_rate: f64,
}

/// P(component ≥ R) for R = 0..=n_max. Built from the prefix sums so
/// entry 0 is exactly 1; negatives from rounding are clamped away.
pub fn tail_of(result: &OracleResult, axis: Axis) -> Vec<f64> {
    let marginal = result.dist.marginal(axis);
    let mut out = Vec::with_capacity(marginal.len());
    let mut cum = 0.0f64;
    for &m in &marginal {
        out.push((1.0 - cum).max(0.0));
        cum += m;
    }
    out
}

fn finite_probs(d: &Pgf) -> Result<&[f64]> {
    match d {
        Pgf::FiniteSupport { probs } => {
            let degree = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
            Ok(&probs[..=degree])
        }
        Pgf::GeometricShifted { .. } => Err(Error::UnsupportedKind),
    }
}

/// Serve (down by one with probability service_p), then convolve arrivals,
/// folding overflow into state n. Returns the overflow mass.
fn step_1d(a: &[f64], service_p: f64, cur: &[f64], mid: &mut [f64], out: &mut [f64]) -> f64 {
    let n = cur.len() - 1;
    mid.fill(0.0);
    mid[0] = cur[0];
    for k in 1..=n {
        mid[k - 1] += service_p * cur[k];
        mid[k] += (1.0 - service_p) * cur[k];
    }
    out.fill(0.0);
    let mut clipped = 0.0;
    for (x, &m) in mid.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for (k, &pk) in a.iter().enumerate() {
            let t = x + k;
            if t <= n {
                out[t] += m * pk;
            } else {
                out[n] += m * pk;
                clipped += m * pk;
            }
        }
    }
    clipped
}

/// Half the L1 distance between two distributions, accumulated row by row
/// so the result does not depend on how the grid was produced.
fn tv_half(a: &[f64], b: &[f64], side: usize) -> f64 {
    let mut total = 0.0;
    for (ra, rb) in a.chunks_exact(side).zip(b.chunks_exact(side)) {
        let mut row = 0.0;
        for (x, y) in ra.iter().zip(rb) {
            row += (x - y).abs();
        }
        total += row;
    }
    0.5 * total
}

/// Stationary distribution of the one-queue chain by exact iteration from
/// the empty state, stopping when consecutive distributions are within
/// `tol` in total variation.
pub fn stationary_1d(
    a: &Pgf,
    service_p: f64,
    n_max: usize,
    tol: f64,
    max_iterations: u64,
) -> Result<OracleResult> {
    let probs = finite_probs(a)?;
    if !(service_p > 0.0 && service_p <= 1.0) {
        return Err(Error::InvalidProbability { p: service_p });
    }
    assert!(tol > 0.0, "tolerance must be positive");
    assert!(n_max + 1 >= probs.len(), "grid must hold one arrival batch");

    let mut cur = vec![0.0; n_max + 1];
    cur[0] = 1.0;
    let mut mid = vec![0.0; n_max + 1];
    let mut next = vec![0.0; n_max + 1];
    let mut iterations = 0u64;
    loop {
        let clipped = step_1d(probs, service_p, &cur, &mut mid, &mut next);
        iterations += 1;
        let tv = tv_half(&cur, &next, n_max + 1);
        std::mem::swap(&mut cur, &mut next);
        if tv < tol {
            if clipped > CLIP_RATE_LIMIT {
                return Err(Error::Unstable {
                    mean: clipped,
                    limit: CLIP_RATE_LIMIT,
                });
            }
            return Ok(OracleResult {
                dist: Dist::One(cur),
                iterations,
                final_tv: tv,
                clipped_mass_rate: clipped,
            });
        }
        if iterations >= max_iterations {
            return Err(Error::NoConvergence { iterations });
        }
    }
}

/// Exact distribution of the queue after `t` slots from the empty state.
pub fn transient_1d(a: &Pgf, service_p: f64, t: usize, n_max: usize) -> Result<Vec<f64>> {
    let probs = finite_probs(a)?;
    if !(service_p > 0.0 && service_p <= 1.0) {
        return Err(Error::InvalidProbability { p: service_p });
    }
    assert!(n_max + 1 >= probs.len(), "grid must hold one arrival batch");
    let mut cur = vec![0.0; n_max + 1];
    cur[0] = 1.0;
    let mut mid = vec![0.0; n_max + 1];
    let mut next = vec![0.0; n_max + 1];
    for _ in 0..t {
        step_1d(probs, service_p, &cur, &mut mid, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// One synchronous update of a joint (first queue, second queue) grid.
///
/// The first queue always serves one packet when nonempty. With `relay`
/// the served packet re-enters the second queue (queues in series);
/// without it the second queue is served exactly when the first is empty
/// (strict priority). Arrivals then convolve along each axis, overflow
/// folded into the boundary.
///
/// Every public entry point computes each output row independently with a
/// fixed within-row order, so the parallel and sequential paths produce
/// bitwise-identical grids.
pub struct GridStep {
    side: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    relay: bool,
}

impl GridStep {
    pub fn priority(a: &Pgf, b: &Pgf, n_max: usize) -> Result<Self> {
        Self::new(a, b, n_max, false)
    }

    pub fn tandem(a: &Pgf, b: &Pgf, n_max: usize) -> Result<Self> {
        Self::new(a, b, n_max, true)
    }

    fn new(a: &Pgf, b: &Pgf, n_max: usize, relay: bool) -> Result<Self> {
        let a = finite_probs(a)?.to_vec();
        let b = finite_probs(b)?.to_vec();
        assert!(n_max + 1 >= a.len(), "grid must hold one first-flow batch");
        assert!(n_max + 1 >= b.len(), "grid must hold one second-flow batch");
        assert!(
            n_max >= 1,
            "a joint grid needs at least two states per axis"
        );
        Ok(GridStep {
            side: n_max + 1,
            a,
            b,
            relay,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Point mass at (0, 0), the empty system.
    pub fn initial_grid(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.side * self.side];
        g[0] = 1.0;
        g
    }

    /// Service phase, gathered per output row. Row r > 0 receives source
    /// row r+1 (one packet served); row 0 receives rows 0 and 1. The
    /// second coordinate moves by the policy: priority serves it only
    /// from x = 0 rows, relay re-inserts the packet served from x > 0.
    fn serve_row(&self, r: usize, cur: &[f64], out: &mut [f64]) {
        let side = self.side;
        let n = side - 1;
        out.fill(0.0);
        if r == 0 {
            let row0 = &cur[0..side];
            // x = 0: second queue serves one if present
            out[0] += row0[0] + row0[1];
            for y in 1..n {
                out[y] += row0[y + 1];
            }
            let row1 = &cur[side..2 * side];
            if self.relay {
                add_relayed(row1, out);
            } else {
                for (o, v) in out.iter_mut().zip(row1) {
                    *o += v;
                }
            }
            return;
        }
        if r < n {
            let src = &cur[(r + 1) * side..(r + 2) * side];
            if self.relay {
                add_relayed(src, out);
            } else {
                out.copy_from_slice(src);
            }
        }
        // nothing maps onto row n: its sources would need x = n + 1
    }

    /// First-flow arrival convolution across rows; the boundary row also
    /// absorbs overflow and reports it.
    fn arrive_x_row(&self, r: usize, mid: &[f64], out: &mut [f64]) -> f64 {
        let side = self.side;
        let n = side - 1;
        out.fill(0.0);
        if r < n {
            for (k, &pk) in self.a.iter().enumerate() {
                if pk == 0.0 || k > r {
                    continue;
                }
                let src = &mid[(r - k) * side..(r - k + 1) * side];
                for (o, v) in out.iter_mut().zip(src) {
                    *o += pk * v;
                }
            }
            return 0.0;
        }
        let mut clipped = 0.0;
        for (k, &pk) in self.a.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            for x in (n - k)..=n {
                let src = &mid[x * side..(x + 1) * side];
                for (o, v) in out.iter_mut().zip(src) {
                    *o += pk * v;
                }
                if x > n - k {
                    clipped += pk * src.iter().sum::<f64>();
                }
            }
        }
        clipped
    }

    /// Second-flow arrival convolution within one row, overflow folded
    /// into the last column and reported.
    fn arrive_y_row(&self, src: &[f64], out: &mut [f64]) -> f64 {
        let n = self.side - 1;
        out.fill(0.0);
        let mut clipped = 0.0;
        for (j, &pj) in self.b.iter().enumerate() {
            if pj == 0.0 {
                continue;
            }
            for y in j..n {
                out[y] += pj * src[y - j];
            }
            let mut boundary = src[n - j];
            for &v in &src[n - j + 1..=n] {
                boundary += v;
                clipped += pj * v;
            }
            out[n] += pj * boundary;
        }
        clipped
    }

    pub fn apply_seq(&self, cur: &[f64], mid: &mut [f64], tmp: &mut [f64], out: &mut [f64]) -> f64 {
        let side = self.side;
        for (r, row) in mid.chunks_exact_mut(side).enumerate() {
            self.serve_row(r, cur, row);
        }
        let mut clipped = 0.0;
        for (r, row) in tmp.chunks_exact_mut(side).enumerate() {
            clipped += self.arrive_x_row(r, mid, row);
        }
        for (src, row) in tmp.chunks_exact(side).zip(out.chunks_exact_mut(side)) {
            clipped += self.arrive_y_row(src, row);
        }
        clipped
    }

    #[cfg(feature = "parallel")]
    pub fn apply_par(&self, cur: &[f64], mid: &mut [f64], tmp: &mut [f64], out: &mut [f64]) -> f64 {
        let side = self.side;
        mid.par_chunks_exact_mut(side)
            .enumerate()
            .for_each(|(r, row)| self.serve_row(r, cur, row));
        let mid_ro: &[f64] = mid;
        let clip_x: Vec<f64> = tmp
            .par_chunks_exact_mut(side)
            .enumerate()
            .map(|(r, row)| self.arrive_x_row(r, mid_ro, row))
            .collect();
        let tmp_ro: &[f64] = tmp;
        let clip_y: Vec<f64> = out
            .par_chunks_exact_mut(side)
            .enumerate()
            .map(|(r, row)| self.arrive_y_row(&tmp_ro[r * side..(r + 1) * side], row))
            .collect();
        // ordered reduction: same addition order as the sequential path
        let mut clipped = 0.0;
        for c in clip_x {
            clipped += c;
        }
        for c in clip_y {
            clipped += c;
        }
        clipped
    }

    pub fn apply(&self, cur: &[f64], mid: &mut [f64], tmp: &mut [f64], out: &mut [f64]) -> f64 {
        #[cfg(feature = "parallel")]
        {
            self.apply_par(cur, mid, tmp, out)
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.apply_seq(cur, mid, tmp, out)
        }
    }
}

/// Gather for y' = (y−1)_+ + 1: the relayed packet keeps the second queue
/// from ever emptying below 1 in this phase.
fn add_relayed(src: &[f64], out: &mut [f64]) {
    out[1] += src[0] + src[1];
    for y in 2..src.len() {
        out[y] += src[y];
    }
}

fn stationary_2d(step: &GridStep, tol: f64, max_iterations: u64) -> Result<OracleResult> {
    assert!(tol > 0.0, "tolerance must be positive");
    let side = step.side();
    let mut cur = step.initial_grid();
    let mut mid = vec![0.0; side * side];
    let mut tmp = vec![0.0; side * side];
    let mut next = vec![0.0; side * side];
    let mut iterations = 0u64;
    loop {
        let clipped = step.apply(&cur, &mut mid, &mut tmp, &mut next);
        iterations += 1;
        let tv = tv_half(&cur, &next, side);
        std::mem::swap(&mut cur, &mut next);
        if tv < tol {
            if clipped > CLIP_RATE_LIMIT {
                return Err(Error::Unstable {
                    mean: clipped,
                    limit: CLIP_RATE_LIMIT,
                });
            }
            return Ok(OracleResult {
                dist: Dist::Two { side, grid: cur },
                iterations,
                final_tv: tv,
                clipped_mass_rate: clipped,
            });
        }
        if iterations >= max_iterations {
            return Err(Error::NoConvergence { iterations });
        }
    }
}

/// Joint stationary distribution where the second flow is served only
/// while the first queue is empty.
pub fn stationary_2d_priority(
    a: &Pgf,
    b: &Pgf,
    n_max: usize,
    tol: f64,
    max_iterations: u64,
) -> Result<OracleResult> {
    stationary_2d(&GridStep::priority(a, b, n_max)?, tol, max_iterations)
}

/// Joint stationary distribution of two queues in series: every packet
/// served by the first queue re-enters the second.
pub fn stationary_2d_tandem(
    a: &Pgf,
    b: &Pgf,
    n_max: usize,
    tol: f64,
    max_iterations: u64,
) -> Result<OracleResult> {
    stationary_2d(&GridStep::tandem(a, b, n_max)?, tol, max_iterations)
}
