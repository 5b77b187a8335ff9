//! Staircase approximation of compactly supported 1-Lipschitz functions by
//! sums of convex and concave 1-Lipschitz pieces, plus numerical checkers
//! for the matrix inequalities the concentration argument relies on.
//!
//! Starting from `g_0 = 0`, the approximant adds one ramp of width `delta`
//! per step, `g_{k+1}(x) = g_k(x) +- clamp(x + M - k delta, 0, delta)`,
//! going up when `f` at the next grid point lies above the current level and
//! down when it lies below. After `ceil(2M / delta)` steps the sup error is at
//! most `delta`. Runs of ramps with the same sign merge into one long ramp,
//! which is the difference of two hinges `max(x - a, 0)`: one convex piece
//! and one concave piece per run.

mod lemmas;
mod sweep;

pub use lemmas::{
    check_functional_lipschitz, check_hoffman_wielandt, check_klein_convexity,
    check_moment_estimate, check_rank_inequality,
};
pub use sweep::{run_lemma_sweeps, sweeps_csv, SweepConfig, SweepResult};

use crate::error::{invalid, Result};

/// Grid resolution used to validate inputs and pieces.
pub const CHECK_GRID_POINTS: usize = 4096;
/// Slack allowed in grid Lipschitz checks of the input.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;

/// `sign * clamp(x + offset, 0, delta)`; `sign` is `+1`, `-1` or `0` for a
/// flat step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecewiseRamp {
    pub offset: f64,
    pub sign: f64,
    pub delta: f64,
}

impl PiecewiseRamp {
    pub fn eval(&self, x: f64) -> f64 {
        self.sign * (x + self.offset).clamp(0.0, self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Convex,
    Concave,
}

/// `sign * max(x - knot, 0)` with `sign = +-1`: convex for `+1`, concave
/// for `-1`, 1-Lipschitz either way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hinge {
    pub knot: f64,
    pub sign: f64,
}

impl Hinge {
    pub fn eval(&self, x: f64) -> f64 {
        self.sign * (x - self.knot).max(0.0)
    }

    pub fn curvature(&self) -> Curvature {
        if self.sign > 0.0 {
            Curvature::Convex
        } else {
            Curvature::Concave
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzDecomposition {
    /// Convex and concave pieces summing to `f_delta`.
    pub pieces: Vec<Hinge>,
    /// The ramps of the recursion, one per step.
    pub ramps: Vec<PiecewiseRamp>,
    pub kappa: usize,
    pub delta: f64,
    pub m: f64,
}

impl LipschitzDecomposition {
    /// `f_delta(x)` as the sum of the pieces.
    pub fn eval(&self, x: f64) -> f64 {
        self.pieces.iter().map(|p| p.eval(x)).sum()
    }

    /// `f_delta(x)` as the sum of the ramps.
    pub fn eval_ramps(&self, x: f64) -> f64 {
        self.ramps.iter().map(|r| r.eval(x)).sum()
    }

    /// Number of steps `ceil(2M / delta)`; `kappa <= 2 * steps`.
    pub fn steps(&self) -> usize {
        self.ramps.len()
    }
}

/// Builds `f_delta` for `f` supported in `[-m, m]`.
///
/// `f` is checked on a grid of [`CHECK_GRID_POINTS`] points over
/// `[-m - 1, m + 1]`: it must be 1-Lipschitz (slack [`LIPSCHITZ_SLACK`]) and
/// vanish outside `[-m, m]`.
pub fn build_f_delta(f: impl Fn(f64) -> f64, m: f64, delta: f64) -> Result<LipschitzDecomposition> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid(format!("support half-width must be positive, got {m}")));
    }
    check_input(&f, m)?;

    let steps = (2.0 * m / delta).ceil() as usize;
    let mut ramps = Vec::with_capacity(steps);
    let mut level = 0.0;
    for k in 0..steps {
        let target = f(-m + (k + 1) as f64 * delta);
        // An exact tie keeps the level flat, so f = 0 gives f_delta = 0.
        let sign = if target > level {
            1.0
        } else if target < level {
            -1.0
        } else {
            0.0
        };
        level += sign * delta;
        ramps.push(PiecewiseRamp {
            offset: m - k as f64 * delta,
            sign,
            delta,
        });
    }

    // Merge runs of equal sign into hinge pairs.
    let mut pieces = Vec::new();
    let mut k = 0;
    while k < steps {
        let sign = ramps[k].sign;
        let mut end = k + 1;
        while end < steps && ramps[end].sign == sign {
            end += 1;
        }
        if sign != 0.0 {
            let a = -m + k as f64 * delta;
            let b = -m + end as f64 * delta;
            pieces.push(Hinge { knot: a, sign });
            pieces.push(Hinge { knot: b, sign: -sign });
        }
        k = end;
    }
    Ok(LipschitzDecomposition {
        kappa: pieces.len(),
        pieces,
        ramps,
        delta,
        m,
    })
}

fn check_input(f: &impl Fn(f64) -> f64, m: f64) -> Result<()> {
    let (lo, hi) = (-m - 1.0, m + 1.0);
    let h = (hi - lo) / (CHECK_GRID_POINTS - 1) as f64;
    let mut prev = f(lo);
    for k in 0..CHECK_GRID_POINTS {
        let x = lo + k as f64 * h;
        let y = f(x);
        if !y.is_finite() {
            return Err(invalid(format!("f({x}) is not finite")));
        }
        if x.abs() > m && y.abs() > LIPSCHITZ_SLACK {
            return Err(invalid(format!("f({x}) = {y} but f must vanish outside [-{m}, {m}]")));
        }
        if k > 0 && (y - prev).abs() > h + LIPSCHITZ_SLACK {
            return Err(invalid(format!(
                "f is not 1-Lipschitz near {x}: jump {} over step {h}",
                (y - prev).abs()
            )));
        }
        prev = y;
    }
    Ok(())
}

/// Piecewise-linear interpolation through knots with increasing abscissae,
/// constant beyond the end knots.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(invalid("need at least one knot"));
        }
        if knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(invalid("knot abscissae must be strictly increasing"));
        }
        Ok(PiecewiseLinear { knots })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|p| p.0 < x);
        if i == 0 {
            return k[0].1;
        }
        if i == k.len() {
            return k[i - 1].1;
        }
        let (a, b) = (k[i - 1], k[i]);
        a.1 + (x - a.0) / (b.0 - a.0) * (b.1 - a.1)
    }

    /// Largest absolute slope.
    pub fn lipschitz_constant(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max)
    }
}

/// Largest `|f - f_delta|` over `points` grid points of `[-m - 1, m + 1]`.
pub fn grid_sup_error(f: impl Fn(f64) -> f64, approx: &LipschitzDecomposition, points: usize) -> f64 {
    let (lo, hi) = (-approx.m - 1.0, approx.m + 1.0);
    let h = (hi - lo) / (points.max(2) - 1) as f64;
    (0..points.max(2))
        .map(|k| {
            let x = lo + k as f64 * h;
            (f(x) - approx.eval(x)).abs()
        })
        .fold(0.0, f64::max)
}
