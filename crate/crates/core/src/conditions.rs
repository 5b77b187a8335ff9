//! Conditions on the entries that drive concentration, as computable statistics.
//!
//! The Lindeberg functional of a matrix `X` at level `M` is
//! `(1/n^2) sum |X_ij|^2 1{|X_ij| > M}`; for an `n x N` matrix the
//! normalization is `1/(nN)` and the indicator reads `|X_ij|^2 > M`.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::entries::EntryLaw;
use crate::error::{invalid, Error, Result};
use crate::matrix::{EntryGrid, HermitianMatrix, RectMatrix};

/// Matrices accepted by the Lindeberg statistics.
pub trait LindebergInput: EntryGrid + Sized {
    /// Whether the indicator compares `|x|^2` (rather than `|x|`) with `M`.
    const SQUARED_INDICATOR: bool;

    /// Zeroes entries with `|x| > threshold`.
    fn truncated(&self, threshold: f64) -> Self;
}

impl LindebergInput for HermitianMatrix {
    const SQUARED_INDICATOR: bool = false;

    fn truncated(&self, threshold: f64) -> Self {
        self.map_entries(|z| keep_small(z, threshold))
    }
}

impl LindebergInput for RectMatrix {
    const SQUARED_INDICATOR: bool = true;

    fn truncated(&self, threshold: f64) -> Self {
        self.map_entries(|z| keep_small(z, threshold))
    }
}

fn keep_small(z: Complex64, threshold: f64) -> Complex64 {
    if z.norm() > threshold {
        Complex64::new(0.0, 0.0)
    } else {
        z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindebergReport {
    pub n: usize,
    pub threshold: f64,
    pub statistic: f64,
    pub exceed_count: usize,
    /// For the `L(a_n)` form: whether the statistic exceeds `eps`.
    pub exceeds_eps: Option<bool>,
}

/// Lindeberg statistic at level `m`.
pub fn lindeberg_stat<X: LindebergInput>(x: &X, m: f64) -> Result<LindebergReport> {
    if !(m >= 0.0) {
        return Err(invalid(format!("threshold must be >= 0, got {m}")));
    }
    let mut sum = 0.0;
    let mut exceed_count = 0;
    // Row-major, like `hs_norm_sqr`, so the truncation identity is exact.
    for z in x.data() {
        let a2 = z.norm_sqr();
        let over = if X::SQUARED_INDICATOR { a2 > m } else { z.norm() > m };
        if over {
            sum += a2;
            exceed_count += 1;
        }
    }
    Ok(LindebergReport {
        n: x.rows(),
        threshold: m,
        statistic: sum / (x.rows() * x.cols()).max(1) as f64,
        exceed_count,
        exceeds_eps: None,
    })
}

/// The `L(a_n)` statistic: level `eps * a_n`, flagged when above `eps`.
pub fn lindeberg_an_stat<X: LindebergInput>(x: &X, eps: f64, a_n: f64) -> Result<LindebergReport> {
    if !(eps > 0.0 && a_n > 0.0) {
        return Err(invalid(format!("eps and a_n must be positive, got {eps}, {a_n}")));
    }
    let mut report = lindeberg_stat(x, eps * a_n)?;
    report.exceeds_eps = Some(report.statistic > eps);
    Ok(report)
}

/// `X^t`: entries with `|x| > threshold` set to zero, the rest kept.
pub fn truncate<X: LindebergInput>(x: &X, threshold: f64) -> Result<X> {
    if !(threshold >= 0.0) {
        return Err(invalid(format!("threshold must be >= 0, got {threshold}")));
    }
    Ok(x.truncated(threshold))
}

/// Heavy-tail scale: returns `(b, b_n)` with `b = inf{t : l(t) > 0}` and
/// `b_n = inf{t > b + 1 : n l(t) <= t^2}`, to relative accuracy `1e-10`.
///
/// The first sign change of `n l(t) - t^2` is located by a geometric scan
/// (factor 1.5) from `b + 1`, then refined by bisection.
pub fn solve_bn(law: &EntryLaw, n: usize) -> Result<(f64, f64)> {
    law.validate()?;
    if law.has_finite_variance() {
        return Err(invalid(format!("`{law}` has finite variance; b_n is undefined")));
    }
    if n == 0 {
        return Err(invalid("n must be >= 1"));
    }
    let b = law.support_start();
    let nf = n as f64;
    let h = |t: f64| -> Result<f64> { Ok(nf * law.truncated_second_moment(t)? - t * t) };

    let start = b + 1.0;
    if h(start)? <= 0.0 {
        return Ok((b, start));
    }
    let mut lo = start;
    let mut hi = start * 1.5;
    let mut steps = 0;
    while h(hi)? > 0.0 {
        lo = hi;
        hi *= 1.5;
        steps += 1;
        if steps > 4000 || !hi.is_finite() {
            return Err(Error::NonFinite(format!("no crossing found for n = {n}")));
        }
    }
    while hi - lo > 1e-12 * hi {
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
    Ok((b, hi))
}

/// One row of the heavy-tail diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyTailRow {
    pub n: usize,
    pub b_n: f64,
    /// `n l(b_n) / b_n^2`, tends to 1.
    pub ratio_l: f64,
    /// `P(|x| > b_n) b_n^2 / l(b_n)`, tends to 0.
    pub ratio_tail: f64,
    /// `E|x| 1{|x| > b_n} b_n / l(b_n)`, tends to 0.
    pub ratio_mean: f64,
}

pub fn heavy_tail_diagnostics(law: &EntryLaw, n_list: &[usize]) -> Result<Vec<HeavyTailRow>> {
    n_list
        .iter()
        .map(|&n| {
            let (_, b_n) = solve_bn(law, n)?;
            let l = law.truncated_second_moment(b_n)?;
            Ok(HeavyTailRow {
                n,
                b_n,
                ratio_l: n as f64 * l / (b_n * b_n),
                ratio_tail: law.tail_probability(b_n) * b_n * b_n / l,
                ratio_mean: law.tail_abs_moment(b_n) * b_n / l,
            })
        })
        .collect()
}

/// CSV with header `n,b_n,ratio_l,ratio_tail,ratio_mean`.
pub fn diagnostics_csv(rows: &[HeavyTailRow]) -> String {
    let mut out = String::from("n,b_n,ratio_l,ratio_tail,ratio_mean\n");
    for r in rows {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?}",
            r.n, r.b_n, r.ratio_l, r.ratio_tail, r.ratio_mean
        )
        .unwrap();
    }
    out
}
