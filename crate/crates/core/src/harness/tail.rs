use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::ensembles::{sample_matrix, EnsembleSpec};
use crate::entries::{parse_params, split_kind, RngStream};
use crate::error::{invalid, Error, Result};
use crate::spectra::esd;

/// Smallest replica count accepted by [`tail_profile`].
pub const MIN_TAIL_REPLICAS: usize = 100;

/// Test functions for linear statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `min(|x|, cap)`.
    ClippedAbs { cap: f64 },
    /// `(width - |x - center|)+`, 1-Lipschitz.
    Tent { center: f64, width: f64 },
}

impl Default for TestFunction {
    fn default() -> Self {
        TestFunction::ClippedAbs { cap: 1.0 }
    }
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::ClippedAbs { cap } => x.abs().min(cap),
            TestFunction::Tent { center, width } => (width - (x - center).abs()).max(0.0),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::ClippedAbs { cap } => write!(f, "clipped_abs:cap={cap:?}"),
            TestFunction::Tent { center, width } => write!(f, "tent:center={center:?},width={width:?}"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;
    /// `clipped_abs[:cap=1]` or `tent[:center=0,width=1]`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = split_kind(s);
        let params = parse_params(rest)?;
        let allowed: &[&str] = match kind {
            "clipped_abs" => &["cap"],
            "tent" => &["center", "width"],
            other => return Err(Error::Parse(format!("unknown test function `{other}`"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::Parse(format!("unknown parameter `{k}` for `{kind}`")));
        }
        let num = |key: &str, default: f64| -> Result<f64> {
            match params.iter().find(|(k, _)| k == key) {
                Some((_, v)) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Parse(format!("invalid value `{v}` for `{key}`"))),
                None => Ok(default),
            }
        };
        let out = match kind {
            "clipped_abs" => TestFunction::ClippedAbs { cap: num("cap", 1.0)? },
            _ => TestFunction::Tent {
                center: num("center", 0.0)?,
                width: num("width", 1.0)?,
            },
        };
        match out {
            TestFunction::ClippedAbs { cap } if cap <= 0.0 => Err(Error::Parse("cap must be positive".into())),
            TestFunction::Tent { width, .. } if width <= 0.0 => Err(Error::Parse("width must be positive".into())),
            _ => Ok(out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub t: f64,
    /// Fraction of replicas with `|F - mean| > t`.
    pub frequency: f64,
}

/// Empirical deviation profile of the linear statistic
/// `F = int f dL(X / sqrt n)`, with a least-squares fit of
/// `ln frequency` against `t^2` over the rows with nonzero frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct TailProfile {
    pub n: usize,
    pub replicas: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub rows: Vec<TailRow>,
    /// `None` when fewer than two rows are usable.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
}

impl TailProfile {
    /// CSV with header `t,frequency`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,frequency\n");
        for r in &self.rows {
            writeln!(out, "{:?},{:?}", r.t, r.frequency).unwrap();
        }
        out
    }
}

/// `points` values evenly spaced on `(0, 4 sd]`, for when no grid is given.
pub fn auto_t_grid(std_dev: f64, points: usize) -> Vec<f64> {
    (1..=points)
        .map(|k| 4.0 * std_dev * k as f64 / points as f64)
        .collect()
}

/// Deviation profile of `int f dL_n` over `replicas` draws, each from
/// `seed / n / replica`. An empty `t_grid` selects [`auto_t_grid`] with 16
/// points.
pub fn tail_profile(
    ensemble: &EnsembleSpec,
    n: usize,
    replicas: usize,
    f: impl Fn(f64) -> f64 + Sync,
    t_grid: &[f64],
    seed: u64,
) -> Result<TailProfile> {
    if replicas < MIN_TAIL_REPLICAS {
        return Err(invalid(format!(
            "tail profiles need at least {MIN_TAIL_REPLICAS} replicas, got {replicas}"
        )));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("t grid values must be finite and >= 0"));
    }
    let stream = RngStream::new(seed).derive(n as u64);
    let scale = (n as f64).sqrt();
    let stats: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let x = sample_matrix(ensemble, n, &stream.derive(r as u64))?;
            esd(&x, scale)?.integrate(&f)
        })
        .collect::<Result<_>>()?;
    let mean = stats.iter().sum::<f64>() / replicas as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (replicas - 1) as f64;
    let std_dev = var.sqrt();
    let grid = if t_grid.is_empty() {
        auto_t_grid(std_dev, 16)
    } else {
        t_grid.to_vec()
    };
    let rows: Vec<TailRow> = grid
        .iter()
        .map(|&t| TailRow {
            t,
            frequency: stats.iter().filter(|s| (*s - mean).abs() > t).count() as f64 / replicas as f64,
        })
        .collect();

    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.frequency > 0.0)
        .map(|r| (r.t * r.t, r.frequency.ln()))
        .collect();
    let (slope, intercept, r_squared) = fit_line(&pts);
    Ok(TailProfile {
        n,
        replicas,
        mean,
        std_dev,
        rows,
        slope,
        intercept,
        r_squared,
    })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, R^2)`.
fn fit_line(pts: &[(f64, f64)]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let k = pts.len() as f64;
    if pts.len() < 2 {
        return (None, None, None);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return (None, None, None);
    }
    let a = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (Some(a), Some(my - a * mx), Some(r2))
}
