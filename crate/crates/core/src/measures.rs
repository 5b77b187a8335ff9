//! Probability measures on the line: finitely supported empirical measures,
//! the distances between them, and the reference limit laws.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};

/// Atoms closer than this (relative to `max(1, |x|)`) are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Finitely supported probability measure: sorted atoms with positive
/// weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Uniform weights on `positions` (repetitions accumulate).
    pub fn uniform(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(invalid("empirical measure needs at least one atom"));
        }
        let w = 1.0 / positions.len() as f64;
        Self::from_weighted(positions.into_iter().map(|x| (x, w)).collect())
    }

    /// Sorts, merges near-coincident atoms and renormalizes. Weights must be
    /// positive and already sum to one within `1e-9`.
    pub fn from_weighted(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("empirical measure needs at least one atom"));
        }
        if let Some(&(x, w)) = atoms
            .iter()
            .find(|(x, w)| !x.is_finite() || !w.is_finite() || *w <= 0.0)
        {
            return Err(Error::NonFinite(format!("invalid atom ({x}, {w})")));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if x - last.0 <= MERGE_TOL * last.0.abs().max(1.0) => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        for a in &mut merged {
            a.1 /= total;
        }
        let mut acc = 0.0;
        let cumulative = merged
            .iter()
            .map(|a| {
                acc += a.1;
                acc
            })
            .collect();
        Ok(EmpiricalMeasure {
            atoms: merged,
            cumulative,
        })
    }

    pub fn dirac(a: f64) -> Self {
        Self::from_weighted(vec![(a, 1.0)]).expect("finite Dirac mass")
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `F(x) = mu((-inf, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.0 <= x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1].min(1.0)
        }
    }

    /// `F(x-) = mu((-inf, x))`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.0 < x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1].min(1.0)
        }
    }

    /// `sum weight * f(position)`; errors if `f` is non-finite at an atom.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for &(x, w) in &self.atoms {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("integrand is {v} at {x}")));
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Image measure under `f` (which should be monotone to keep CDF
    /// comparisons meaningful).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_weighted(self.atoms.iter().map(|&(x, w)| (f(x), w)).collect())
    }

    /// Two-column CSV `position,weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("position,weight\n");
        for (x, w) in &self.atoms {
            writeln!(out, "{x:?},{w:?}").unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (k == 0 && line.starts_with("position")) {
                continue;
            }
            let (x, w) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `position,weight`", k + 1)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number `{s}`", k + 1)))
            };
            atoms.push((parse(x)?, parse(w)?));
        }
        Self::from_weighted(atoms)
    }
}

/// Kolmogorov distance `sup_x |F_mu(x) - F_nu(x)|`, exact.
///
/// Both CDFs are right-continuous steps, so the supremum is attained at an
/// atom of one of the measures.
pub fn kolmogorov(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let (a, b) = (&mu.atoms, &nu.atoms);
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut best = 0.0f64;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i].0 <= x {
            fa = mu.cumulative[i];
            i += 1;
        }
        while j < b.len() && b[j].0 <= x {
            fb = nu.cumulative[j];
            j += 1;
        }
        best = best.max((fa - fb).abs());
    }
    best.min(1.0)
}

/// Kolmogorov distance between an empirical measure and a reference CDF:
/// checks the value and the left limit at every atom.
pub fn kolmogorov_to_reference(mu: &EmpiricalMeasure, law: &ReferenceLaw) -> f64 {
    let mut best = 0.0f64;
    let mut before = 0.0;
    for (k, &(x, _)) in mu.atoms.iter().enumerate() {
        let f = law.cdf(x);
        let f_left = law.cdf_left(x);
        best = best.max((before - f_left).abs()).max((mu.cumulative[k] - f).abs());
        before = mu.cumulative[k];
    }
    best.min(1.0)
}

/// Whether `F_nu(t - eps) - eps <= F_mu(t) <= F_nu(t + eps) + eps` for all t.
fn levy_feasible(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, eps: f64) -> bool {
    // Each side is a right-continuous step in t; checking the breakpoints
    // (atoms of mu, atoms of nu shifted by +-eps) is exhaustive.
    let slack = 1e-15;
    for &(b, _) in &mu.atoms {
        let fm = mu.cdf(b);
        if nu.cdf(b - eps) - eps > fm + slack || fm > nu.cdf(b + eps) + eps + slack {
            return false;
        }
    }
    for (k, &(a, _)) in nu.atoms.iter().enumerate() {
        let fn_a = nu.cumulative[k];
        // t = a + eps: F_nu(t - eps) = F_nu(a).
        if fn_a - eps > mu.cdf(a + eps) + slack {
            return false;
        }
        // t = a - eps: F_nu(t + eps) = F_nu(a).
        if mu.cdf(a - eps) > fn_a + eps + slack {
            return false;
        }
    }
    true
}

/// Lévy–Prokhorov distance in its CDF-sandwich form, to absolute accuracy
/// `tol` (bisection on epsilon over `[0, 1]`).
pub fn levy_prokhorov(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    if levy_feasible(mu, nu, 0.0) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if levy_feasible(mu, nu, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Tent `max(0, 1 - |x - center| / half_width)`: sup norm 1, compact
/// support, `1 / half_width`-Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tent {
    pub center: f64,
    pub half_width: f64,
}

impl Tent {
    /// The `k`-th member (`k >= 1`) of the dyadic tent family: level `q` has
    /// centers `p / 2^q` and half-width `2^-q`; `(q, p)` pairs are walked
    /// diagonally with `p` in zigzag order `0, 1, -1, 2, -2, ...`.
    pub fn dyadic(k: usize) -> Tent {
        assert!(k >= 1, "tent index starts at 1");
        let idx = k - 1;
        let mut s = 0usize;
        while (s + 1) * (s + 2) / 2 <= idx {
            s += 1;
        }
        let q = idx - s * (s + 1) / 2;
        let m = s - q;
        let p = if m % 2 == 1 {
            m.div_ceil(2) as f64
        } else {
            -((m / 2) as f64)
        };
        let w = 0.5f64.powi(q as i32);
        Tent {
            center: p * w,
            half_width: w,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (1.0 - (x - self.center).abs() / self.half_width).max(0.0)
    }
}

/// Default number of series terms.
pub const DEFAULT_SERIES_TERMS: usize = 64;

/// `(integral of tent_k d mu)_{k=1..terms}`.
pub fn tent_integrals(mu: &EmpiricalMeasure, terms: usize) -> Vec<f64> {
    (1..=terms)
        .map(|k| {
            let t = Tent::dyadic(k);
            mu.atoms.iter().map(|&(x, w)| w * t.eval(x)).sum()
        })
        .collect()
}

/// `sum_k 2^-k |a_k - b_k|` over precomputed tent integrals.
pub fn series_from_integrals(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(k, (x, y))| 0.5f64.powi(k as i32 + 1) * (x - y).abs())
        .sum()
}

/// Partial sum of the series metric and a bound on the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesDistance {
    pub value: f64,
    /// `2^(1 - terms)`.
    pub truncation_bound: f64,
}

/// `sum_{k <= terms} 2^-k |int f_k d mu - int f_k d nu|` over the dyadic
/// tent family.
pub fn bl_series_metric(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    terms: usize,
) -> Result<SeriesDistance> {
    if terms == 0 {
        return Err(invalid("series metric needs at least one term"));
    }
    let value = series_from_integrals(&tent_integrals(mu, terms), &tent_integrals(nu, terms));
    Ok(SeriesDistance {
        value,
        truncation_bound: 0.5f64.powi(terms as i32 - 1),
    })
}

/// Monte Carlo estimate of the mean measure: the union of all atoms with
/// weights divided by the number of measures.
pub fn pooled_mean(measures: &[EmpiricalMeasure]) -> Result<EmpiricalMeasure> {
    pooled_mean_of(measures.iter())
}

pub(crate) fn pooled_mean_of<'a>(
    measures: impl ExactSizeIterator<Item = &'a EmpiricalMeasure> + Clone,
) -> Result<EmpiricalMeasure> {
    let count = measures.len();
    if count == 0 {
        return Err(invalid("pooled mean of an empty list"));
    }
    let scale = 1.0 / count as f64;
    let atoms = measures
        .flat_map(|m| m.atoms.iter().map(move |&(x, w)| (x, w * scale)))
        .collect();
    EmpiricalMeasure::from_weighted(atoms)
}

/// Reference limit laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceLaw {
    /// Density `sqrt(4 - x^2) / (2 pi)` on `[-2, 2]`.
    Semicircle,
    /// Eigenvalue law of `X X* / N` for an `n x N` matrix with unit-variance
    /// entries and `n / N -> c`.
    MarchenkoPastur { c: f64 },
    Dirac { a: f64 },
}

impl ReferenceLaw {
    pub fn marchenko_pastur(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid(format!("Marchenko–Pastur ratio must be positive, got {c}")));
        }
        Ok(ReferenceLaw::MarchenkoPastur { c })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ReferenceLaw::Semicircle => semicircle_cdf(x),
            ReferenceLaw::MarchenkoPastur { c } => marchenko_pastur_cdf(c, x),
            ReferenceLaw::Dirac { a } => {
                if x >= a {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `F(x-)`; differs from `cdf` only at atoms.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match *self {
            ReferenceLaw::Dirac { a } => {
                if x > a {
                    1.0
                } else {
                    0.0
                }
            }
            ReferenceLaw::MarchenkoPastur { c } if c > 1.0 && x <= 0.0 => 0.0,
            _ => self.cdf(x),
        }
    }

    /// Density of the absolutely continuous part.
    pub fn density(&self, x: f64) -> f64 {
        match *self {
            ReferenceLaw::Semicircle => {
                if x.abs() < 2.0 {
                    (4.0 - x * x).sqrt() / (2.0 * PI)
                } else {
                    0.0
                }
            }
            ReferenceLaw::MarchenkoPastur { c } => {
                let (a, b) = mp_edges(c);
                if x > a && x < b {
                    ((b - x) * (x - a)).sqrt() / (2.0 * PI * c * x)
                } else {
                    0.0
                }
            }
            ReferenceLaw::Dirac { .. } => 0.0,
        }
    }
}

/// Checked CDF evaluation.
pub fn reference_cdf(law: &ReferenceLaw, x: f64) -> Result<f64> {
    if let ReferenceLaw::MarchenkoPastur { c } = *law {
        ReferenceLaw::marchenko_pastur(c)?;
    }
    Ok(law.cdf(x))
}

fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        let v = 0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI;
        v.clamp(0.0, 1.0)
    }
}

fn mp_edges(c: f64) -> (f64, f64) {
    let r = c.sqrt();
    ((1.0 - r).powi(2), (1.0 + r).powi(2))
}

fn marchenko_pastur_cdf(c: f64, x: f64) -> f64 {
    let atom = if c > 1.0 { 1.0 - 1.0 / c } else { 0.0 };
    let (a, b) = mp_edges(c);
    if x < 0.0 {
        return 0.0;
    }
    if x < a {
        return atom;
    }
    if x >= b {
        return 1.0;
    }
    // x = a + (b - a)(1 - cos t) / 2 turns the square-root edges into a
    // smooth integrand in t.
    let half = 0.5 * (b - a);
    let theta_x = (1.0 - (x - a) / half).clamp(-1.0, 1.0).acos();
    let integrand = |t: f64| {
        let xt = a + half * (1.0 - t.cos());
        let s = t.sin();
        if xt <= 0.0 {
            // c = 1 at t = 0: limit of half^2 sin^2 t / x(t) is 2 half.
            return 2.0 * half / (2.0 * PI * c);
        }
        half * half * s * s / (2.0 * PI * c * xt)
    };
    let steps = 2000;
    let h = theta_x / steps as f64;
    let mut acc = integrand(0.0) + integrand(theta_x);
    for k in 1..steps {
        acc += integrand(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    (atom + acc * h / 3.0).clamp(0.0, 1.0)
}
