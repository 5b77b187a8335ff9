//! Monte Carlo sweeps of the lemma checkers and of the `f_delta` builder.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::{
    build_f_delta, check_functional_lipschitz, check_hoffman_wielandt, check_klein_convexity,
    check_moment_estimate, check_rank_inequality, grid_sup_error, PiecewiseLinear,
};
use crate::ensembles::{sample_matrix, EnsembleSpec};
use crate::entries::{EntryLaw, RngStream, StreamRng};
use crate::error::Result;
use crate::matrix::{EntryGrid, HermitianMatrix};

/// Relative tolerance on margins: a sample fails when
/// `margin < -MARGIN_TOL * scale`.
pub const MARGIN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepConfig {
    pub seed: u64,
    pub samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            seed: 0,
            samples: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub lemma: &'static str,
    pub samples: usize,
    /// Smallest margin seen.
    pub min_margin: f64,
    /// Smallest `margin / scale`.
    pub min_relative: f64,
    pub violations: usize,
}

impl SweepResult {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

type Sample = fn(&RngStream) -> Result<(f64, f64)>;

const SWEEPS: [(&str, Sample); 6] = [
    ("hoffman_wielandt", hoffman_wielandt_sample),
    ("functional_lipschitz", functional_lipschitz_sample),
    ("klein", klein_sample),
    ("rank", rank_sample),
    ("moment", moment_sample),
    ("f_delta", f_delta_sample),
];

/// Runs every sweep. Each returns `(margin, scale)` per sample; samples are
/// independent streams `seed / sweep / sample` and run in parallel with
/// results gathered in order.
pub fn run_lemma_sweeps(config: &SweepConfig) -> Result<Vec<SweepResult>> {
    let root = RngStream::new(config.seed);
    SWEEPS
        .iter()
        .enumerate()
        .map(|(k, (name, sample))| {
            let base = root.derive(k as u64);
            let margins: Vec<(f64, f64)> = (0..config.samples)
                .into_par_iter()
                .map(|s| sample(&base.derive(s as u64)))
                .collect::<Result<_>>()?;
            let mut out = SweepResult {
                lemma: name,
                samples: config.samples,
                min_margin: f64::INFINITY,
                min_relative: f64::INFINITY,
                violations: 0,
            };
            for (margin, scale) in margins {
                let scale = scale.max(1.0);
                out.min_margin = out.min_margin.min(margin);
                out.min_relative = out.min_relative.min(margin / scale);
                if !(margin >= -MARGIN_TOL * scale) {
                    out.violations += 1;
                }
            }
            Ok(out)
        })
        .collect()
}

/// CSV with header `lemma,samples,min_margin,min_relative,violations`.
pub fn sweeps_csv(results: &[SweepResult]) -> String {
    let mut out = String::from("lemma,samples,min_margin,min_relative,violations\n");
    for r in results {
        writeln!(
            out,
            "{},{},{:e},{:e},{}",
            r.lemma, r.samples, r.min_margin, r.min_relative, r.violations
        )
        .unwrap();
    }
    out
}

/// Alternates Gaussian (complex) and Rademacher Wigner matrices.
fn random_matrix(n: usize, stream: &RngStream, which: u64) -> Result<HermitianMatrix> {
    let law = if which % 2 == 0 {
        EntryLaw::StdGaussianComplex
    } else {
        EntryLaw::Rademacher
    };
    sample_matrix(&EnsembleSpec::wigner(law), n, stream)
}

fn pair(n: usize, stream: &RngStream) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let pick = stream.generator().random::<u64>();
    Ok((
        random_matrix(n, &stream.derive(1), pick)?,
        random_matrix(n, &stream.derive(2), pick >> 1)?,
    ))
}

fn hoffman_wielandt_sample(stream: &RngStream) -> Result<(f64, f64)> {
    let (a, b) = pair(16, stream)?;
    let margin = check_hoffman_wielandt(&a, &b)?;
    Ok((margin, a.sub(&b)?.hs_norm_sqr()))
}

fn functional_lipschitz_sample(stream: &RngStream) -> Result<(f64, f64)> {
    let (a, b) = pair(16, stream)?;
    Ok((check_functional_lipschitz(&a, &b, |x| x.abs().min(1.0))?, 1.0))
}

fn klein_sample(stream: &RngStream) -> Result<(f64, f64)> {
    let (a, b) = pair(12, stream)?;
    let lam = stream.derive(3).generator().random::<f64>();
    let margin = check_klein_convexity(&a, &b, |x| x * x, lam)?;
    Ok((margin, (a.hs_norm_sqr() + b.hs_norm_sqr()) / 12.0))
}

fn rank_sample(stream: &RngStream) -> Result<(f64, f64)> {
    let n = 20;
    let a = random_matrix(n, &stream.derive(1), stream.generator().random())?;
    let mut rng = stream.derive(2).generator();
    let rank = rng.random_range(1..=4);
    let vectors: Vec<(f64, Vec<Complex64>)> = (0..rank)
        .map(|_| {
            let c = rng.random_range(-2.0..2.0);
            let v = (0..n)
                .map(|_| EntryLaw::StdGaussianComplex.sample(&mut rng))
                .collect();
            (c, v)
        })
        .collect();
    let perturbation = HermitianMatrix::from_upper(n, |i, j| {
        vectors
            .iter()
            .map(|(c, v)| v[i] * v[j].conj() * *c)
            .sum::<Complex64>()
    });
    let b = a.combine(1.0, &perturbation, 1.0)?;
    Ok((check_rank_inequality(&a, &b)?, 1.0))
}

fn moment_sample(stream: &RngStream) -> Result<(f64, f64)> {
    let x = random_matrix(10, &stream.derive(1), stream.generator().random())?;
    let r = [0.5, 1.0, 1.5, 2.0][stream.derive(2).generator().random_range(0..4)];
    let scale: f64 = x.row_norms().iter().map(|v| v.powf(r)).sum();
    Ok((check_moment_estimate(&x, r)?, scale))
}

/// Margin `delta - sup|f - f_delta|`, forced negative when the piece count
/// or the piece/ramp agreement fails.
fn f_delta_sample(stream: &RngStream) -> Result<(f64, f64)> {
    let m = 2.0;
    let mut rng = stream.generator();
    let delta = rng.random_range(0.05..0.5);
    let f = random_bump(&mut rng, m);
    let d = build_f_delta(&f, m, delta)?;
    let mut margin = delta - grid_sup_error(&f, &d, 4096);
    let bound = 2 * (2.0 * m / delta).ceil() as usize;
    if d.kappa > bound {
        margin = margin.min(-1.0);
    }
    let worst = (0..=512)
        .map(|k| {
            let x = -m - 1.0 + k as f64 * (2.0 * m + 2.0) / 512.0;
            (d.eval(x) - d.eval_ramps(x)).abs()
        })
        .fold(0.0, f64::max);
    if worst > 1e-12 {
        margin = margin.min(-worst);
    }
    Ok((margin, 1.0))
}

/// A random 1-Lipschitz function vanishing outside `[-m, m]`: a random
/// piecewise-linear walk squeezed into the cone `|y| <= (m - |x|)+`.
pub(crate) fn random_bump(rng: &mut StreamRng, m: f64) -> impl Fn(f64) -> f64 {
    let mut knots = vec![(-m, 0.0)];
    let (mut x, mut y) = (-m, 0.0f64);
    while x < m {
        let step = rng.random_range(0.05..0.4);
        y += rng.random_range(-1.0..1.0) * step;
        x += step;
        knots.push((x, y));
    }
    let walk = PiecewiseLinear::new(knots).expect("knots increase");
    move |x: f64| {
        let cap = (m - x.abs()).max(0.0);
        walk.eval(x).clamp(-cap, cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_passes_and_is_reproducible() {
        let cfg = SweepConfig { seed: 7, samples: 40 };
        let a = run_lemma_sweeps(&cfg).unwrap();
        assert_eq!(a.len(), SWEEPS.len());
        assert!(a.iter().all(|r| r.passed()), "{a:?}");
        let b = run_lemma_sweeps(&cfg).unwrap();
        assert_eq!(sweeps_csv(&a), sweeps_csv(&b));
    }
}
