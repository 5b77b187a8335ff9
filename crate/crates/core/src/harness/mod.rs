//! Monte Carlo experiments: how far is the ESD of one draw from the mean
//! ESD, as `n` grows?
//!
//! For every size `n` the runner draws `replicas` independent matrices, each
//! from the stream `seed / n / replica`, and measures the distance between
//! each replica's ESD and the pooled mean of the *other* replicas. Leaving
//! the replica out matters at small replica counts: with plain pooling a
//! replica contributes `1/R` of the measure it is compared with, which biases
//! the distance low.
//!
//! Cells run in parallel; rows are assembled in `(n, replica)` order, so the
//! output does not depend on the thread count.

mod config;
mod tail;

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{ConfigFile, TailSettings};
pub use tail::{auto_t_grid, tail_profile, TailProfile, TailRow, TestFunction, MIN_TAIL_REPLICAS};

use crate::conditions::solve_bn;
use crate::ensembles::{
    dependency_partition, rectangular_partition, sample_matrix, sample_rectangular, EnsembleSpec,
    ScaleRule,
};
use crate::entries::{parse_params, split_kind, RngStream};
use crate::error::{invalid, Error, Result};
use crate::matrix::EntryGrid;
use crate::measures::{
    kolmogorov, kolmogorov_to_reference, levy_prokhorov, pooled_mean_of, series_from_integrals,
    tent_integrals, EmpiricalMeasure, ReferenceLaw, DEFAULT_SERIES_TERMS,
};
use crate::spectra::{esd, singular_esd};

/// Relative tolerance of the per-replica check
/// `int x^2 dL_n = ||X||_HS^2 / (n scale^2)`.
pub const SECOND_MOMENT_TOL: f64 = 1e-8;

/// Distance used between a replica's ESD and the leave-one-out mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    /// Exact, but does not metrize weak convergence in general.
    Kolmogorov,
    /// Lévy–Prokhorov by bisection to absolute accuracy `tol`.
    LevyProkhorov { tol: f64 },
    /// Series over the first `terms` dyadic tents.
    BLSeries { terms: usize },
}

impl Default for Metric {
    fn default() -> Self {
        Metric::BLSeries {
            terms: DEFAULT_SERIES_TERMS,
        }
    }
}

impl Metric {
    pub fn distance(&self, mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
        match *self {
            Metric::Kolmogorov => Ok(kolmogorov(mu, nu)),
            Metric::LevyProkhorov { tol } => levy_prokhorov(mu, nu, tol),
            Metric::BLSeries { terms } => {
                Ok(crate::measures::bl_series_metric(mu, nu, terms)?.value)
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Kolmogorov => f.write_str("kolmogorov"),
            Metric::LevyProkhorov { tol } => write!(f, "levy_prokhorov:tol={tol:e}"),
            Metric::BLSeries { terms } => write!(f, "bl_series:terms={terms}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = split_kind(s);
        let params = parse_params(rest)?;
        let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        if let Some((k, _)) = params
            .iter()
            .find(|(k, _)| !matches!((kind, k.as_str()), ("levy_prokhorov", "tol") | ("bl_series", "terms")))
        {
            return Err(Error::Parse(format!("unknown parameter `{k}` for metric `{kind}`")));
        }
        let bad = |v: &str| Error::Parse(format!("invalid metric parameter `{v}`"));
        match kind {
            "kolmogorov" => Ok(Metric::Kolmogorov),
            "levy_prokhorov" => {
                let tol = match get("tol") {
                    Some(v) => v.parse::<f64>().map_err(|_| bad(v))?,
                    None => 1e-6,
                };
                if !(tol > 0.0) {
                    return Err(bad(&tol.to_string()));
                }
                Ok(Metric::LevyProkhorov { tol })
            }
            "bl_series" => {
                let terms = match get("terms") {
                    Some(v) => v.parse::<usize>().map_err(|_| bad(v))?,
                    None => DEFAULT_SERIES_TERMS,
                };
                if terms == 0 {
                    return Err(bad("0"));
                }
                Ok(Metric::BLSeries { terms })
            }
            other => Err(Error::Parse(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for ReferenceLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceLaw::Semicircle => f.write_str("semicircle"),
            ReferenceLaw::MarchenkoPastur { c } => write!(f, "marchenko_pastur:c={c:?}"),
            ReferenceLaw::Dirac { a } => write!(f, "dirac:a={a:?}"),
        }
    }
}

impl FromStr for ReferenceLaw {
    type Err = Error;
    /// `semicircle`, `marchenko_pastur[:c=..]` (c defaults to 1 and is
    /// replaced by `n / N` in singular runs) or `dirac:a=..`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = split_kind(s);
        let params = parse_params(rest)?;
        let num = |key: &str, default: Option<f64>| -> Result<f64> {
            match params.iter().find(|(k, _)| k == key) {
                Some((_, v)) => v
                    .parse()
                    .map_err(|_| Error::Parse(format!("invalid value `{v}` for `{key}`"))),
                None => default.ok_or_else(|| Error::Parse(format!("`{kind}` needs `{key}`"))),
            }
        };
        match kind {
            "semicircle" => Ok(ReferenceLaw::Semicircle),
            "marchenko_pastur" => ReferenceLaw::marchenko_pastur(num("c", Some(1.0))?)
                .map_err(|e| Error::Parse(e.to_string())),
            "dirac" => Ok(ReferenceLaw::Dirac { a: num("a", None)? }),
            other => Err(Error::Parse(format!("unknown reference law `{other}`"))),
        }
    }
}

/// Parameters of a concentration experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSpec,
    /// Strictly increasing matrix sizes.
    pub sizes: Vec<usize>,
    /// At least 2, for the leave-one-out mean.
    pub replicas: usize,
    pub metric: Metric,
    pub seed: u64,
    pub scale_rule: ScaleRule,
    pub reference: Option<ReferenceLaw>,
    /// `N / n` for singular value runs.
    pub aspect: f64,
    /// Worker threads; 0 lets the thread pool decide.
    pub jobs: usize,
    /// Record wall time per replica. Off by default so that output is
    /// byte-for-byte reproducible.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(ensemble: EnsembleSpec, sizes: Vec<usize>, replicas: usize) -> Self {
        ExperimentConfig {
            scale_rule: ensemble.scale_rule,
            ensemble,
            sizes,
            replicas,
            metric: Metric::default(),
            seed: 0,
            reference: None,
            aspect: 2.0,
            jobs: 0,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        if self.replicas < 2 {
            return Err(invalid(format!(
                "need at least 2 replicas for the leave-one-out mean, got {}",
                self.replicas
            )));
        }
        if self.sizes.is_empty() {
            return Err(invalid("sizes must not be empty"));
        }
        if self.sizes[0] == 0 || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "sizes must be positive and strictly increasing, got {:?}",
                self.sizes
            )));
        }
        if !(self.aspect > 0.0 && self.aspect.is_finite()) {
            return Err(invalid(format!("aspect must be positive, got {}", self.aspect)));
        }
        Ok(())
    }

    fn scale(&self, n: usize) -> Result<f64> {
        match self.scale_rule {
            ScaleRule::InvSqrtN => Ok((n as f64).sqrt()),
            ScaleRule::InvBn => Ok(solve_bn(&self.ensemble.entry_law, n)?.1),
        }
    }

    fn with_pool<T: Send>(&self, work: impl FnOnce() -> T + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| invalid(format!("cannot start worker threads: {e}")))?;
        Ok(pool.install(work))
    }
}

/// One `(n, replica)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n: usize,
    /// Largest dependency block at this size.
    pub d_n: usize,
    pub replica: usize,
    /// The normalization the spectrum was divided by.
    pub scale: f64,
    /// Distance to the leave-one-out mean.
    pub dist: Option<f64>,
    /// Kolmogorov distance to the reference law, if one was configured.
    pub ref_dist: Option<f64>,
    pub ms: Option<f64>,
    /// `|int x^2 dL - ||X||^2 / (n scale^2)|` relative to the right side.
    pub second_moment_residual: Option<f64>,
    /// Why the row has no distance.
    pub error: Option<String>,
}

/// Per-size aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeSummary {
    pub n: usize,
    pub d_n: usize,
    pub scale: f64,
    pub median_dist: Option<f64>,
    /// Kolmogorov distance from the pooled mean of all replicas to the
    /// reference law.
    pub pooled_ref_dist: Option<f64>,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<ResultRow>,
    pub sizes: Vec<SizeSummary>,
}

impl RunReport {
    pub fn medians(&self) -> Vec<Option<f64>> {
        self.sizes.iter().map(|s| s.median_dist).collect()
    }
}

/// Distance to the leave-one-out mean and to the reference law.
type Distances = (f64, Option<f64>);

struct Cell {
    measure: EmpiricalMeasure,
    residual: f64,
    ms: Option<f64>,
}

fn second_moment_residual(mu: &EmpiricalMeasure, hs_sqr: f64, n: usize, scale: f64) -> Result<f64> {
    let expect = hs_sqr / (n as f64 * scale * scale);
    let got = mu.integrate(|x| x * x)?;
    Ok((got - expect).abs() / expect.max(f64::MIN_POSITIVE))
}

/// Concentration of the ESD of `X / scale` around its mean.
pub fn run_concentration(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    run(config, Shape::Square)
}

/// As [`run_concentration`] with the heavy-tail scale `b_n`. The entry law
/// must have infinite variance.
pub fn run_heavy_tail(config: &ExperimentConfig) -> Result<RunReport> {
    if config.ensemble.entry_law.has_finite_variance() {
        return Err(invalid(format!(
            "heavy-tail runs need an infinite-variance law, got `{}`",
            config.ensemble.entry_law
        )));
    }
    let mut cfg = config.clone();
    cfg.scale_rule = ScaleRule::InvBn;
    cfg.validate()?;
    run(&cfg, Shape::Square)
}

/// Concentration of the singular value distribution of `X / scale` for
/// `n x N` matrices with `N = round(aspect * n)`. A Marchenko–Pastur
/// reference is compared on squared singular values, `c s^2` against
/// `MP(c)` with `c = n / N`.
pub fn run_singular(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    if !config.ensemble.kind.rectangular_capable() {
        return Err(Error::Unsupported(format!(
            "`{}` has no rectangular form",
            config.ensemble
        )));
    }
    run(config, Shape::Rectangular)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Shape {
    Square,
    Rectangular,
}

fn run(config: &ExperimentConfig, shape: Shape) -> Result<RunReport> {
    let root = RngStream::new(config.seed);
    let mut rows = Vec::new();
    let mut sizes = Vec::new();
    for &n in &config.sizes {
        let cols = ((config.aspect * n as f64).round() as usize).max(1);
        let d_n = match shape {
            Shape::Square => dependency_partition(&config.ensemble, n)?.d(),
            Shape::Rectangular => rectangular_partition(&config.ensemble, n, cols)?.d(),
        };
        let scale = config.scale(n)?;
        let reference = match (shape, config.reference) {
            (Shape::Rectangular, Some(ReferenceLaw::MarchenkoPastur { .. })) => {
                Some(ReferenceLaw::marchenko_pastur(n as f64 / cols as f64)?)
            }
            (_, r) => r,
        };
        let size_stream = root.derive(n as u64);

        let cells: Vec<Result<Cell>> = config.with_pool(|| {
            (0..config.replicas)
                .into_par_iter()
                .map(|r| {
                    let stream = size_stream.derive(r as u64);
                    let start = config.timing.then(Instant::now);
                    let (measure, hs) = match shape {
                        Shape::Square => {
                            let x = sample_matrix(&config.ensemble, n, &stream)?;
                            (esd(&x, scale)?, x.hs_norm_sqr())
                        }
                        Shape::Rectangular => {
                            let x = sample_rectangular(&config.ensemble, n, cols, &stream)?;
                            (singular_esd(&x, scale)?, x.hs_norm_sqr())
                        }
                    };
                    let residual = second_moment_residual(&measure, hs, n, scale)?;
                    Ok(Cell {
                        measure,
                        residual,
                        ms: start.map(|s| s.elapsed().as_secs_f64() * 1e3),
                    })
                })
                .collect()
        })?;

        // Self-check failures count as row errors.
        let mut cell_error: Vec<Option<String>> = cells
            .iter()
            .map(|c| match c {
                Err(e) => Some(e.to_string()),
                Ok(c) if !(c.residual <= SECOND_MOMENT_TOL) => Some(format!(
                    "second-moment self-check failed: residual {:e}",
                    c.residual
                )),
                Ok(_) => None,
            })
            .collect();
        let good: Vec<usize> = (0..cells.len()).filter(|&r| cell_error[r].is_none()).collect();
        if good.len() < 2 {
            for e in cell_error.iter_mut().filter(|e| e.is_none()) {
                *e = Some("fewer than two usable replicas".into());
            }
        }
        let measure = |r: usize| &cells[r].as_ref().expect("checked above").measure;
        let compare = |r: usize| -> Result<EmpiricalMeasure> {
            let m = measure(r);
            match (shape, reference) {
                (Shape::Rectangular, Some(ReferenceLaw::MarchenkoPastur { c })) => m.map(|s| c * s * s),
                _ => Ok(m.clone()),
            }
        };

        let dists: Vec<Option<Result<Distances>>> = config.with_pool(|| {
            let tents: Option<Vec<Vec<f64>>> = match config.metric {
                Metric::BLSeries { terms } if good.len() >= 2 => Some(
                    (0..cells.len())
                        .into_par_iter()
                        .map(|r| match cell_error[r] {
                            None => tent_integrals(measure(r), terms),
                            Some(_) => Vec::new(),
                        })
                        .collect(),
                ),
                _ => None,
            };
            let total: Option<Vec<f64>> = tents.as_ref().map(|t| {
                let k = t[good[0]].len();
                (0..k).map(|i| good.iter().map(|&r| t[r][i]).sum()).collect()
            });
            (0..cells.len())
                .into_par_iter()
                .map(|r| {
                    if cell_error[r].is_some() {
                        return None;
                    }
                    Some((|| {
                        let dist = match (&tents, &total) {
                            (Some(t), Some(total)) => {
                                // Tent integrals are linear in the measure.
                                let others = (good.len() - 1) as f64;
                                let loo: Vec<f64> =
                                    total.iter().zip(&t[r]).map(|(s, own)| (s - own) / others).collect();
                                series_from_integrals(&t[r], &loo)
                            }
                            _ => {
                                let loo = pooled_mean_of(
                                    good.iter().filter(|&&q| q != r).map(|&q| measure(q)).collect::<Vec<_>>().into_iter(),
                                )?;
                                config.metric.distance(measure(r), &loo)?
                            }
                        };
                        let ref_dist = match reference {
                            Some(law) => Some(kolmogorov_to_reference(&compare(r)?, &law)),
                            None => None,
                        };
                        Ok((dist, ref_dist))
                    })())
                })
                .collect()
        })?;

        let mut size_rows = Vec::with_capacity(cells.len());
        for (r, d) in dists.into_iter().enumerate() {
            let mut row = ResultRow {
                n,
                d_n,
                replica: r,
                scale,
                dist: None,
                ref_dist: None,
                ms: cells[r].as_ref().ok().and_then(|c| c.ms),
                second_moment_residual: cells[r].as_ref().ok().map(|c| c.residual),
                error: cell_error[r].take(),
            };
            match d {
                Some(Ok((dist, ref_dist))) => {
                    row.dist = Some(dist);
                    row.ref_dist = ref_dist;
                }
                Some(Err(e)) => row.error = Some(e.to_string()),
                None => {}
            }
            size_rows.push(row);
        }

        let ok: Vec<usize> = size_rows
            .iter()
            .filter(|row| row.dist.is_some())
            .map(|row| row.replica)
            .collect();
        let pooled_ref_dist = match reference {
            Some(law) if !ok.is_empty() => {
                let mapped: Vec<EmpiricalMeasure> =
                    ok.iter().map(|&r| compare(r)).collect::<Result<_>>()?;
                let pooled = pooled_mean_of(mapped.iter())?;
                Some(kolmogorov_to_reference(&pooled, &law))
            }
            _ => None,
        };
        sizes.push(SizeSummary {
            n,
            d_n,
            scale,
            median_dist: median(size_rows.iter().filter_map(|row| row.dist).collect()),
            pooled_ref_dist,
            failed: size_rows.iter().filter(|row| row.dist.is_none()).count(),
        });
        rows.extend(size_rows);
    }
    Ok(RunReport { rows, sizes })
}

/// Median, averaging the two middle values for even counts.
pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let k = values.len();
    Some(if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// CSV with header `n,d_n,replica,dist,ref_dist,ms`. Failed rows carry
/// `error` in the `dist` column.
pub fn rows_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("n,d_n,replica,dist,ref_dist,ms\n");
    for r in rows {
        let dist = if r.error.is_some() {
            "error".to_string()
        } else {
            opt(r.dist)
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n,
            r.d_n,
            r.replica,
            dist,
            opt(r.ref_dist),
            r.ms.map(|m| format!("{m:.3}")).unwrap_or_default()
        )
        .unwrap();
    }
    out
}

/// CSV with header `n,d_n,scale,median_dist,pooled_ref_dist,failed`.
pub fn summaries_csv(sizes: &[SizeSummary]) -> String {
    let mut out = String::from("n,d_n,scale,median_dist,pooled_ref_dist,failed\n");
    for s in sizes {
        writeln!(
            out,
            "{},{},{:?},{},{},{}",
            s.n,
            s.d_n,
            s.scale,
            opt(s.median_dist),
            opt(s.pooled_ref_dist),
            s.failed
        )
        .unwrap();
    }
    out
}
