use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use specmeter::approx::{run_lemma_sweeps, sweeps_csv, SweepConfig};
use specmeter::conditions::{diagnostics_csv, heavy_tail_diagnostics, lindeberg_stat};
use specmeter::ensembles::{
    dependency_partition, rectangular_partition, sample_matrix, sample_rectangular, EnsembleSpec,
    ScaleRule,
};
use specmeter::entries::{EntryLaw, RngStream};
use specmeter::harness::{
    rows_csv, run_concentration, run_heavy_tail, run_singular, summaries_csv, tail_profile,
    ConfigFile, ExperimentConfig, Metric, TestFunction,
};
use specmeter::matrix::EntryGrid;
use specmeter::measures::ReferenceLaw;
use specmeter::spectra::{eigenvalues, singular_values};
use specmeter::conditions::solve_bn;
use specmeter::{Error, Result};

/// Concentration experiments for spectra of random matrices with dependent
/// entries. CSV goes to stdout (or `--out`), summaries to stderr.
#[derive(Parser)]
#[command(name = "specmeter", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// INI-style experiment file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed. Falls back to the config file, then SPECMETER_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores). Never changes results.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Fill the `ms` column with wall times (makes output nondeterministic).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Args)]
struct Experiment {
    /// Ensemble, e.g. `toeplitz:entry=gaussian`.
    #[arg(long)]
    ensemble: Option<EnsembleSpec>,
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    replicas: Option<usize>,
    /// `kolmogorov`, `levy_prokhorov:tol=..` or `bl_series:terms=..`.
    #[arg(long)]
    metric: Option<Metric>,
    /// `semicircle`, `marchenko_pastur` or `dirac:a=..`.
    #[arg(long)]
    reference: Option<ReferenceLaw>,
    /// Also write per-size summaries to this file.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one matrix and print its entries with dependency block ids.
    Sample {
        #[arg(long)]
        ensemble: Option<EnsembleSpec>,
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Column count for a rectangular draw.
        #[arg(long)]
        cols: Option<usize>,
    },
    /// Eigenvalues of one draw divided by its scale (singular values when
    /// `--cols` is given).
    Spectrum {
        #[arg(long)]
        ensemble: Option<EnsembleSpec>,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long)]
        cols: Option<usize>,
    },
    /// Distance of each replica's ESD to the leave-one-out mean.
    Concentrate(Experiment),
    /// As `concentrate` with the heavy-tail scale.
    Heavy(Experiment),
    /// Singular value distributions of n x round(aspect n) matrices.
    Singular {
        #[command(flatten)]
        exp: Experiment,
        #[arg(long)]
        aspect: Option<f64>,
    },
    /// Random sweeps of the matrix inequalities; exits 1 on any violation.
    Lemmas {
        #[arg(long, default_value_t = 500)]
        samples: usize,
    },
    /// Lindeberg statistics of one draw, or heavy-tail scale diagnostics
    /// with `--bn`.
    Conditions {
        #[arg(long)]
        ensemble: Option<EnsembleSpec>,
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// Levels M, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4")]
        thresholds: Vec<f64>,
        /// Print b_n diagnostics for the entry law at `--sizes` instead.
        #[arg(long)]
        bn: bool,
        #[arg(long, value_delimiter = ',', default_value = "100,10000,1000000")]
        sizes: Vec<usize>,
    },
    /// Deviation frequencies of a linear spectral statistic.
    Tail {
        #[arg(long)]
        ensemble: Option<EnsembleSpec>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        replicas: Option<usize>,
        /// Comma-separated deviations; default spans four standard deviations.
        #[arg(long, value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        /// `clipped_abs:cap=..` or `tent:center=..,width=..`.
        #[arg(long)]
        function: Option<TestFunction>,
    },
}

/// Failure of a property check, as opposed to an error.
struct Violation(String);

enum Failure {
    Error(Error),
    Violation(Violation),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(Violation(msg))) => {
            eprintln!("specmeter: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("specmeter: {e}");
            match e {
                Error::Config { .. } | Error::Parse(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn resolve_seed(flag: Option<u64>, file: &ConfigFile) -> Result<u64> {
    if let Some(s) = flag.or(file.seed) {
        return Ok(s);
    }
    match std::env::var("SPECMETER_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("SPECMETER_SEED is not a 64-bit seed: `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn default_ensemble() -> EnsembleSpec {
    EnsembleSpec::wigner(EntryLaw::Rademacher)
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let g = cli.global;
    let file = match &g.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let seed = resolve_seed(g.seed, &file)?;
    let jobs = g.jobs.or(file.jobs).unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker threads: {e}")))?;
    let ensemble = |flag: Option<EnsembleSpec>| flag.or_else(|| file.ensemble.clone()).unwrap_or_else(default_ensemble);

    let experiment = |exp: Experiment| -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(default_ensemble(), vec![64, 128, 256], 16);
        file.apply(&mut cfg);
        if let Some(e) = exp.ensemble {
            cfg.scale_rule = e.scale_rule;
            cfg.ensemble = e;
        }
        if let Some(s) = exp.sizes {
            cfg.sizes = s;
        }
        if let Some(r) = exp.replicas {
            cfg.replicas = r;
        }
        if let Some(m) = exp.metric {
            cfg.metric = m;
        }
        if exp.reference.is_some() {
            cfg.reference = exp.reference;
        }
        cfg.seed = seed;
        cfg.jobs = jobs;
        cfg.timing = g.timing;
        cfg
    };
    let report_out = |report: specmeter::harness::RunReport, summary: Option<PathBuf>| -> Result<()> {
        let sums = summaries_csv(&report.sizes);
        eprint!("{sums}");
        if let Some(path) = summary {
            std::fs::write(path, &sums)?;
        }
        emit(&g.out, &rows_csv(&report.rows))
    };

    match cli.command {
        Command::Sample { ensemble: e, n, cols } => {
            let spec = ensemble(e);
            let stream = RngStream::new(seed);
            let mut csv = String::from("i,j,re,im,block\n");
            let (rows, cols, d, blocks) = match cols {
                None => {
                    let x = sample_matrix(&spec, n, &stream)?;
                    let p = dependency_partition(&spec, n)?;
                    for i in 0..n {
                        for j in 0..n {
                            let z = x.get(i, j);
                            writeln!(csv, "{i},{j},{:?},{:?},{}", z.re, z.im, p.block_of(i, j)).unwrap();
                        }
                    }
                    (n, n, p.d(), p.num_blocks())
                }
                Some(cols) => {
                    let x = sample_rectangular(&spec, n, cols, &stream)?;
                    let p = rectangular_partition(&spec, n, cols)?;
                    for i in 0..n {
                        for j in 0..cols {
                            let z = x.get(i, j);
                            writeln!(csv, "{i},{j},{:?},{:?},{}", z.re, z.im, p.block_of(i, j)).unwrap();
                        }
                    }
                    (n, cols, p.d(), p.num_blocks())
                }
            };
            eprintln!("{spec}: {rows}x{cols}, {blocks} blocks, largest block {d}");
            emit(&g.out, &csv)?;
        }
        Command::Spectrum { ensemble: e, n, cols } => {
            let spec = ensemble(e);
            let scale = match spec.scale_rule {
                ScaleRule::InvSqrtN => (n as f64).sqrt(),
                ScaleRule::InvBn => solve_bn(&spec.entry_law, n)?.1,
            };
            let stream = RngStream::new(seed);
            let csv = match cols {
                None => {
                    let x = sample_matrix(&spec, n, &stream)?;
                    let mut csv = String::from("lambda\n");
                    for v in eigenvalues(&x)?.values() {
                        writeln!(csv, "{:?}", v / scale).unwrap();
                    }
                    csv
                }
                Some(cols) => {
                    let x = sample_rectangular(&spec, n, cols, &stream)?;
                    let mut csv = String::from("sigma\n");
                    for v in singular_values(&x)? {
                        writeln!(csv, "{:?}", v / scale).unwrap();
                    }
                    csv
                }
            };
            emit(&g.out, &csv)?;
        }
        Command::Concentrate(exp) => {
            let summary = exp.summary.clone();
            report_out(run_concentration(&experiment(exp))?, summary)?;
        }
        Command::Heavy(exp) => {
            let summary = exp.summary.clone();
            report_out(run_heavy_tail(&experiment(exp))?, summary)?;
        }
        Command::Singular { exp, aspect } => {
            let summary = exp.summary.clone();
            let mut cfg = experiment(exp);
            if let Some(a) = aspect {
                cfg.aspect = a;
            }
            report_out(run_singular(&cfg)?, summary)?;
        }
        Command::Lemmas { samples } => {
            let results = run_lemma_sweeps(&SweepConfig { seed, samples })?;
            emit(&g.out, &sweeps_csv(&results))?;
            let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.lemma).collect();
            if !failed.is_empty() {
                return Err(Failure::Violation(Violation(format!(
                    "margin violations in: {}",
                    failed.join(", ")
                ))));
            }
        }
        Command::Conditions {
            ensemble: e,
            n,
            thresholds,
            bn,
            sizes,
        } => {
            let spec = ensemble(e);
            if bn {
                emit(&g.out, &diagnostics_csv(&heavy_tail_diagnostics(&spec.entry_law, &sizes)?))?;
            } else {
                let x = sample_matrix(&spec, n, &RngStream::new(seed))?;
                let mut csv = String::from("n,threshold,statistic,exceed_count\n");
                for m in thresholds {
                    let r = lindeberg_stat(&x, m)?;
                    writeln!(csv, "{},{:?},{:?},{}", r.n, r.threshold, r.statistic, r.exceed_count).unwrap();
                }
                eprintln!("{spec}: n = {n}, max |x| = {:?}", x.max_abs());
                emit(&g.out, &csv)?;
            }
        }
        Command::Tail {
            ensemble: e,
            n,
            replicas,
            t_grid,
            function,
        } => {
            let spec = ensemble(e);
            let n = n.or(file.tail.n).unwrap_or(128);
            let replicas = replicas.or(file.tail.replicas).unwrap_or(400);
            let grid = t_grid.or_else(|| file.tail.t_grid.clone()).unwrap_or_default();
            let f = function.or(file.tail.function).unwrap_or_default();
            let p = tail_profile(&spec, n, replicas, |x| f.eval(x), &grid, seed)?;
            let fit = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into());
            eprintln!(
                "{spec}, f = {f}: mean {:.6}, sd {:.6}, slope of ln freq vs t^2 {}, R^2 {}",
                p.mean,
                p.std_dev,
                fit(p.slope),
                fit(p.r_squared)
            );
            emit(&g.out, &p.to_csv())?;
        }
    }
    Ok(())
}
