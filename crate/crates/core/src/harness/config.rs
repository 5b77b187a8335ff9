//! INI-style experiment files.
//!
//! ```text
//! # comments start with `#` or `;`
//! [experiment]
//! ensemble = toeplitz:entry=gaussian
//! sizes = 64, 128, 256
//! replicas = 20
//! metric = bl_series:terms=64
//! seed = 3
//!
//! [tail]
//! n = 64
//! replicas = 400
//! t_grid = 0.01, 0.02, 0.04
//! function = tent:width=1
//! ```
//!
//! Every key is optional; command-line flags override file values. Unknown
//! sections and keys are errors that name the offending line.

use std::path::Path;
use std::str::FromStr;

use super::{ExperimentConfig, Metric, TestFunction};
use crate::ensembles::{EnsembleSpec, ScaleRule};
use crate::error::{Error, Result};
use crate::measures::ReferenceLaw;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TailSettings {
    pub n: Option<usize>,
    pub replicas: Option<usize>,
    pub t_grid: Option<Vec<f64>>,
    pub function: Option<TestFunction>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub ensemble: Option<EnsembleSpec>,
    pub sizes: Option<Vec<usize>>,
    pub replicas: Option<usize>,
    pub metric: Option<Metric>,
    pub seed: Option<u64>,
    pub scale: Option<ScaleRule>,
    pub reference: Option<ReferenceLaw>,
    pub aspect: Option<f64>,
    pub jobs: Option<usize>,
    pub tail: TailSettings,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Experiment,
    Tail,
}

fn value<T: FromStr>(line: usize, field: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| Error::Config {
        line,
        field: field.to_string(),
        message: format!("cannot parse `{raw}`: {e}"),
    })
}

fn list<T: FromStr>(line: usize, field: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|v| value(line, field, v.trim()))
        .collect()
}

fn set<T>(slot: &mut Option<T>, v: T, line: usize, field: &str) -> Result<()> {
    if slot.is_some() {
        return Err(Error::Config {
            line,
            field: field.to_string(),
            message: "given twice".into(),
        });
    }
    *slot = Some(v);
    Ok(())
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?
            .parse()
    }

    /// Copies every field present in the file into `config`.
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(e) = &self.ensemble {
            config.ensemble = e.clone();
            config.scale_rule = e.scale_rule;
        }
        if let Some(s) = &self.sizes {
            config.sizes = s.clone();
        }
        if let Some(r) = self.replicas {
            config.replicas = r;
        }
        if let Some(m) = self.metric {
            config.metric = m;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(s) = self.scale {
            config.scale_rule = s;
        }
        if self.reference.is_some() {
            config.reference = self.reference;
        }
        if let Some(a) = self.aspect {
            config.aspect = a;
        }
        if let Some(j) = self.jobs {
            config.jobs = j;
        }
    }
}

impl FromStr for ConfigFile {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut out = ConfigFile::default();
        let mut section = Section::None;
        for (k, raw_line) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw_line.trim();
            if body.is_empty() || body.starts_with('#') || body.starts_with(';') {
                continue;
            }
            if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
                section = match name.trim() {
                    "experiment" => Section::Experiment,
                    "tail" => Section::Tail,
                    other => {
                        return Err(Error::Config {
                            line,
                            field: other.to_string(),
                            message: "unknown section (expected `experiment` or `tail`)".into(),
                        })
                    }
                };
                continue;
            }
            let Some((key, raw)) = body.split_once('=') else {
                return Err(Error::Config {
                    line,
                    field: String::new(),
                    message: format!("expected `key = value`, got `{body}`"),
                });
            };
            let (key, raw) = (key.trim(), raw.trim());
            match (section, key) {
                (Section::None, _) => {
                    return Err(Error::Config {
                        line,
                        field: key.to_string(),
                        message: "key outside a section".into(),
                    })
                }
                (Section::Experiment, "ensemble") => set(&mut out.ensemble, value(line, key, raw)?, line, key)?,
                (Section::Experiment, "sizes") => set(&mut out.sizes, list(line, key, raw)?, line, key)?,
                (Section::Experiment, "replicas") => set(&mut out.replicas, value(line, key, raw)?, line, key)?,
                (Section::Experiment, "metric") => set(&mut out.metric, value(line, key, raw)?, line, key)?,
                (Section::Experiment, "seed") => set(&mut out.seed, value(line, key, raw)?, line, key)?,
                (Section::Experiment, "scale") => set(&mut out.scale, value(line, key, raw)?, line, key)?,
                (Section::Experiment, "reference") => set(&mut out.reference, value(line, key, raw)?, line, key)?,
                (Section::Experiment, "aspect") => set(&mut out.aspect, value(line, key, raw)?, line, key)?,
                (Section::Experiment, "jobs") => set(&mut out.jobs, value(line, key, raw)?, line, key)?,
                (Section::Tail, "n") => set(&mut out.tail.n, value(line, key, raw)?, line, key)?,
                (Section::Tail, "replicas") => set(&mut out.tail.replicas, value(line, key, raw)?, line, key)?,
                (Section::Tail, "t_grid") => set(&mut out.tail.t_grid, list(line, key, raw)?, line, key)?,
                (Section::Tail, "function") => set(&mut out.tail.function, value(line, key, raw)?, line, key)?,
                _ => {
                    return Err(Error::Config {
                        line,
                        field: key.to_string(),
                        message: "unknown key".into(),
                    })
                }
            }
        }
        Ok(out)
    }
}
