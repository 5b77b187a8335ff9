//! Random matrix ensembles with a prescribed block-dependency structure.
//!
//! An ensemble is described by an [`EnsembleSpec`]: a kind (a link family,
//! a band or block layout, a relation, or the non-concentrating
//! counterexample), an entry law and a default scaling. The induced
//! [`DependencyPartition`] groups index pairs into mutually independent
//! blocks; the sampler gives every block its own derived random stream.

mod partition;
mod relations;
mod sample;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use partition::{dependency_partition, rectangular_partition, DependencyPartition};
pub use relations::{schenker_counts, schenker_counts_exhaustive, RelationCounts, EXHAUSTIVE_MAX_N};
pub use sample::{
    counterexample_epsilon, counterexample_size, counterexample_z, sample_matrix,
    sample_matrix_with, sample_rectangular,
};

use crate::entries::{parse_params, split_kind, EntryLaw};
use crate::error::{Error, Result};

/// How the entries inside one dependency block are tied together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockMode {
    /// Every entry of the block is the same draw.
    Replicated,
    /// `sqrt(rho) z_0 + sqrt(1 - rho) z_k` with i.i.d. draws `z` from the
    /// entry law: jointly Gaussian with correlation `rho` for Gaussian laws.
    Correlated { rho: f64 },
}

/// Rule producing the blocks of a block-dependent ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionRule {
    /// Square `size x size` tiles (mirrored across the diagonal for
    /// Hermitian matrices).
    Tiles { size: usize },
    /// Caller-provided blocks for one fixed shape. Square Hermitian use
    /// requires every block to be closed under transposition.
    Explicit {
        rows: usize,
        cols: usize,
        blocks: Arc<Vec<Vec<(usize, usize)>>>,
    },
}

/// Equivalence relations on index pairs, in the Schenker–Schulz setting.
/// All of them relate `(i, j)` with `(j, i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationRule {
    /// Each pair is related only to itself and its transpose.
    Equality,
    /// `|i - j| = |i' - j'|`.
    Toeplitz,
    /// Everything is related.
    Full,
    /// Same diagonal and same run of `run` consecutive rows.
    DiagonalRuns { run: usize },
}

impl RelationRule {
    /// Class label of the unordered pair `{i, j}`.
    pub fn label(&self, i: usize, j: usize) -> (u64, u64) {
        let (lo, hi) = (i.min(j) as u64, i.max(j) as u64);
        match *self {
            RelationRule::Equality => (lo, hi),
            RelationRule::Toeplitz => (hi - lo, 0),
            RelationRule::Full => (0, 0),
            RelationRule::DiagonalRuns { run } => (hi - lo, lo / run.max(1) as u64),
        }
    }

    pub fn related(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        self.label(a.0, a.1) == self.label(b.0, b.1)
    }
}

/// Normalization applied before taking spectral distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleRule {
    /// Divide by `sqrt(n)`.
    InvSqrtN,
    /// Divide by the heavy-tail scale `b_n` of the entry law.
    InvBn,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleKind {
    Wigner,
    Toeplitz,
    Hankel,
    ReversedCirculant,
    SymmetricCirculant,
    /// Independent entries for `|i - j| <= b`, zero elsewhere.
    Band { b: usize },
    BlockDependent { rule: PartitionRule, mode: BlockMode },
    SchenkerSchulz { relation: RelationRule, mode: BlockMode },
    /// `diag(eps X + (1 - eps) Y, I)` with a shared fair coin `eps`, `X` a
    /// Wigner matrix of size `t n` and `Y` an independent one times `dilation`.
    CounterexampleZ { t: f64, dilation: f64 },
}

impl EnsembleKind {
    pub fn rectangular_capable(&self) -> bool {
        matches!(
            self,
            EnsembleKind::Wigner | EnsembleKind::Band { .. } | EnsembleKind::BlockDependent { .. }
        )
    }

    fn name(&self) -> &'static str {
        match self {
            EnsembleKind::Wigner => "wigner",
            EnsembleKind::Toeplitz => "toeplitz",
            EnsembleKind::Hankel => "hankel",
            EnsembleKind::ReversedCirculant => "reversed_circulant",
            EnsembleKind::SymmetricCirculant => "symmetric_circulant",
            EnsembleKind::Band { .. } => "band",
            EnsembleKind::BlockDependent { .. } => "block",
            EnsembleKind::SchenkerSchulz { .. } => "schenker_schulz",
            EnsembleKind::CounterexampleZ { .. } => "counterexample_z",
        }
    }
}

/// Recipe for a random matrix family.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub entry_law: EntryLaw,
    pub scale_rule: ScaleRule,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, entry_law: EntryLaw) -> Self {
        EnsembleSpec {
            kind,
            entry_law,
            scale_rule: ScaleRule::InvSqrtN,
        }
    }

    pub fn wigner(entry_law: EntryLaw) -> Self {
        Self::new(EnsembleKind::Wigner, entry_law)
    }

    pub fn with_scale(mut self, scale_rule: ScaleRule) -> Self {
        self.scale_rule = scale_rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.entry_law.validate()?;
        match &self.kind {
            EnsembleKind::BlockDependent { rule, mode } => {
                if let PartitionRule::Tiles { size: 0 } = rule {
                    return Err(Error::InvalidArgument("tile size must be >= 1".into()));
                }
                validate_mode(mode)
            }
            EnsembleKind::SchenkerSchulz { relation, mode } => {
                if let RelationRule::DiagonalRuns { run: 0 } = relation {
                    return Err(Error::InvalidArgument("run length must be >= 1".into()));
                }
                validate_mode(mode)
            }
            EnsembleKind::CounterexampleZ { t, dilation } => {
                if !(*t > 0.0 && *t < 1.0) {
                    return Err(Error::InvalidArgument(format!("t must lie in (0, 1), got {t}")));
                }
                if !(dilation.is_finite() && *dilation != 1.0 && *dilation > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "dilation must be positive and != 1, got {dilation}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn validate_mode(mode: &BlockMode) -> Result<()> {
    match mode {
        BlockMode::Correlated { rho } if !(0.0..=1.0).contains(rho) => Err(Error::InvalidArgument(
            format!("correlation must lie in [0, 1], got {rho}"),
        )),
        _ => Ok(()),
    }
}

impl fmt::Display for ScaleRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleRule::InvSqrtN => "inv_sqrt_n",
            ScaleRule::InvBn => "inv_bn",
        })
    }
}

impl FromStr for ScaleRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inv_sqrt_n" => Ok(ScaleRule::InvSqrtN),
            "inv_bn" => Ok(ScaleRule::InvBn),
            other => Err(Error::Parse(format!("unknown scale rule `{other}`"))),
        }
    }
}

fn mode_params(mode: &BlockMode) -> String {
    match mode {
        BlockMode::Replicated => "mode=replicated".into(),
        BlockMode::Correlated { rho } => format!("mode=correlated,rho={rho:?}"),
    }
}

impl fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.kind.name())?;
        match &self.kind {
            EnsembleKind::Band { b } => write!(f, "b={b},")?,
            EnsembleKind::BlockDependent { rule, mode } => {
                match rule {
                    PartitionRule::Tiles { size } => write!(f, "size={size},")?,
                    PartitionRule::Explicit { .. } => write!(f, "size=explicit,")?,
                }
                write!(f, "{},", mode_params(mode))?;
            }
            EnsembleKind::SchenkerSchulz { relation, mode } => {
                match relation {
                    RelationRule::Equality => write!(f, "relation=equality,")?,
                    RelationRule::Toeplitz => write!(f, "relation=toeplitz,")?,
                    RelationRule::Full => write!(f, "relation=full,")?,
                    RelationRule::DiagonalRuns { run } => {
                        write!(f, "relation=diagonal_runs,run={run},")?
                    }
                }
                write!(f, "{},", mode_params(mode))?;
            }
            EnsembleKind::CounterexampleZ { t, dilation } => {
                write!(f, "t={t:?},dilation={dilation:?},")?
            }
            _ => {}
        }
        write!(f, "scale={},entry={}", self.scale_rule, self.entry_law)
    }
}

impl FromStr for EnsembleSpec {
    type Err = Error;

    /// Parses `kind[:key=value,...]`, e.g. `toeplitz:entry=rademacher` or
    /// `counterexample_z:t=0.5`. The `entry` value may carry its own
    /// parameters (`entry=heavy_cubic:cut=1.0`) and must come last when it
    /// does.
    fn from_str(s: &str) -> Result<Self> {
        let (kind_name, rest) = split_kind(s);
        // `entry=` swallows the remainder so nested law parameters survive.
        let (head, entry) = match rest.find("entry=") {
            Some(pos) => (rest[..pos].trim_end_matches(','), Some(rest[pos + 6..].trim())),
            None => (rest, None),
        };
        let params = parse_params(head)?;
        let mut used = vec![false; params.len()];
        let mut take = |key: &str| -> Option<String> {
            params.iter().enumerate().find(|(_, (k, _))| k == key).map(|(i, (_, v))| {
                used[i] = true;
                v.clone()
            })
        };
        fn num<T: FromStr>(key: &str, v: Option<String>, default: T) -> Result<T> {
            match v {
                Some(v) => v
                    .parse::<T>()
                    .map_err(|_| Error::Parse(format!("`{key}` has invalid value `{v}`"))),
                None => Ok(default),
            }
        }
        let mode = |take: &mut dyn FnMut(&str) -> Option<String>| -> Result<BlockMode> {
            match take("mode").as_deref() {
                None | Some("replicated") => Ok(BlockMode::Replicated),
                Some("correlated") => Ok(BlockMode::Correlated {
                    rho: num("rho", take("rho"), 0.5)?,
                }),
                Some(other) => Err(Error::Parse(format!("unknown block mode `{other}`"))),
            }
        };

        let kind = match kind_name {
            "wigner" => EnsembleKind::Wigner,
            "toeplitz" => EnsembleKind::Toeplitz,
            "hankel" => EnsembleKind::Hankel,
            "reversed_circulant" => EnsembleKind::ReversedCirculant,
            "symmetric_circulant" => EnsembleKind::SymmetricCirculant,
            "band" => EnsembleKind::Band {
                b: num("b", take("b"), 1usize)?,
            },
            "block" => {
                let size = num("size", take("size"), 2usize)?;
                EnsembleKind::BlockDependent {
                    rule: PartitionRule::Tiles { size },
                    mode: mode(&mut take)?,
                }
            }
            "schenker_schulz" => {
                let relation = match take("relation").as_deref() {
                    None | Some("equality") => RelationRule::Equality,
                    Some("toeplitz") => RelationRule::Toeplitz,
                    Some("full") => RelationRule::Full,
                    Some("diagonal_runs") => RelationRule::DiagonalRuns {
                        run: num("run", take("run"), 4usize)?,
                    },
                    Some(other) => return Err(Error::Parse(format!("unknown relation `{other}`"))),
                };
                EnsembleKind::SchenkerSchulz {
                    relation,
                    mode: mode(&mut take)?,
                }
            }
            "counterexample_z" => EnsembleKind::CounterexampleZ {
                t: num("t", take("t"), 0.5)?,
                dilation: num("dilation", take("dilation"), 2.0)?,
            },
            other => return Err(Error::Parse(format!("unknown ensemble kind `{other}`"))),
        };
        let scale_rule = match take("scale") {
            Some(v) => v.parse()?,
            None => ScaleRule::InvSqrtN,
        };
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::Parse(format!(
                "unknown parameter `{}` for `{kind_name}`",
                params[i].0
            )));
        }
        let entry_law = match entry {
            Some(e) => e.parse()?,
            None => EntryLaw::Rademacher,
        };
        let spec = EnsembleSpec {
            kind,
            entry_law,
            scale_rule,
        };
        spec.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(spec)
    }
}
