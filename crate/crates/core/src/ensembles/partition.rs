use std::collections::HashMap;

use super::{EnsembleKind, EnsembleSpec, PartitionRule};
use crate::error::{Error, Result};

/// A partition of the index grid into dependency blocks.
///
/// Entries in different blocks are independent. Block ids are assigned in
/// order of first appearance when the grid is scanned row-major, so they are
/// stable and can key per-block random streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyPartition {
    n_rows: usize,
    n_cols: usize,
    labels: Vec<u32>,
    sizes: Vec<usize>,
    d: usize,
}

impl DependencyPartition {
    /// Groups cells with equal keys. Used by every built-in ensemble.
    pub(crate) fn from_keys<K: std::hash::Hash + Eq>(
        n_rows: usize,
        n_cols: usize,
        mut key: impl FnMut(usize, usize) -> K,
    ) -> Self {
        let mut ids: HashMap<K, u32> = HashMap::new();
        let mut labels = Vec::with_capacity(n_rows * n_cols);
        let mut sizes = Vec::new();
        for i in 0..n_rows {
            for j in 0..n_cols {
                let next = sizes.len() as u32;
                let id = *ids.entry(key(i, j)).or_insert(next);
                if id == next {
                    sizes.push(0);
                }
                sizes[id as usize] += 1;
                labels.push(id);
            }
        }
        Self::finish(n_rows, n_cols, labels, sizes)
    }

    fn finish(n_rows: usize, n_cols: usize, labels: Vec<u32>, sizes: Vec<usize>) -> Self {
        let d = sizes.iter().copied().max().unwrap_or(0);
        DependencyPartition {
            n_rows,
            n_cols,
            labels,
            sizes,
            d,
        }
    }

    /// Validates caller-supplied blocks: every cell covered exactly once
    /// and, when `symmetric`, each block closed under `(i, j) -> (j, i)`.
    /// Block ids are renumbered by first appearance.
    pub fn from_blocks(
        n_rows: usize,
        n_cols: usize,
        blocks: &[Vec<(usize, usize)>],
        symmetric: bool,
    ) -> Result<Self> {
        if symmetric && n_rows != n_cols {
            return Err(Error::ShapeMismatch(format!(
                "symmetric partition needs a square grid, got {n_rows}x{n_cols}"
            )));
        }
        const UNSET: u32 = u32::MAX;
        let mut raw = vec![UNSET; n_rows * n_cols];
        for (b, block) in blocks.iter().enumerate() {
            for &(i, j) in block {
                if i >= n_rows || j >= n_cols {
                    return Err(Error::NotAPartition {
                        row: i,
                        col: j,
                        problem: "outside the grid",
                    });
                }
                let cell = &mut raw[i * n_cols + j];
                if *cell != UNSET {
                    return Err(Error::NotAPartition {
                        row: i,
                        col: j,
                        problem: "covered by two blocks",
                    });
                }
                *cell = b as u32;
            }
        }
        if let Some(pos) = raw.iter().position(|&c| c == UNSET) {
            return Err(Error::NotAPartition {
                row: pos / n_cols,
                col: pos % n_cols,
                problem: "not covered by any block",
            });
        }
        if symmetric {
            for i in 0..n_rows {
                for j in i + 1..n_cols {
                    if raw[i * n_cols + j] != raw[j * n_cols + i] {
                        return Err(Error::NotAPartition {
                            row: i,
                            col: j,
                            problem: "block is not closed under transposition",
                        });
                    }
                }
            }
        }
        Ok(Self::from_keys(n_rows, n_cols, |i, j| raw[i * n_cols + j]))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Largest block size.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Row-major block ids.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn block_of(&self, i: usize, j: usize) -> usize {
        self.labels[i * self.n_cols + j] as usize
    }

    /// Cells of every block, each list row-major.
    pub fn blocks(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out: Vec<Vec<(usize, usize)>> =
            self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (pos, &b) in self.labels.iter().enumerate() {
            out[b as usize].push((pos / self.n_cols, pos % self.n_cols));
        }
        out
    }
}

/// The partition of the `n x n` grid induced by `spec`.
///
/// Structural zeros (outside a band, off the diagonal blocks of the
/// counterexample) are singletons.
pub fn dependency_partition(spec: &EnsembleSpec, n: usize) -> Result<DependencyPartition> {
    spec.validate()?;
    // Keys: (tag, a, b). Tag 0 carries the random blocks, tag 1 marks
    // deterministic cells.
    let p = match &spec.kind {
        EnsembleKind::Wigner => DependencyPartition::from_keys(n, n, |i, j| (0u8, i.min(j), i.max(j))),
        EnsembleKind::Toeplitz => DependencyPartition::from_keys(n, n, |i, j| i.abs_diff(j)),
        EnsembleKind::Hankel => DependencyPartition::from_keys(n, n, |i, j| i + j),
        EnsembleKind::ReversedCirculant => DependencyPartition::from_keys(n, n, |i, j| (i + j) % n),
        // Twice the circular distance n/2 - |n/2 - |i - j||, kept integral.
        EnsembleKind::SymmetricCirculant => {
            DependencyPartition::from_keys(n, n, |i, j| n.abs_diff(2 * i.abs_diff(j)))
        }
        EnsembleKind::Band { b } => DependencyPartition::from_keys(n, n, |i, j| {
            if i.abs_diff(j) <= *b {
                (0u8, i.min(j), i.max(j))
            } else {
                (1u8, i, j)
            }
        }),
        EnsembleKind::BlockDependent { rule, .. } => match rule {
            PartitionRule::Tiles { size } => {
                DependencyPartition::from_keys(n, n, |i, j| (i.min(j) / size, i.max(j) / size))
            }
            PartitionRule::Explicit { rows, cols, blocks } => {
                check_explicit_shape(*rows, *cols, n, n)?;
                DependencyPartition::from_blocks(n, n, blocks, true)?
            }
        },
        EnsembleKind::SchenkerSchulz { relation, .. } => {
            DependencyPartition::from_keys(n, n, |i, j| relation.label(i, j))
        }
        EnsembleKind::CounterexampleZ { t, .. } => {
            let m = super::sample::counterexample_size(n, *t)?;
            DependencyPartition::from_keys(n, n, |i, j| {
                if i < m && j < m {
                    (0u8, 0, 0)
                } else {
                    (1u8, i, j)
                }
            })
        }
    };
    Ok(p)
}

/// The partition of an `n x cols` grid for rectangular sampling. Only
/// independent, band and block layouts have a rectangular form.
pub fn rectangular_partition(
    spec: &EnsembleSpec,
    n: usize,
    cols: usize,
) -> Result<DependencyPartition> {
    spec.validate()?;
    let p = match &spec.kind {
        EnsembleKind::Wigner | EnsembleKind::Band { .. } => {
            DependencyPartition::from_keys(n, cols, |i, j| (i, j))
        }
        EnsembleKind::BlockDependent { rule, .. } => match rule {
            PartitionRule::Tiles { size } => {
                DependencyPartition::from_keys(n, cols, |i, j| (i / size, j / size))
            }
            PartitionRule::Explicit { rows, cols: c, blocks } => {
                check_explicit_shape(*rows, *c, n, cols)?;
                DependencyPartition::from_blocks(n, cols, blocks, false)?
            }
        },
        other => {
            return Err(Error::Unsupported(format!(
                "`{}` ensembles have no rectangular form",
                other.name()
            )))
        }
    };
    Ok(p)
}

fn check_explicit_shape(rows: usize, cols: usize, n: usize, m: usize) -> Result<()> {
    if rows != n || cols != m {
        return Err(Error::ShapeMismatch(format!(
            "explicit partition is {rows}x{cols}, requested {n}x{m}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{BlockMode, RelationRule};
    use crate::entries::EntryLaw;
    use std::sync::Arc;

    fn part(kind: EnsembleKind, n: usize) -> DependencyPartition {
        dependency_partition(&EnsembleSpec::new(kind, EntryLaw::Rademacher), n).unwrap()
    }

    fn sorted_sizes(p: &DependencyPartition) -> Vec<usize> {
        let mut s = p.sizes().to_vec();
        s.sort_unstable();
        s
    }

    #[test]
    fn wigner_blocks_are_pairs() {
        let p = part(EnsembleKind::Wigner, 5);
        assert_eq!(p.d(), 2);
        assert_eq!(p.num_blocks(), 15);
        assert_eq!(p.block_of(1, 3), p.block_of(3, 1));
        assert_ne!(p.block_of(1, 3), p.block_of(1, 2));
    }

    #[test]
    fn toeplitz_n4() {
        let p = part(EnsembleKind::Toeplitz, 4);
        assert_eq!(sorted_sizes(&p), vec![2, 4, 4, 6]);
        assert_eq!(p.d(), 6);
    }

    #[test]
    fn link_family_block_sizes() {
        // Hankel: anti-diagonals, largest is the main one.
        assert_eq!(part(EnsembleKind::Hankel, 5).d(), 5);
        // Reversed circulant: every residue class has exactly n cells.
        let p = part(EnsembleKind::ReversedCirculant, 6);
        assert_eq!(p.sizes(), &[6; 6]);
        // Symmetric circulant, odd n: diagonal n cells, other classes 2n.
        let p = part(EnsembleKind::SymmetricCirculant, 5);
        assert_eq!(sorted_sizes(&p), vec![5, 10, 10]);
        // Even n: distance n/2 class has n cells.
        let p = part(EnsembleKind::SymmetricCirculant, 6);
        assert_eq!(sorted_sizes(&p), vec![6, 6, 12, 12]);
        assert_eq!(p.block_of(0, 1), p.block_of(0, 5));
    }

    #[test]
    fn band_zeros_are_singletons() {
        let p = part(EnsembleKind::Band { b: 1 }, 4);
        assert_eq!(p.d(), 2);
        assert_ne!(p.block_of(0, 3), p.block_of(3, 0));
        assert_eq!(p.block_of(0, 1), p.block_of(1, 0));
    }

    #[test]
    fn tiles_and_relations() {
        let p = part(
            EnsembleKind::BlockDependent {
                rule: PartitionRule::Tiles { size: 2 },
                mode: BlockMode::Replicated,
            },
            4,
        );
        // Diagonal tiles have 4 cells, off-diagonal tiles are merged with
        // their mirror image.
        assert_eq!(sorted_sizes(&p), vec![4, 4, 8]);
        let p = part(
            EnsembleKind::SchenkerSchulz {
                relation: RelationRule::Full,
                mode: BlockMode::Replicated,
            },
            3,
        );
        assert_eq!(p.d(), 9);
    }

    #[test]
    fn explicit_blocks_validated() {
        let ok = vec![vec![(0, 0)], vec![(0, 1), (1, 0)], vec![(1, 1)]];
        let p = DependencyPartition::from_blocks(2, 2, &ok, true).unwrap();
        assert_eq!(p.d(), 2);
        assert_eq!(p.blocks(), ok);

        let overlap = vec![vec![(0, 0), (0, 1)], vec![(0, 1), (1, 0)], vec![(1, 1)]];
        assert!(matches!(
            DependencyPartition::from_blocks(2, 2, &overlap, true),
            Err(Error::NotAPartition { row: 0, col: 1, .. })
        ));
        let gap = vec![vec![(0, 0)], vec![(0, 1), (1, 0)]];
        assert!(matches!(
            DependencyPartition::from_blocks(2, 2, &gap, true),
            Err(Error::NotAPartition { row: 1, col: 1, .. })
        ));
        let asym = vec![vec![(0, 0)], vec![(0, 1)], vec![(1, 0)], vec![(1, 1)]];
        assert!(DependencyPartition::from_blocks(2, 2, &asym, true).is_err());
        assert!(DependencyPartition::from_blocks(2, 2, &asym, false).is_ok());

        let spec = EnsembleSpec::new(
            EnsembleKind::BlockDependent {
                rule: PartitionRule::Explicit {
                    rows: 2,
                    cols: 2,
                    blocks: Arc::new(ok),
                },
                mode: BlockMode::Replicated,
            },
            EntryLaw::Rademacher,
        );
        assert!(dependency_partition(&spec, 2).is_ok());
        assert!(matches!(dependency_partition(&spec, 3), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn counterexample_partition() {
        let p = part(EnsembleKind::CounterexampleZ { t: 0.5, dilation: 2.0 }, 8);
        assert_eq!(p.d(), 16);
        assert!(dependency_partition(
            &EnsembleSpec::new(EnsembleKind::CounterexampleZ { t: 0.3, dilation: 2.0 }, EntryLaw::Rademacher),
            8
        )
        .is_err());
    }

    #[test]
    fn rectangular_shapes() {
        let spec = EnsembleSpec::wigner(EntryLaw::Rademacher);
        let p = rectangular_partition(&spec, 3, 5).unwrap();
        assert_eq!(p.d(), 1);
        assert_eq!(p.num_blocks(), 15);
        let toe = EnsembleSpec::new(EnsembleKind::Toeplitz, EntryLaw::Rademacher);
        assert!(matches!(rectangular_partition(&toe, 3, 5), Err(Error::Unsupported(_))));
    }
}
