use std::collections::HashMap;

use super::RelationRule;
use crate::error::{Error, Result};

/// Largest `n` accepted by the exhaustive counter.
pub const EXHAUSTIVE_MAX_N: usize = 64;

/// Combinatorial sizes of an equivalence relation on `[n]^2`.
///
/// * `c1_max`: `max_i #{(j, i', j') : (i, j) ~ (i', j')}`
/// * `c2_max`: `max_{i, j, i'} #{j' : (i, j) ~ (i', j')}`
/// * `c3_count`: `#{(i, j, i') : (i, j) ~ (j, i'), i' != i}`
/// * `d_max`: the largest class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelationCounts {
    pub c1_max: usize,
    pub c2_max: usize,
    pub c3_count: usize,
    pub d_max: usize,
}

/// Counts by direct enumeration of all quadruples. `O(n^4)`, so `n` is
/// capped at [`EXHAUSTIVE_MAX_N`].
pub fn schenker_counts_exhaustive(rule: &RelationRule, n: usize) -> Result<RelationCounts> {
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::InvalidArgument(format!(
            "exhaustive counting is limited to n <= {EXHAUSTIVE_MAX_N}, got {n}"
        )));
    }
    let mut out = RelationCounts {
        c1_max: 0,
        c2_max: 0,
        c3_count: 0,
        d_max: 0,
    };
    for i in 0..n {
        let mut c1 = 0;
        for j in 0..n {
            let mut class = 0;
            for ip in 0..n {
                let mut c2 = 0;
                for jp in 0..n {
                    if rule.related((i, j), (ip, jp)) {
                        c2 += 1;
                    }
                }
                class += c2;
                out.c2_max = out.c2_max.max(c2);
                if ip != i && rule.related((i, j), (j, ip)) {
                    out.c3_count += 1;
                }
            }
            c1 += class;
            out.d_max = out.d_max.max(class);
        }
        out.c1_max = out.c1_max.max(c1);
    }
    Ok(out)
}

/// Counts from the class structure: class sizes and per-row occupancy.
/// `O(n^2)` expected time.
pub fn schenker_counts(rule: &RelationRule, n: usize) -> RelationCounts {
    let mut class_ids: HashMap<(u64, u64), usize> = HashMap::new();
    let mut label = vec![0usize; n * n];
    for i in 0..n {
        for j in 0..n {
            let next = class_ids.len();
            label[i * n + j] = *class_ids.entry(rule.label(i, j)).or_insert(next);
        }
    }
    let mut size = vec![0usize; class_ids.len()];
    let mut row_count: HashMap<(usize, usize), usize> = HashMap::new();
    for i in 0..n {
        for j in 0..n {
            let c = label[i * n + j];
            size[c] += 1;
            *row_count.entry((c, i)).or_insert(0) += 1;
        }
    }
    let d_max = size.iter().copied().max().unwrap_or(0);
    let c2_max = row_count.values().copied().max().unwrap_or(0);
    let mut c1_max = 0;
    let mut c3_count = 0;
    for i in 0..n {
        let mut c1 = 0;
        for j in 0..n {
            let c = label[i * n + j];
            c1 += size[c];
            let in_row_j = row_count.get(&(c, j)).copied().unwrap_or(0);
            // Exclude i' = i when (j, i) itself is in the class.
            c3_count += in_row_j - usize::from(label[j * n + i] == c);
        }
        c1_max = c1_max.max(c1);
    }
    RelationCounts {
        c1_max,
        c2_max,
        c3_count,
        d_max,
    }
}
