use num_complex::Complex64;
use rand::Rng;

use super::{dependency_partition, rectangular_partition, BlockMode, DependencyPartition};
use super::{EnsembleKind, EnsembleSpec};
use crate::entries::{EntryLaw, RngStream, StreamRng};
use crate::error::{Error, Result};
use crate::matrix::{EntryGrid as _, HermitianMatrix, RectMatrix};

/// Draws an `n x n` Hermitian matrix from `spec`. Block `k` of the
/// dependency partition uses `stream.child_generator(k)`; the counterexample
/// uses `stream.derive(0)` for its coin and `derive(1)`, `derive(2)` for the
/// two Wigner blocks.
///
/// Entries are unscaled; divide by `sqrt(n)` (or `b_n`) downstream.
pub fn sample_matrix(spec: &EnsembleSpec, n: usize, stream: &RngStream) -> Result<HermitianMatrix> {
    if let EnsembleKind::CounterexampleZ { t, dilation } = spec.kind {
        spec.validate()?;
        return counterexample_z(
            n,
            t,
            dilation,
            &spec.entry_law,
            &stream.derive(0),
            [&stream.derive(1), &stream.derive(2)],
        );
    }
    sample_matrix_with(spec, n, |b| stream.child_generator(b as u64))
}

/// Like [`sample_matrix`] with the generator of each block supplied by the
/// caller. Handy for resampling a single block while keeping the rest.
pub fn sample_matrix_with(
    spec: &EnsembleSpec,
    n: usize,
    block_rng: impl FnMut(usize) -> StreamRng,
) -> Result<HermitianMatrix> {
    if matches!(spec.kind, EnsembleKind::CounterexampleZ { .. }) {
        return Err(Error::Unsupported(
            "the counterexample is sampled from streams, not per-block generators".into(),
        ));
    }
    let p = dependency_partition(spec, n)?;
    let upper = fill_blocks(spec, &p, true, block_rng);
    Ok(HermitianMatrix::from_upper(n, |i, j| upper[i * n + j]))
}

/// Draws an `n x cols` matrix with independent blocks, for singular value
/// experiments. Supports Wigner (i.i.d.), band and block layouts.
pub fn sample_rectangular(
    spec: &EnsembleSpec,
    n: usize,
    cols: usize,
    stream: &RngStream,
) -> Result<RectMatrix> {
    let p = rectangular_partition(spec, n, cols)?;
    let data = fill_blocks(spec, &p, false, |b| stream.child_generator(b as u64));
    RectMatrix::new(n, cols, data)
}

fn structural_zero(kind: &EnsembleKind, i: usize, j: usize) -> bool {
    match kind {
        EnsembleKind::Band { b } => i.abs_diff(j) > *b,
        _ => false,
    }
}

fn block_mode(kind: &EnsembleKind) -> BlockMode {
    match kind {
        EnsembleKind::BlockDependent { mode, .. } | EnsembleKind::SchenkerSchulz { mode, .. } => *mode,
        _ => BlockMode::Replicated,
    }
}

/// Row-major values for every cell (only `i <= j` when `hermitian`). Blocks
/// are visited in id order so each generator is created once.
fn fill_blocks(
    spec: &EnsembleSpec,
    p: &DependencyPartition,
    hermitian: bool,
    mut block_rng: impl FnMut(usize) -> StreamRng,
) -> Vec<Complex64> {
    let (rows, cols) = (p.n_rows(), p.n_cols());
    let law = &spec.entry_law;
    let mode = block_mode(&spec.kind);
    let in_scope = |i: usize, j: usize| !hermitian || i <= j;

    // Counting sort of the cells in scope by block id.
    let mut start = vec![0usize; p.num_blocks() + 1];
    for i in 0..rows {
        for j in 0..cols {
            if in_scope(i, j) {
                start[p.block_of(i, j) + 1] += 1;
            }
        }
    }
    for b in 0..p.num_blocks() {
        start[b + 1] += start[b];
    }
    let mut cursor = start.clone();
    let mut cells = vec![0usize; start[p.num_blocks()]];
    for i in 0..rows {
        for j in 0..cols {
            if in_scope(i, j) {
                let b = p.block_of(i, j);
                cells[cursor[b]] = i * cols + j;
                cursor[b] += 1;
            }
        }
    }

    let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
    for b in 0..p.num_blocks() {
        let block = &cells[start[b]..start[b + 1]];
        let Some(&first) = block.first() else { continue };
        if structural_zero(&spec.kind, first / cols, first % cols) {
            continue;
        }
        let is_diag = |pos: usize| hermitian && pos / cols == pos % cols;
        let mut rng = block_rng(b);
        match mode {
            BlockMode::Replicated => {
                let mut z = law.sample(&mut rng);
                if block.iter().any(|&pos| is_diag(pos)) {
                    z = law.realify(z);
                }
                for &pos in block {
                    data[pos] = z;
                }
            }
            BlockMode::Correlated { rho } => {
                let (a, c) = (rho.sqrt(), (1.0 - rho).sqrt());
                let z0 = law.sample(&mut rng);
                for &pos in block {
                    let x = z0 * a + law.sample(&mut rng) * c;
                    data[pos] = if is_diag(pos) { law.realify(x) } else { x };
                }
            }
        }
    }
    data
}

/// Size `t n` of the random block, which must be a whole number in `[1, n)`.
pub fn counterexample_size(n: usize, t: f64) -> Result<usize> {
    let tn = t * n as f64;
    let m = tn.round();
    if (tn - m).abs() > 1e-9 || m < 1.0 || m >= n as f64 {
        return Err(Error::InvalidArgument(format!(
            "t n = {tn} must be a whole number in [1, {n})"
        )));
    }
    Ok(m as usize)
}

/// The shared fair coin of the counterexample.
pub fn counterexample_epsilon(epsilon_stream: &RngStream) -> bool {
    epsilon_stream.generator().random_bool(0.5)
}

/// `diag(eps X + (1 - eps) Y, I_{n - m})` with `m = t n`, `X` Wigner from
/// `sub_streams[0]` and `Y` = `dilation` times Wigner from `sub_streams[1]`.
/// The top-left block is one dependency block of size `m^2`.
pub fn counterexample_z(
    n: usize,
    t: f64,
    dilation: f64,
    law: &EntryLaw,
    epsilon_stream: &RngStream,
    sub_streams: [&RngStream; 2],
) -> Result<HermitianMatrix> {
    let m = counterexample_size(n, t)?;
    let wigner = EnsembleSpec::wigner(*law);
    let top = if counterexample_epsilon(epsilon_stream) {
        sample_matrix(&wigner, m, sub_streams[0])?
    } else {
        sample_matrix(&wigner, m, sub_streams[1])?.scale(dilation)
    };
    Ok(HermitianMatrix::from_upper(n, |i, j| {
        if i < m && j < m {
            top.get(i, j)
        } else if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}
