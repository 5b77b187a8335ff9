//! Hermitian eigenvalues, empirical spectral distributions and hermitization.
//!
//! One real-symmetric solver serves every case: Householder reduction to
//! tridiagonal form followed by implicit-shift QL. A complex Hermitian `H`
//! is handed to it through the real embedding `[[Re H, -Im H], [Im H, Re H]]`,
//! whose spectrum is that of `H` with every eigenvalue doubled. Real inputs
//! skip the embedding.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{EntryGrid, HermitianMatrix, RectMatrix};
use crate::measures::EmpiricalMeasure;

/// Off-diagonal deflation threshold relative to the neighbouring diagonal.
const DEFLATION_REL_TOL: f64 = 1e-12;
/// QL iterations allowed per eigenvalue before giving up.
const MAX_SWEEPS: usize = 50;

/// Eigenvalues in ascending order, with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// One-column CSV with header `lambda`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda\n");
        for v in &self.values {
            writeln!(out, "{v:?}").unwrap();
        }
        out
    }
}

/// All eigenvalues of `h`, ascending.
pub fn eigenvalues(h: &HermitianMatrix) -> Result<Spectrum> {
    if !h.is_finite() {
        return Err(Error::NonFinite("matrix has non-finite entries".into()));
    }
    let n = h.n();
    let values = if h.is_real() {
        let a: Vec<f64> = h.data().iter().map(|z| z.re).collect();
        symmetric_eigenvalues(n, a)?
    } else {
        let m = 2 * n;
        let mut a = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                let z = h.get(i, j);
                a[i * m + j] = z.re;
                a[(i + n) * m + (j + n)] = z.re;
                a[i * m + (j + n)] = -z.im;
                a[(i + n) * m + j] = z.im;
            }
        }
        let doubled = symmetric_eigenvalues(m, a)?;
        // Each value appears twice; average the pair.
        doubled
            .chunks_exact(2)
            .map(|p| 0.5 * (p[0] + p[1]))
            .collect()
    };
    Ok(Spectrum { values })
}

/// Eigenvalues of a real symmetric matrix given row-major (only the lower
/// triangle is read). Ascending.
pub fn symmetric_eigenvalues(n: usize, mut a: Vec<f64>) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let (mut d, mut e) = tridiagonalize(n, &mut a);
    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(|x, y| x.total_cmp(y));
    Ok(d)
}

/// Householder reduction. Returns the diagonal `d` and the off-diagonal `e`
/// with `e[k]` coupling `d[k]` and `d[k + 1]` (`e[n - 1] = 0`).
fn tridiagonalize(n: usize, a: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let col = |a: &[f64], i: usize| a[(k + 1 + i) * n + k];

        let scale = (0..len).fold(0.0f64, |s, i| s.max(col(a, i).abs()));
        let tail = (1..len).fold(0.0f64, |s, i| s.max(col(a, i).abs()));
        d[k] = a[k * n + k];
        if tail == 0.0 {
            // Already reduced in this column.
            e[k] = col(a, 0);
            continue;
        }
        let mut sigma = 0.0;
        for i in 0..len {
            v[i] = col(a, i) / scale;
            sigma += v[i] * v[i];
        }
        let norm = sigma.sqrt();
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        e[k] = alpha * scale;
        v[0] -= alpha;
        let vtv = sigma - 2.0 * alpha * (v[0] + alpha) + alpha * alpha;
        let beta = 2.0 / vtv;

        // p = beta * A22 v, using the lower triangle of A22.
        for i in 0..len {
            p[i] = 0.0;
        }
        for i in 0..len {
            let row = (k + 1 + i) * n + (k + 1);
            let mut acc = a[row + i] * v[i];
            for j in 0..i {
                let aij = a[row + j];
                acc += aij * v[j];
                p[j] += aij * v[i];
            }
            p[i] += acc;
        }
        let mut vtp = 0.0;
        for i in 0..len {
            p[i] *= beta;
            vtp += v[i] * p[i];
        }
        let kk = 0.5 * beta * vtp;
        for i in 0..len {
            p[i] -= kk * v[i];
        }
        // A22 -= v q^T + q v^T, lower triangle only.
        for i in 0..len {
            let row = (k + 1 + i) * n + (k + 1);
            let (vi, qi) = (v[i], p[i]);
            for j in 0..=i {
                a[row + j] -= vi * p[j] + qi * v[j];
            }
        }
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + (n - 2)];
        e[n - 2] = a[(n - 1) * n + (n - 2)];
    }
    d[n - 1] = a[(n - 1) * n + (n - 1)];
    e[n - 1] = 0.0;
    (d, e)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix; eigenvalues are left
/// in `d` (unsorted).
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    let norm = d
        .iter()
        .chain(e.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let abs_floor = f64::EPSILON * norm;

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= DEFLATION_REL_TOL * dd || e[m].abs() <= abs_floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::NoConvergence {
                    index: l,
                    sweeps: MAX_SWEEPS,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Empirical spectral distribution of `h / scale`.
pub fn esd(h: &HermitianMatrix, scale: f64) -> Result<EmpiricalMeasure> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let spectrum = eigenvalues(h)?;
    EmpiricalMeasure::uniform(spectrum.values().iter().map(|v| v / scale).collect())
}

/// The Hermitian `(n + N) x (n + N)` matrix `[[0, X], [X*, 0]]`.
pub fn hermitize(x: &RectMatrix) -> HermitianMatrix {
    let (r, c) = (x.rows(), x.cols());
    HermitianMatrix::from_upper(r + c, |i, j| {
        if i < r && j >= r {
            x.get(i, j - r)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// The `n = rows` singular values of `X` (eigenvalues of `sqrt(X X*)`),
/// ascending, read off the hermitized spectrum.
pub fn singular_values(x: &RectMatrix) -> Result<Vec<f64>> {
    let spectrum = eigenvalues(&hermitize(x))?;
    let vals = spectrum.values();
    let mut top: Vec<f64> = vals[vals.len() - x.rows()..].iter().map(|v| v.abs()).collect();
    top.sort_by(|a, b| a.total_cmp(b));
    Ok(top)
}

/// ESD of `sqrt(X X*) / scale`: `rows` atoms of weight `1 / rows`.
pub fn singular_esd(x: &RectMatrix, scale: f64) -> Result<EmpiricalMeasure> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let sv = singular_values(x)?;
    EmpiricalMeasure::uniform(sv.into_iter().map(|v| v / scale).collect())
}
