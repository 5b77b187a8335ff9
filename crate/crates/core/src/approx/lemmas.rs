//! Matrix inequalities as margins: each checker returns
//! `right-hand side - left-hand side`, nonnegative when the inequality holds.

use crate::error::{invalid, Result};
use crate::matrix::{EntryGrid, HermitianMatrix};
use crate::measures::kolmogorov;
use crate::spectra::{eigenvalues, esd};

/// `||A - B||_HS^2 - sum_i (lambda_i(A) - lambda_i(B))^2`, both spectra
/// sorted ascending.
pub fn check_hoffman_wielandt(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    a.check_same_shape(b)?;
    let la = eigenvalues(a)?;
    let lb = eigenvalues(b)?;
    let paired: f64 = la
        .values()
        .iter()
        .zip(lb.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(a.sub(b)?.hs_norm_sqr() - paired)
}

/// `(1/n) ||A - B||_HS - |int f dL(A/sqrt n) - int f dL(B/sqrt n)|` for a
/// 1-Lipschitz `f`.
pub fn check_functional_lipschitz(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    a.check_same_shape(b)?;
    let n = a.n();
    if n == 0 {
        return Ok(0.0);
    }
    let s = (n as f64).sqrt();
    let ia = esd(a, s)?.integrate(&f)?;
    let ib = esd(b, s)?.integrate(&f)?;
    Ok(a.sub(b)?.hs_norm() / n as f64 - (ia - ib).abs())
}

/// `lam int f dL(A) + (1 - lam) int f dL(B) - int f dL(lam A + (1 - lam) B)`
/// for convex `f`, with unnormalized spectral distributions.
pub fn check_klein_convexity(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    f: impl Fn(f64) -> f64,
    lam: f64,
) -> Result<f64> {
    a.check_same_shape(b)?;
    if !(0.0..=1.0).contains(&lam) {
        return Err(invalid(format!("lambda must lie in [0, 1], got {lam}")));
    }
    if a.n() == 0 {
        return Ok(0.0);
    }
    let mix = a.combine(lam, b, 1.0 - lam)?;
    let ia = esd(a, 1.0)?.integrate(&f)?;
    let ib = esd(b, 1.0)?.integrate(&f)?;
    let im = esd(&mix, 1.0)?.integrate(&f)?;
    Ok(lam * ia + (1.0 - lam) * ib - im)
}

/// Relative cutoff below which a singular value of `A - B` counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// `rank(A - B) / n - kolmogorov(L(A), L(B))`. The rank counts singular
/// values above `RANK_TOL * ||A - B||_HS`.
pub fn check_rank_inequality(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    a.check_same_shape(b)?;
    let n = a.n();
    if n == 0 {
        return Ok(0.0);
    }
    let diff = a.sub(b)?;
    let cutoff = RANK_TOL * diff.hs_norm();
    let rank = eigenvalues(&diff)?
        .values()
        .iter()
        .filter(|v| v.abs() > cutoff)
        .count();
    let k = kolmogorov(&esd(a, 1.0)?, &esd(b, 1.0)?);
    Ok(rank as f64 / n as f64 - k)
}

/// `sum_i ||row_i||^r - sum_i |lambda_i|^r` for `0 < r <= 2`.
pub fn check_moment_estimate(x: &HermitianMatrix, r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 2.0) {
        return Err(invalid(format!("r must lie in (0, 2], got {r}")));
    }
    let rows: f64 = x.row_norms().iter().map(|v| v.powf(r)).sum();
    let eig: f64 = eigenvalues(x)?.values().iter().map(|v| v.abs().powf(r)).sum();
    Ok(rows - eig)
}
