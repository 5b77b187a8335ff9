//! Scalar entry laws and reproducible, splittable random streams.
//!
//! Every law knows its truncated second moment `l(t) = E|x|^2 1{|x| <= t}`
//! in closed form, together with the two tail functionals used by the
//! heavy-tail diagnostics.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

/// Generator handed out by [`RngStream`].
pub type StreamRng = ChaCha8Rng;

/// Distribution of a single matrix entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntryLaw {
    /// Fair ±1.
    Rademacher,
    /// Uniform on `[-bound, bound]`.
    UniformBounded { bound: f64 },
    /// Real standard Gaussian.
    StdGaussianReal,
    /// `(g1 + i g2) / sqrt(2)`, so that `E|x|^2 = 1`.
    StdGaussianComplex,
    /// Symmetric law with density `cut^2 |x|^{-3}` on `|x| >= cut`.
    /// Mean zero, infinite variance, in the Gaussian domain of attraction.
    HeavyTailCubic { cut: f64 },
}

impl EntryLaw {
    /// Checks parameters; constructors via `FromStr` call this.
    pub fn validate(&self) -> Result<()> {
        match *self {
            EntryLaw::UniformBounded { bound } if !(bound > 0.0 && bound.is_finite()) => {
                Err(invalid(format!("uniform bound must be positive, got {bound}")))
            }
            EntryLaw::HeavyTailCubic { cut } if !(cut > 0.0 && cut.is_finite()) => {
                Err(invalid(format!("heavy_cubic cut must be positive, got {cut}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, EntryLaw::StdGaussianComplex)
    }

    pub fn has_finite_variance(&self) -> bool {
        !matches!(self, EntryLaw::HeavyTailCubic { .. })
    }

    /// `E|x|^2`, `None` when infinite.
    pub fn second_moment(&self) -> Option<f64> {
        match *self {
            EntryLaw::Rademacher | EntryLaw::StdGaussianReal | EntryLaw::StdGaussianComplex => {
                Some(1.0)
            }
            EntryLaw::UniformBounded { bound } => Some(bound * bound / 3.0),
            EntryLaw::HeavyTailCubic { .. } => None,
        }
    }

    /// Almost-sure bound on `|x|`, if any.
    pub fn support_bound(&self) -> Option<f64> {
        match *self {
            EntryLaw::Rademacher => Some(1.0),
            EntryLaw::UniformBounded { bound } => Some(bound),
            _ => None,
        }
    }

    /// Whether every absolute moment is finite (the uniform moment condition
    /// on entries used by the Schenker–Schulz setting). Recorded, not computed.
    pub fn all_moments_finite(&self) -> bool {
        self.has_finite_variance()
    }

    /// `inf{t : l(t) > 0}`.
    pub fn support_start(&self) -> f64 {
        match *self {
            EntryLaw::Rademacher => 1.0,
            EntryLaw::HeavyTailCubic { cut } => cut,
            _ => 0.0,
        }
    }

    /// Draws one value. Real laws return a zero imaginary part.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match *self {
            EntryLaw::Rademacher => {
                let v = if rng.next_u64() >> 63 == 0 { -1.0 } else { 1.0 };
                Complex64::new(v, 0.0)
            }
            EntryLaw::UniformBounded { bound } => {
                Complex64::new(rng.random_range(-bound..=bound), 0.0)
            }
            EntryLaw::StdGaussianReal => Complex64::new(rng.sample(StandardNormal), 0.0),
            EntryLaw::StdGaussianComplex => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
            }
            EntryLaw::HeavyTailCubic { cut } => {
                // u in [0, 1) keeps the radius finite.
                let u: f64 = rng.random();
                let radius = cut / (1.0 - u).sqrt();
                let v = if rng.next_u64() >> 63 == 0 { -radius } else { radius };
                Complex64::new(v, 0.0)
            }
        }
    }

    /// Maps a draw to a real value with the same second moment. Used on the
    /// diagonal, where Hermitian symmetry forces real entries.
    pub fn realify(&self, z: Complex64) -> Complex64 {
        if self.is_complex() {
            Complex64::new(z.re * SQRT_2, 0.0)
        } else {
            Complex64::new(z.re, 0.0)
        }
    }

    /// Truncated second moment `l(t) = E|x|^2 1{|x| <= t}`.
    pub fn truncated_second_moment(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("truncation level must be >= 0, got {t}")));
        }
        Ok(match *self {
            EntryLaw::Rademacher => {
                if t >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            EntryLaw::UniformBounded { bound } => {
                let s = t.min(bound);
                s * s * s / (3.0 * bound)
            }
            EntryLaw::StdGaussianReal => {
                if t.is_infinite() {
                    1.0
                } else {
                    libm::erf(t * FRAC_1_SQRT_2) - 2.0 * t * std_normal_pdf(t)
                }
            }
            EntryLaw::StdGaussianComplex => {
                // |x|^2 is Exp(1).
                let s = t * t;
                if s.is_infinite() {
                    1.0
                } else {
                    1.0 - (-s).exp() * (1.0 + s)
                }
            }
            EntryLaw::HeavyTailCubic { cut } => {
                if t <= cut {
                    0.0
                } else {
                    2.0 * cut * cut * (t / cut).ln()
                }
            }
        })
    }

    /// `P(|x| > t)`.
    pub fn tail_probability(&self, t: f64) -> f64 {
        match *self {
            EntryLaw::Rademacher => {
                if t < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            EntryLaw::UniformBounded { bound } => (1.0 - t.max(0.0) / bound).max(0.0),
            EntryLaw::StdGaussianReal => libm::erfc(t.max(0.0) * FRAC_1_SQRT_2),
            EntryLaw::StdGaussianComplex => (-t.max(0.0).powi(2)).exp(),
            EntryLaw::HeavyTailCubic { cut } => {
                if t < cut {
                    1.0
                } else {
                    (cut / t).powi(2)
                }
            }
        }
    }

    /// `E|x| 1{|x| > t}`.
    pub fn tail_abs_moment(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match *self {
            EntryLaw::Rademacher => self.tail_probability(t),
            EntryLaw::UniformBounded { bound } => {
                if t >= bound {
                    0.0
                } else {
                    (bound * bound - t * t) / (2.0 * bound)
                }
            }
            EntryLaw::StdGaussianReal => 2.0 * std_normal_pdf(t),
            EntryLaw::StdGaussianComplex => {
                t * (-t * t).exp() + 0.5 * PI.sqrt() * libm::erfc(t)
            }
            EntryLaw::HeavyTailCubic { cut } => 2.0 * cut * cut / t.max(cut),
        }
    }
}

fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

impl fmt::Display for EntryLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryLaw::Rademacher => write!(f, "rademacher"),
            EntryLaw::UniformBounded { bound } => write!(f, "uniform:bound={bound:?}"),
            EntryLaw::StdGaussianReal => write!(f, "gaussian"),
            EntryLaw::StdGaussianComplex => write!(f, "complex_gaussian"),
            EntryLaw::HeavyTailCubic { cut } => write!(f, "heavy_cubic:cut={cut:?}"),
        }
    }
}

impl FromStr for EntryLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, params) = split_kind(s);
        let params = parse_params(params)?;
        let get = |key: &str, default: f64| -> Result<f64> {
            match params.iter().find(|(k, _)| k == key) {
                Some((_, v)) => v
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("`{key}` expects a number, got `{v}`"))),
                None => Ok(default),
            }
        };
        let allow = |keys: &[&str]| -> Result<()> {
            match params.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
                Some((k, _)) => Err(Error::Parse(format!("unknown parameter `{k}` for `{kind}`"))),
                None => Ok(()),
            }
        };
        let law = match kind {
            "rademacher" => {
                allow(&[])?;
                EntryLaw::Rademacher
            }
            "uniform" => {
                allow(&["bound"])?;
                EntryLaw::UniformBounded {
                    bound: get("bound", 1.0)?,
                }
            }
            "gaussian" => {
                allow(&[])?;
                EntryLaw::StdGaussianReal
            }
            "complex_gaussian" => {
                allow(&[])?;
                EntryLaw::StdGaussianComplex
            }
            "heavy_cubic" => {
                allow(&["cut"])?;
                EntryLaw::HeavyTailCubic {
                    cut: get("cut", 1.0)?,
                }
            }
            other => return Err(Error::Parse(format!("unknown entry law `{other}`"))),
        };
        law.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(law)
    }
}

/// Splits `kind:params` at the first colon.
pub(crate) fn split_kind(s: &str) -> (&str, &str) {
    let s = s.trim();
    match s.split_once(':') {
        Some((k, p)) => (k.trim(), p.trim()),
        None => (s, ""),
    }
}

/// Parses `k=v,k=v`. Values may themselves contain `:` and `=`, but not `,`.
pub(crate) fn parse_params(s: &str) -> Result<Vec<(String, String)>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{kv}`")))
        })
        .collect()
}

/// A reproducible random stream identified by a seed and a derivation path.
///
/// The `(seed, path)` pair is hashed into the key of a ChaCha8 generator, so
/// streams with different identities are independent and the same identity
/// always replays the same sequence.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    path: Vec<u64>,
    digest: [u64; 2],
}

impl PartialEq for RngStream {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.path == other.path
    }
}

impl Eq for RngStream {}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn absorb(digest: [u64; 2], child: u64) -> [u64; 2] {
    [
        mix64(digest[0] ^ mix64(child.wrapping_add(GOLDEN))),
        mix64(digest[1].rotate_left(23) ^ mix64(child ^ 0xD6E8_FEB8_6659_FD93)),
    ]
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            path: Vec::new(),
            digest: [mix64(seed ^ GOLDEN), mix64(seed.wrapping_add(0x632B_E59B_D9B4_E019))],
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Child stream with `child_index` appended to the path.
    pub fn derive(&self, child_index: u64) -> RngStream {
        let mut path = self.path.clone();
        path.push(child_index);
        RngStream {
            seed: self.seed,
            path,
            digest: absorb(self.digest, child_index),
        }
    }

    /// The generator for this stream, positioned at its start.
    pub fn generator(&self) -> StreamRng {
        generator_from_digest(self.digest)
    }

    /// Same as `self.derive(child_index).generator()` without allocating.
    pub fn child_generator(&self, child_index: u64) -> StreamRng {
        generator_from_digest(absorb(self.digest, child_index))
    }
}

fn generator_from_digest(d: [u64; 2]) -> StreamRng {
    let words = [
        mix64(d[0]),
        mix64(d[1]),
        mix64(d[0] ^ d[1].rotate_left(32) ^ GOLDEN),
        mix64(d[0].wrapping_add(d[1]).wrapping_mul(GOLDEN)),
    ];
    let mut key = [0u8; 32];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// One draw from `law` using the start of `stream`.
pub fn sample_entry(law: &EntryLaw, stream: &RngStream) -> Complex64 {
    law.sample(&mut stream.generator())
}

/// Returns `stream` extended by `child_index`.
pub fn derive_stream(parent: &RngStream, child_index: u64) -> RngStream {
    parent.derive(child_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn rademacher_support() {
        let mut rng = RngStream::new(3).generator();
        for _ in 0..1000 {
            let v = EntryLaw::Rademacher.sample(&mut rng);
            assert!(v.re == 1.0 || v.re == -1.0);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn heavy_cubic_support() {
        let law = EntryLaw::HeavyTailCubic { cut: 1.0 };
        let mut rng = RngStream::new(4).generator();
        for _ in 0..10_000 {
            assert!(law.sample(&mut rng).re.abs() >= 1.0);
        }
    }

    #[test]
    fn gaussian_mean_near_zero() {
        let mut rng = RngStream::new(5).generator();
        let n = 1_000_000;
        let mean: f64 = (0..n)
            .map(|_| EntryLaw::StdGaussianReal.sample(&mut rng).re)
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn complex_gaussian_unit_second_moment() {
        let mut rng = RngStream::new(6).generator();
        let n = 200_000;
        let m2: f64 = (0..n)
            .map(|_| EntryLaw::StdGaussianComplex.sample(&mut rng).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((m2 - 1.0).abs() < 0.02, "E|x|^2 = {m2}");
    }

    #[test]
    fn derived_streams_differ_and_replay() {
        let s = RngStream::new(11);
        let a: Vec<u64> = (0..8).map({ let mut g = s.derive(0).generator(); move |_| g.next_u64() }).collect();
        let b: Vec<u64> = (0..8).map({ let mut g = s.derive(1).generator(); move |_| g.next_u64() }).collect();
        assert_ne!(a, b);

        let x = s.derive(1).derive(2);
        let y = RngStream::new(11).derive(1).derive(2);
        assert_eq!(x, y);
        assert_eq!(x.path(), &[1, 2]);
        let mut gx = x.generator();
        let mut gy = y.generator();
        for _ in 0..32 {
            assert_eq!(gx.next_u64(), gy.next_u64());
        }
        let mut gc = s.derive(1).child_generator(2);
        let mut gx = x.generator();
        assert_eq!(gc.next_u64(), gx.next_u64());
    }

    #[test]
    fn sibling_streams_uncorrelated() {
        let s = RngStream::new(12);
        let mut g0 = s.derive(0).generator();
        let mut g1 = s.derive(1).generator();
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| g0.random::<f64>()).collect();
        let ys: Vec<f64> = (0..n).map(|_| g1.random::<f64>()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn truncated_second_moment_examples() {
        let r = EntryLaw::Rademacher;
        assert_eq!(r.truncated_second_moment(0.5).unwrap(), 0.0);
        assert_eq!(r.truncated_second_moment(2.0).unwrap(), 1.0);
        let h = EntryLaw::HeavyTailCubic { cut: 1.0 };
        let l = h.truncated_second_moment(std::f64::consts::E).unwrap();
        assert!((l - 2.0).abs() < 1e-14);
        assert!(r.truncated_second_moment(-1.0).is_err());
    }

    #[test]
    fn heavy_cubic_l_matches_quadrature() {
        // 2 * int_1^e x^2 * x^{-3} dx by composite Simpson.
        let f = |x: f64| 2.0 * x * x * x.powi(-3);
        let (a, b) = (1.0, std::f64::consts::E);
        let m = 20_000;
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for k in 1..m {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = s * h / 3.0;
        let l = EntryLaw::HeavyTailCubic { cut: 1.0 }
            .truncated_second_moment(b)
            .unwrap();
        assert!((quad - l).abs() < 1e-12, "{quad} vs {l}");
        assert!((quad - 2.0).abs() < 1e-12);
    }

    #[test]
    fn l_tends_to_variance() {
        for law in [
            EntryLaw::Rademacher,
            EntryLaw::UniformBounded { bound: 2.0 },
            EntryLaw::StdGaussianReal,
            EntryLaw::StdGaussianComplex,
        ] {
            let var = law.second_moment().unwrap();
            let l = law.truncated_second_moment(40.0).unwrap();
            assert!((l - var).abs() < 1e-12, "{law}: {l} vs {var}");
            let mut prev = 0.0;
            for k in 0..400 {
                let v = law.truncated_second_moment(k as f64 * 0.01).unwrap();
                assert!(v >= prev - 1e-15, "{law} not monotone at {k}");
                prev = v;
            }
        }
    }

    #[test]
    fn heavy_cubic_slow_variation() {
        // l(lt)/l(t) - 1 = ln(l)/ln(t): shrinks with t for every l, and
        // drops below 0.05 by t = 1e6 for l in [2/3, 3/2].
        let law = EntryLaw::HeavyTailCubic { cut: 1.0 };
        let l = |t: f64| law.truncated_second_moment(t).unwrap();
        for lambda in [0.5, 2.0 / 3.0, 1.5, 2.0, 10.0] {
            let devs: Vec<f64> = [1e2, 1e4, 1e6]
                .iter()
                .map(|&t| (l(lambda * t) / l(t) - 1.0).abs())
                .collect();
            assert!(devs[0] > devs[1] && devs[1] > devs[2], "{lambda}: {devs:?}");
            if (2.0 / 3.0..=1.5).contains(&lambda) {
                assert!(devs[2] <= 0.05, "{lambda}: {devs:?}");
            }
        }
    }

    #[test]
    fn empirical_l_within_three_standard_errors() {
        let n = 1_000_000;
        for (law, t) in [
            (EntryLaw::HeavyTailCubic { cut: 1.0 }, 10.0),
            (EntryLaw::StdGaussianReal, 1.0),
            (EntryLaw::StdGaussianComplex, 0.8),
            (EntryLaw::UniformBounded { bound: 1.5 }, 1.0),
        ] {
            let mut rng = RngStream::new(99).derive(f64::to_bits(t)).generator();
            let vals: Vec<f64> = (0..n)
                .map(|_| {
                    let x = law.sample(&mut rng);
                    if x.norm() <= t {
                        x.norm_sqr()
                    } else {
                        0.0
                    }
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let exact = law.truncated_second_moment(t).unwrap();
            assert!((mean - exact).abs() <= 3.0 * se, "{law}: {mean} vs {exact} (se {se})");
        }
    }

    #[test]
    fn tail_functionals_heavy_cubic() {
        let law = EntryLaw::HeavyTailCubic { cut: 2.0 };
        assert!((law.tail_probability(4.0) - 0.25).abs() < 1e-15);
        assert!((law.tail_abs_moment(4.0) - 2.0).abs() < 1e-15);
        assert_eq!(law.tail_probability(1.0), 1.0);
    }

    #[test]
    fn config_strings_round_trip() {
        for s in ["rademacher", "uniform:bound=2.5", "gaussian", "complex_gaussian", "heavy_cubic:cut=1.0"] {
            let law: EntryLaw = s.parse().unwrap();
            assert_eq!(law.to_string(), s);
            assert_eq!(law.to_string().parse::<EntryLaw>().unwrap(), law);
        }
        assert!("heavy_cubic:cut=-1".parse::<EntryLaw>().is_err());
        assert!("cauchy".parse::<EntryLaw>().is_err());
        assert!("uniform:width=2".parse::<EntryLaw>().is_err());
    }
}
