//! Dense complex matrices, row-major.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Read access shared by square Hermitian and rectangular matrices.
pub trait EntryGrid {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// Row-major entries.
    fn data(&self) -> &[Complex64];

    fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data()[i * self.cols() + j]
    }

    fn hs_norm_sqr(&self) -> f64 {
        self.data().iter().map(|z| z.norm_sqr()).sum()
    }

    fn hs_norm(&self) -> f64 {
        self.hs_norm_sqr().sqrt()
    }

    fn max_abs(&self) -> f64 {
        self.data().iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// Hermitian `n x n` matrix. Conjugate symmetry is exact: entry `(j, i)` is
/// the bitwise conjugate of entry `(i, j)`, and the diagonal is real.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Validates exact conjugate symmetry.
    pub fn new(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                data.len()
            )));
        }
        for i in 0..n {
            for j in i..n {
                if data[j * n + i] != data[i * n + j].conj() {
                    return Err(Error::InvalidArgument(format!(
                        "entries ({i}, {j}) and ({j}, {i}) are not conjugate"
                    )));
                }
            }
        }
        Ok(HermitianMatrix { n, data })
    }

    /// Builds from the upper triangle (`i <= j`), mirroring with conjugation.
    /// Diagonal values have their imaginary part dropped.
    pub fn from_upper(n: usize, mut upper: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let d = upper(i, i);
            data[i * n + i] = Complex64::new(d.re, 0.0);
            for j in i + 1..n {
                let z = upper(i, j);
                data[i * n + j] = z;
                data[j * n + i] = z.conj();
            }
        }
        HermitianMatrix { n, data }
    }

    pub fn from_real_symmetric(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        Self::from_upper(n, |i, j| Complex64::new(f(i, j), 0.0))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_real_symmetric(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_real_symmetric(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i].re).sum()
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Entrywise map preserving Hermitian structure when `f` commutes with
    /// conjugation (e.g. scaling by a real, zeroing by modulus).
    pub(crate) fn map_entries(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        HermitianMatrix::from_upper(self.n, |i, j| f(self.data[i * self.n + j]))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_entries(|z| z * s)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &HermitianMatrix, b: f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let n = self.n;
        Ok(HermitianMatrix::from_upper(n, |i, j| {
            self.data[i * n + j] * a + other.data[i * n + j] * b
        }))
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    pub fn add_identity(&self, c: f64) -> Self {
        let n = self.n;
        HermitianMatrix::from_upper(n, |i, j| {
            let z = self.data[i * n + j];
            if i == j {
                z + c
            } else {
                z
            }
        })
    }

    pub(crate) fn check_same_shape(&self, other: &HermitianMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::ShapeMismatch(format!(
                "matrices have sizes {} and {}",
                self.n, other.n
            )));
        }
        Ok(())
    }

    /// Euclidean norm of each row.
    pub fn row_norms(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.n.max(1))
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }
}

impl EntryGrid for HermitianMatrix {
    fn rows(&self) -> usize {
        self.n
    }
    fn cols(&self) -> usize {
        self.n
    }
    fn data(&self) -> &[Complex64] {
        &self.data
    }
}

/// General `rows x cols` complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RectMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl RectMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(RectMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        RectMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RectMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub(crate) fn map_entries(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        RectMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    /// `X X*`, Hermitian `rows x rows`.
    pub fn gram(&self) -> HermitianMatrix {
        let (r, c) = (self.rows, self.cols);
        HermitianMatrix::from_upper(r, |i, j| {
            let a = &self.data[i * c..(i + 1) * c];
            let b = &self.data[j * c..(j + 1) * c];
            a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
        })
    }
}

impl EntryGrid for RectMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn data(&self) -> &[Complex64] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_upper_is_exactly_hermitian() {
        let h = HermitianMatrix::from_upper(4, |i, j| Complex64::new((i + j) as f64, (j as f64) - i as f64 + 0.5));
        for i in 0..4 {
            assert_eq!(h.get(i, i).im, 0.0);
            for j in 0..4 {
                assert_eq!(h.get(j, i), h.get(i, j).conj());
            }
        }
        assert!(HermitianMatrix::new(4, h.data().to_vec()).is_ok());
    }

    #[test]
    fn rejects_non_hermitian() {
        let d = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        assert!(HermitianMatrix::new(2, d).is_err());
        assert!(HermitianMatrix::new(3, vec![]).is_err());
    }

    #[test]
    fn gram_of_identity_block() {
        let x = RectMatrix::from_fn(2, 3, |i, j| Complex64::new(if i == j { 2.0 } else { 0.0 }, 0.0));
        let g = x.gram();
        assert_eq!(g, HermitianMatrix::diagonal(&[4.0, 4.0]));
    }
}
