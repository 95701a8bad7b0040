//! Small dense linear algebra and discrete Fourier transforms on periodic
//! hypercubic lattices.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has wrong length");
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`, without forming the transpose.
    pub fn matmul_transpose(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_transpose shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for r in 0..self.rows {
            for c in 0..other.rows {
                out[(r, c)] = dot(self.row(r), other.row(c));
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Sup-norm distance of `self` from the identity.
    pub fn identity_residual(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut m: f64 = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let target = if r == c { 1.0 } else { 0.0 };
                m = m.max((self[(r, c)] - target).abs());
            }
        }
        m
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for r1 in 0..self.rows {
            for c1 in 0..self.cols {
                let a = self[(r1, c1)];
                if a == 0.0 {
                    continue;
                }
                for r2 in 0..other.rows {
                    for c2 in 0..other.cols {
                        out[(r1 * other.rows + r2, c1 * other.cols + c2)] = a * other[(r2, c2)];
                    }
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unnormalized DFT along one contiguous or strided line.
///
/// Forward uses `exp(-2πi jk/n)`, inverse `exp(+2πi jk/n)`; neither divides by `n`.
fn dft_line(line: &mut [Complex64], inverse: bool, scratch: &mut Vec<Complex64>) {
    let n = line.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        fft_radix2(line, inverse);
        return;
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    scratch.clear();
    scratch.extend_from_slice(line);
    for (k, out) in line.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, x) in scratch.iter().enumerate() {
            let phase = sign * 2.0 * PI * ((j * k) % n) as f64 / n as f64;
            acc += x * Complex64::from_polar(1.0, phase);
        }
        *out = acc;
    }
}

fn fft_radix2(a: &mut [Complex64], inverse: bool) {
    let n = a.len();
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            a.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                // Twiddles computed directly keep the error independent of n.
                let w = Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / len as f64);
                let u = a[start + k];
                let v = a[start + k + half] * w;
                a[start + k] = u + v;
                a[start + k + half] = u - v;
            }
        }
        len <<= 1;
    }
}

/// In-place unnormalized d-dimensional DFT of a row-major array with `n`
/// points along each of the `d` axes.
pub fn dft_nd(data: &mut [Complex64], n: usize, d: usize, inverse: bool) {
    assert_eq!(data.len(), n.pow(d as u32), "dft_nd: wrong data length");
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = Vec::with_capacity(n);
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let outer = data.len() / (n * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * n * stride + s;
                for (i, x) in line.iter_mut().enumerate() {
                    *x = data[base + i * stride];
                }
                dft_line(&mut line, inverse, &mut scratch);
                for (i, x) in line.iter().enumerate() {
                    data[base + i * stride] = *x;
                }
            }
        }
    }
}

/// Forward transform of a real array: `x̂(k) = Σ_j x_j e^{-2πi k·j/n}`.
pub fn forward_real(data: &[f64], n: usize, d: usize) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    dft_nd(&mut c, n, d, false);
    c
}

/// Inverse transform divided by the number of points, real part only.
/// Callers use it for symbols of real, translation-invariant kernels.
pub fn inverse_to_real(symbol: &[Complex64], n: usize, d: usize) -> Vec<f64> {
    let mut c = symbol.to_vec();
    dft_nd(&mut c, n, d, true);
    let v = c.len() as f64;
    c.iter().map(|z| z.re / v).collect()
}

/// Inverse transform divided by the number of points.
pub fn inverse_complex(symbol: &[Complex64], n: usize, d: usize) -> Vec<Complex64> {
    let mut c = symbol.to_vec();
    dft_nd(&mut c, n, d, true);
    let v = c.len() as f64;
    c.iter().map(|z| z / v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(data: &[Complex64], inverse: bool) -> Vec<Complex64> {
        let n = data.len();
        let s = if inverse { 1.0 } else { -1.0 };
        (0..n)
            .map(|k| {
                data.iter()
                    .enumerate()
                    .map(|(j, x)| x * Complex64::from_polar(1.0, s * 2.0 * PI * (j * k) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn fft_matches_naive_dft() {
        for &n in &[1usize, 2, 4, 6, 8, 12, 32] {
            let data: Vec<Complex64> =
                (0..n).map(|j| Complex64::new((j as f64 * 0.7).sin(), (j as f64).cos() * 0.3)).collect();
            for inverse in [false, true] {
                let mut fast = data.clone();
                dft_nd(&mut fast, n, 1, inverse);
                let slow = naive(&data, inverse);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).norm() < 1e-12, "n={n}");
                }
            }
        }
    }

    #[test]
    fn two_dimensional_roundtrip() {
        let n = 4;
        let data: Vec<f64> = (0..16).map(|i| (i as f64 * 1.3).sin()).collect();
        let hat = forward_real(&data, n, 2);
        let back = inverse_to_real(&hat, n, 2);
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn kron_and_matmul() {
        let a = Matrix::from_rows(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let i = Matrix::identity(2);
        assert_eq!(a.matmul(&i), a);
        assert_eq!(a.matmul_transpose(&i), a);
        let k = i.kron(&a);
        assert_eq!(k[(2, 3)], 2.0);
        assert_eq!(k[(0, 2)], 0.0);
    }
}
