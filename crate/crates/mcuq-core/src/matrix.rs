//! Dense real matrices in row-major order, with the norms used throughout:
//! `‖A‖_{2,∞}² = max_i Σ_j A_{ij}²`, Frobenius, spectral (power iteration),
//! and max-entry.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Dense `rows × cols` matrix of finite `f64` values, row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, rejecting non-finite entries and
    /// length mismatches.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: (rows, cols),
                got: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Row-major construction that skips the finiteness scan. Callers must
    /// guarantee finite data.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        // i-k-j order keeps the inner loop contiguous over both operands.
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * otherᵀ`.
    pub fn matmul_transb(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "matmul_transb shape mismatch");
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                let b_row = other.row(j);
                let mut acc = 0.0;
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out.data[i * other.rows + j] = acc;
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        let data = self.data.iter().map(|v| v * c).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }
}

/// `‖A‖_{2,∞}` — the largest Euclidean row norm.
pub fn norm_2inf(a: &DenseMatrix) -> f64 {
    let mut max_sq: f64 = 0.0;
    for i in 0..a.rows() {
        let s: f64 = a.row(i).iter().map(|v| v * v).sum();
        max_sq = max_sq.max(s);
    }
    libm::sqrt(max_sq)
}

/// Frobenius norm.
pub fn norm_fro(a: &DenseMatrix) -> f64 {
    libm::sqrt(a.data().iter().map(|v| v * v).sum())
}

/// Largest absolute entry.
pub fn norm_max(a: &DenseMatrix) -> f64 {
    a.data().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Spectral norm by power iteration on `AᵀA`, to relative tolerance 1e-8.
///
/// The start vector is drawn from a fixed-seed stream so repeated calls are
/// bitwise identical.
pub fn norm_spectral(a: &DenseMatrix) -> f64 {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return 0.0;
    }
    let scale = norm_max(a);
    if scale == 0.0 {
        return 0.0;
    }
    let mut rng = RngStream::new(0x5bec_78a1, 0);
    let mut v: Vec<f64> = (0..n).map(|_| rng.next_f64() - 0.5).collect();
    normalize(&mut v);
    let mut sigma = 0.0f64;
    let mut av = vec![0.0; m];
    for _ in 0..20_000 {
        // av = A v
        for i in 0..m {
            let row = a.row(i);
            let mut acc = 0.0;
            for (x, y) in row.iter().zip(&v) {
                acc += x * y;
            }
            av[i] = acc;
        }
        // v = Aᵀ av
        for x in v.iter_mut() {
            *x = 0.0;
        }
        for i in 0..m {
            let c = av[i];
            if c == 0.0 {
                continue;
            }
            let row = a.row(i);
            for (x, y) in v.iter_mut().zip(row) {
                *x += c * y;
            }
        }
        let lambda = libm::sqrt(v.iter().map(|x| x * x).sum());
        let new_sigma = libm::sqrt(lambda);
        if lambda == 0.0 {
            // v landed in the null space; restart from a fresh direction.
            for x in v.iter_mut() {
                *x = rng.next_f64() - 0.5;
            }
            normalize(&mut v);
            continue;
        }
        for x in v.iter_mut() {
            *x /= lambda;
        }
        if (new_sigma - sigma).abs() <= 1e-9 * new_sigma.max(1e-300) {
            return new_sigma;
        }
        sigma = new_sigma;
    }
    sigma
}

fn normalize(v: &mut [f64]) {
    let n = libm::sqrt(v.iter().map(|x| x * x).sum());
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}
