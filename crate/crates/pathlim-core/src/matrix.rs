//! Dense row-major matrices over f64 with the few operations the analysis
//! needs: products, LU solves, norms and a spectral-radius estimate for
//! signed remainders.
//!
//! Everything here targets desk-scale inputs (at most a few hundred
//! vertices); no sparsity, no blocking.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Dense matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Error raised by matrix operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixError {
    /// Operand shapes do not line up.
    DimensionMismatch,
    /// LU factorization hit a zero pivot: the system is singular.
    Singular,
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::DimensionMismatch => write!(f, "matrix dimension mismatch"),
            MatrixError::Singular => write!(f, "singular linear system"),
        }
    }
}

impl core::error::Error for MatrixError {}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from row-major data; `data.len()` must equal `rows * cols`.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::DimensionMismatch);
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Submatrix on the given row and column index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                m.set(i, j, self.get(r, c));
            }
        }
        m
    }

    /// Writes `block` into the positions `rows x cols`; index lists give the placement.
    pub fn set_block(&mut self, rows: &[usize], cols: &[usize], block: &Matrix) {
        debug_assert_eq!(block.rows(), rows.len());
        debug_assert_eq!(block.cols(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                self.set(r, c, block.get(i, j));
            }
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn scale(&self, k: f64) -> Matrix {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= k;
        }
        m
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatrixError::DimensionMismatch);
        }
        let mut m = self.clone();
        for (v, w) in m.data.iter_mut().zip(other.data.iter()) {
            *v += *w;
        }
        Ok(m)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatrixError::DimensionMismatch);
        }
        let mut m = self.clone();
        for (v, w) in m.data.iter_mut().zip(other.data.iter()) {
            *v -= *w;
        }
        Ok(m)
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        if self.cols != other.rows {
            return Err(MatrixError::DimensionMismatch);
        }
        let mut m = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    let v = m.get(r, c) + a * other.get(k, c);
                    m.set(r, c, v);
                }
            }
        }
        Ok(m)
    }

    /// Matrix times column vector.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if self.cols != v.len() {
            return Err(MatrixError::DimensionMismatch);
        }
        let mut out = vec![0.0; self.rows];
        for (r, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (c, &x) in v.iter().enumerate() {
                acc += self.get(r, c) * x;
            }
            *slot = acc;
        }
        Ok(out)
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, v: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if self.rows != v.len() {
            return Err(MatrixError::DimensionMismatch);
        }
        let mut out = vec![0.0; self.cols];
        for (r, &a) in v.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (c, slot) in out.iter_mut().enumerate() {
                *slot += a * self.get(r, c);
            }
        }
        Ok(out)
    }

    /// Outer product of a column vector and a row vector.
    pub fn outer(col: &[f64], row: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(col.len(), row.len());
        for (r, &a) in col.iter().enumerate() {
            for (c, &b) in row.iter().enumerate() {
                m.set(r, c, a * b);
            }
        }
        m
    }

    /// k-th matrix power by repeated multiplication; `k = 0` gives the identity.
    pub fn pow(&self, k: usize) -> Result<Matrix, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::DimensionMismatch);
        }
        let mut acc = Matrix::identity(self.rows);
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0;
        for &v in &self.data {
            let a = libm::fabs(v);
            if a > m {
                m = a;
            }
        }
        m
    }

    /// Operator infinity norm: largest absolute row sum.
    pub fn op_inf_norm(&self) -> f64 {
        let mut m = 0.0;
        for r in 0..self.rows {
            let mut s = 0.0;
            for c in 0..self.cols {
                s += libm::fabs(self.get(r, c));
            }
            if s > m {
                m = s;
            }
        }
        m
    }

    /// Solves `self * X = B` by LU factorization with partial pivoting.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix, MatrixError> {
        if !self.is_square() || self.rows != b.rows {
            return Err(MatrixError::DimensionMismatch);
        }
        let n = self.rows;
        let mut lu = self.clone();
        let mut x = b.clone();
        for col in 0..n {
            // partial pivot
            let mut pivot = col;
            let mut best = libm::fabs(lu.get(col, col));
            for r in col + 1..n {
                let cand = libm::fabs(lu.get(r, col));
                if cand > best {
                    best = cand;
                    pivot = r;
                }
            }
            if best == 0.0 {
                return Err(MatrixError::Singular);
            }
            if pivot != col {
                for c in 0..n {
                    let t = lu.get(col, c);
                    lu.set(col, c, lu.get(pivot, c));
                    lu.set(pivot, c, t);
                }
                for c in 0..x.cols {
                    let t = x.get(col, c);
                    x.set(col, c, x.get(pivot, c));
                    x.set(pivot, c, t);
                }
            }
            let d = lu.get(col, col);
            for r in col + 1..n {
                let f = lu.get(r, col) / d;
                if f == 0.0 {
                    continue;
                }
                lu.set(r, col, 0.0);
                for c in col + 1..n {
                    let v = lu.get(r, c) - f * lu.get(col, c);
                    lu.set(r, c, v);
                }
                for c in 0..x.cols {
                    let v = x.get(r, c) - f * x.get(col, c);
                    x.set(r, c, v);
                }
            }
        }
        // back substitution
        for col in (0..n).rev() {
            let d = lu.get(col, col);
            for c in 0..x.cols {
                let mut v = x.get(col, c);
                for k in col + 1..n {
                    v -= lu.get(col, k) * x.get(k, c);
                }
                x.set(col, c, v / d);
            }
        }
        Ok(x)
    }

    /// Matrix inverse via [`Matrix::solve`] against the identity.
    pub fn inverse(&self) -> Result<Matrix, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::DimensionMismatch);
        }
        self.solve(&Matrix::identity(self.rows))
    }

    /// Spectral-radius estimate by repeated squaring with renormalization:
    /// the submultiplicative infinity norm of `M^(2^k)` raised to `1/2^k`
    /// converges to the radius from above. Robust for signed matrices whose
    /// dominant eigenvalues are complex, where vector iteration stalls.
    pub fn spectral_radius_estimate(&self, squarings: usize) -> Result<f64, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::DimensionMismatch);
        }
        if self.rows == 0 {
            return Ok(0.0);
        }
        let mut a = self.clone();
        let mut weight = 1.0_f64; // 1 / 2^k
        let n0 = a.op_inf_norm();
        if n0 == 0.0 {
            return Ok(0.0);
        }
        a = a.scale(1.0 / n0);
        // invariant: M^(2^k) = exp(log_scale) * a, with a renormalized
        let mut log_scale = libm::log(n0);
        for _ in 0..squarings {
            a = a.mul(&a)?;
            log_scale *= 2.0;
            weight *= 0.5;
            let n = a.op_inf_norm();
            if n == 0.0 {
                return Ok(0.0);
            }
            a = a.scale(1.0 / n);
            log_scale += libm::log(n);
        }
        Ok(libm::exp(log_scale * weight))
    }
}
