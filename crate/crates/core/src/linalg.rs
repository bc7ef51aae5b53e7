//! Minimal dense row-major matrix used by the recognizer and trainer.
//!
//! Everything here operates on `f64` at desk scale (dozens of rows and
//! columns), so plain loops over a flat `Vec` are both fast enough and
//! fully deterministic.

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(CoreError::EmptyInput("matrix rows"));
        }
        let cols = rows[0].len();
        for r in rows {
            if r.len() != cols {
                return Err(CoreError::DimensionMismatch {
                    context: "matrix row",
                    left: cols,
                    right: r.len(),
                });
            }
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CoreError::DimensionMismatch {
                context: "flat matrix data",
                left: rows * cols,
                right: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
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

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// `self * x` for a column vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension");
        let mut out = vec![0.0; self.rows];
        for (i, row) in self.data.chunks_exact(self.cols).enumerate() {
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            out[i] = acc;
        }
        out
    }

    /// `self^T * x`.
    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "transpose_matvec dimension");
        let mut out = vec![0.0; self.cols];
        for (i, row) in self.data.chunks_exact(self.cols).enumerate() {
            let xi = x[i];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// `self += c * u * v^T`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64], c: f64) {
        assert_eq!(u.len(), self.rows, "add_outer rows");
        assert_eq!(v.len(), self.cols, "add_outer cols");
        for (i, ui) in u.iter().enumerate() {
            let cu = c * ui;
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, vj) in row.iter_mut().zip(v) {
                *r += cu * vj;
            }
        }
    }

    /// `self += c * other`.
    pub fn add_assign_scaled(&mut self, other: &Matrix, c: f64) {
        assert_eq!(self.rows, other.rows, "add_assign_scaled rows");
        assert_eq!(self.cols, other.cols, "add_assign_scaled cols");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

pub fn vec_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "vec_sub dimension");
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vec_add_assign(a: &mut [f64], b: &[f64]) {
    assert_eq!(a.len(), b.len(), "vec_add_assign dimension");
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(m.transpose_matvec(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn matmul_small() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[3.0, 4.0, 10.0, 12.0]);
    }

    #[test]
    fn outer_product_accumulation() {
        let mut m = Matrix::zeros(2, 3);
        m.add_outer(&[1.0, 2.0], &[1.0, 0.0, -1.0], 2.0);
        assert_eq!(m.data(), &[2.0, 0.0, -2.0, 4.0, 0.0, -4.0]);
    }

    #[test]
    fn from_flat_rejects_bad_length() {
        assert!(Matrix::from_flat(2, 2, vec![1.0, 2.0, 3.0]).is_err());
    }
}
