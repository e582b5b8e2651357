//! Minimal dense row-major f64 matrix.
//!
//! The datasets in scope are a few hundred rows by a dozen columns; a thin
//! `Vec<f64>` wrapper keeps the API surface small and the dependency tree
//! lean.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    /// Build from row-major data; panics when the length does not match.
    pub fn from_rows(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols, "matrix shape mismatch");
        Matrix {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.n_cols + col] = v;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }

    pub fn set_column(&mut self, col: usize, values: &[f64]) {
        assert_eq!(values.len(), self.n_rows);
        for (r, &v) in values.iter().enumerate() {
            self.set(r, col, v);
        }
    }

    /// New matrix keeping `rows` (in the given order) and `cols`.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            for (ci, &c) in cols.iter().enumerate() {
                out.set(ri, ci, self.get(r, c));
            }
        }
        out
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_keeps_order() {
        let m = Matrix::from_rows(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let s = m.select(&[2, 0], &[1]);
        assert_eq!(s.row(0), &[6.0]);
        assert_eq!(s.row(1), &[2.0]);
    }

    #[test]
    fn column_roundtrip() {
        let mut m = Matrix::zeros(2, 2);
        m.set_column(1, &[7.0, 8.0]);
        assert_eq!(m.column(1), vec![7.0, 8.0]);
        assert_eq!(m.column(0), vec![0.0, 0.0]);
    }
}
