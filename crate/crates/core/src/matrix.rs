//! Column-major storage for per-grid-point vectors (one column per time).

use serde::{Deserialize, Serialize};

use crate::error::{Result, SptError};

/// `rows × cols` matrix where each column is the state at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SeriesMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn with_capacity(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols: 0,
            data: Vec::with_capacity(rows * cols),
        }
    }

    /// Builds from column vectors; every column must have `rows` entries.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut m = Self::with_capacity(rows, columns.len());
        for c in columns {
            m.push_column(c)?;
        }
        Ok(m)
    }

    /// Builds from row vectors (one per coordinate, each of equal length).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(n, cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(SptError::dims("row length", cols, r.len()));
            }
            for (t, v) in r.iter().enumerate() {
                m.data[t * n + i] = *v;
            }
        }
        Ok(m)
    }

    pub fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SptError::dims("raw series data", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push_column(&mut self, col: &[f64]) -> Result<()> {
        if col.len() != self.rows {
            return Err(SptError::dims("column length", self.rows, col.len()));
        }
        self.data.extend_from_slice(col);
        self.cols += 1;
        Ok(())
    }

    #[inline]
    pub fn column(&self, t: usize) -> &[f64] {
        &self.data[t * self.rows..(t + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.rows..(t + 1) * self.rows]
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.data[t * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, t: usize, v: f64) {
        self.data[t * self.rows + i] = v;
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|t| self.get(i, t)).collect()
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, so guard the degenerate shape
        self.data.chunks_exact(self.rows.max(1)).take(if self.rows == 0 { 0 } else { self.cols })
    }

    /// Copy of columns `start..end`.
    pub fn slice_columns(&self, start: usize, end: usize) -> Self {
        Self {
            rows: self.rows,
            cols: end - start,
            data: self.data[start * self.rows..end * self.rows].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_columns_agree() {
        let m = SeriesMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.cols(), 3);
        assert_eq!(m.column(1), &[2.0, 5.0]);
        assert_eq!(m.row(1), vec![4.0, 5.0, 6.0]);
        assert_eq!(m.columns().count(), 3);
        assert_eq!(m.slice_columns(1, 3).column(0), &[2.0, 5.0]);
    }

    #[test]
    fn ragged_input_rejected() {
        assert!(SeriesMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let mut m = SeriesMatrix::zeros(2, 0);
        assert!(m.push_column(&[1.0]).is_err());
    }
}
