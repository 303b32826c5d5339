//! Built-in problem families: sparse ridge regression, hinge-loss SVM and the
//! static stochastic knapsack.

pub mod sparse_reg;
pub mod sskp;
pub mod svm;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sampling::SubsetSample;

pub use sparse_reg::{SparseRegressionData, SparseRegressionOracle};
pub use sskp::{SskpData, SskpOracle};
pub use svm::{SvmData, SvmOracle};

/// Dense row-major matrix; one row per data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(format!("matrix data has {} entries, expected {rows}x{cols}", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid("ragged rows"));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copy of the selected rows.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }
}

pub(crate) fn check_sample(sample: &SubsetSample, population: usize) -> Result<()> {
    if sample.is_empty() {
        return Err(invalid("empty sample"));
    }
    if sample.population() != population {
        return Err(invalid(format!(
            "sample drawn from population {} but data has {population} points",
            sample.population()
        )));
    }
    Ok(())
}

pub(crate) fn check_point(point: &[f64], dim: usize) -> Result<()> {
    if point.len() != dim {
        return Err(invalid(format!("point has dimension {}, expected {dim}", point.len())));
    }
    Ok(())
}
