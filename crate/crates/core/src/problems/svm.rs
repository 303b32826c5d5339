//! Mean hinge risk `R(θ; S) = (1/n) Σ max(1 − yᵢθᵀxᵢ, 0)` for a linear SVM
//! without intercept. The quadratic regularizer lives in the QP master.

use serde::{Deserialize, Serialize};

use super::{check_point, check_sample, RowMatrix};
use crate::error::{invalid, Result};
use crate::layout::VariableLayout;
use crate::oracle::{dot, SampledOracle};
use crate::sampling::SubsetSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmData {
    pub x: RowMatrix,
    /// Labels in `{−1, +1}`.
    pub y: Vec<f64>,
    pub c: f64,
}

impl SvmData {
    pub fn new(x: RowMatrix, y: Vec<f64>, c: f64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(invalid("feature rows and labels differ in length"));
        }
        if y.iter().any(|&l| l != 1.0 && l != -1.0) {
            return Err(invalid("labels must be -1 or +1"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("C must be positive and finite"));
        }
        if !x.is_finite() {
            return Err(invalid("non-finite features"));
        }
        Ok(Self { x, y, c })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    /// Fraction of points with `sign(θᵀx) = y`, counting `θᵀx = 0` as `+1`.
    pub fn accuracy(&self, theta: &[f64]) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        let hits = (0..self.n())
            .filter(|&i| {
                let pred = if dot(self.x.row(i), theta) >= 0.0 { 1.0 } else { -1.0 };
                pred == self.y[i]
            })
            .count();
        hits as f64 / self.n() as f64
    }
}

pub fn svm_risk_value(data: &SvmData, theta: &[f64], sample: &SubsetSample) -> Result<f64> {
    check_point(theta, data.p())?;
    check_sample(sample, data.n())?;
    let total: f64 = sample.indices().iter().map(|&i| (1.0 - data.y[i] * dot(data.x.row(i), theta)).max(0.0)).sum();
    Ok(total / sample.len() as f64)
}

/// `−(1/n) Σ cᵢyᵢxᵢ` with `cᵢ = 1` iff `yᵢθᵀxᵢ < 1`.
pub fn svm_risk_subgradient(data: &SvmData, theta: &[f64], sample: &SubsetSample) -> Result<Vec<f64>> {
    Ok(svm_risk_evaluate(data, theta, sample)?.1)
}

pub fn svm_risk_evaluate(data: &SvmData, theta: &[f64], sample: &SubsetSample) -> Result<(f64, Vec<f64>)> {
    check_point(theta, data.p())?;
    check_sample(sample, data.n())?;
    let mut g = vec![0.0; data.p()];
    let mut total = 0.0;
    for &i in sample.indices() {
        let row = data.x.row(i);
        let margin = data.y[i] * dot(row, theta);
        if margin < 1.0 {
            total += 1.0 - margin;
            let yi = data.y[i];
            g.iter_mut().zip(row).for_each(|(g, x)| *g -= yi * x);
        }
    }
    let n = sample.len() as f64;
    g.iter_mut().for_each(|v| *v /= n);
    Ok((total / n, g))
}

#[derive(Debug, Clone)]
pub struct SvmOracle {
    data: SvmData,
    radius: f64,
}

impl SvmOracle {
    pub fn new(data: SvmData) -> Self {
        // ‖θ*‖ ≤ C·max‖xᵢ‖ since θ* is a combination of risk subgradients with weights summing to C.
        let max_norm = (0..data.n()).map(|i| dot(data.x.row(i), data.x.row(i)).sqrt()).fold(0.0, f64::max);
        let radius = data.c * max_norm + 1.0;
        Self { data, radius }
    }

    pub fn data(&self) -> &SvmData {
        &self.data
    }
}

impl SampledOracle for SvmOracle {
    fn population(&self) -> usize {
        self.data.n()
    }

    /// Continuous-only; the box never binds at the QP master's optimum.
    fn layout(&self) -> VariableLayout {
        VariableLayout::continuous(self.data.p(), -self.radius, self.radius).expect("radius is finite and positive")
    }

    fn value(&self, point: &[f64], sample: &SubsetSample) -> Result<f64> {
        svm_risk_value(&self.data, point, sample)
    }

    fn gradient(&self, point: &[f64], sample: &SubsetSample) -> Result<Vec<f64>> {
        svm_risk_subgradient(&self.data, point, sample)
    }

    fn evaluate(&self, point: &[f64], sample: &SubsetSample) -> Result<(f64, Vec<f64>)> {
        svm_risk_evaluate(&self.data, point, sample)
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }

    fn warm_start(&self, _sample: &SubsetSample) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.data.p()])
    }
}
