//! Cardinality-constrained ridge regression in its kernel form
//!
//! ```text
//! f(z; S) = (1/n) y_Sᵀ (I_n + γ_S Σ_j z_j X_{S,j} X_{S,j}ᵀ)⁻¹ y_S,   γ_S = γN/n
//! ```
//!
//! evaluated through the matrix inversion lemma so that only a `k × k`
//! positive-definite system is ever factored.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_point, check_sample, RowMatrix};
use crate::error::{invalid, Result, ScpError};
use crate::layout::VariableLayout;
use crate::oracle::SampledOracle;
use crate::sampling::SubsetSample;

const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRegressionData {
    pub x: RowMatrix,
    pub y: Vec<f64>,
    pub k: usize,
    pub gamma: f64,
}

impl SparseRegressionData {
    pub fn new(x: RowMatrix, y: Vec<f64>, k: usize, gamma: f64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(invalid("design matrix and response lengths differ"));
        }
        if x.rows() == 0 || x.cols() == 0 {
            return Err(invalid("empty design matrix"));
        }
        if k == 0 || k > x.cols() {
            return Err(invalid(format!("cardinality k={k} outside [1, {}]", x.cols())));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma must be positive and finite"));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite regression data"));
        }
        Ok(Self { x, y, k, gamma })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.x.clone(), self.y.clone(), self.k, gamma)
    }
}

/// Ridge weight applied on `sample`: `γ·N/n`.
///
/// The full objective is `(1/N)(‖y − Xβ‖² + ‖β‖²/γ)`, so its per-row share of the
/// penalty is `‖β‖²/(Nγ)`. Averaging `n` rows keeps that share when the weight is
/// `γN/n`; reusing `γ` would under-regularize every subsample by a factor `N/n`.
pub fn sample_gamma(data: &SparseRegressionData, sample: &SubsetSample) -> f64 {
    data.gamma * data.n() as f64 / sample.len() as f64
}

/// Intermediate quantities shared by the value and the gradient.
struct Kernel {
    value: f64,
    /// `(I + γ V Vᵀ)⁻¹ y_S` restricted to the sample, in sample order.
    alpha: Vec<f64>,
}

fn kernel(data: &SparseRegressionData, z: &[f64], sample: &SubsetSample) -> Result<Kernel> {
    let support: Vec<(usize, f64)> =
        z.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(j, &v)| (j, v.sqrt())).collect();
    let s = support.len();
    let n = sample.len() as f64;
    let gamma = sample_gamma(data, sample);

    let mut vtv = DMatrix::<f64>::zeros(s, s);
    let mut vty = DVector::<f64>::zeros(s);
    let mut yty = 0.0;
    let mut v = vec![0.0; s];
    for &i in sample.indices() {
        let row = data.x.row(i);
        let yi = data.y[i];
        yty += yi * yi;
        for (vk, &(j, w)) in v.iter_mut().zip(&support) {
            *vk = row[j] * w;
        }
        for a in 0..s {
            vty[a] += v[a] * yi;
            for b in a..s {
                vtv[(a, b)] += v[a] * v[b];
            }
        }
    }
    for a in 0..s {
        vtv[(a, a)] += 1.0 / gamma;
        for b in 0..a {
            vtv[(a, b)] = vtv[(b, a)];
        }
    }

    let coef = if s == 0 {
        DVector::zeros(0)
    } else {
        let chol = match vtv.clone().cholesky() {
            Some(c) => c,
            None => {
                let mut jittered = vtv;
                for a in 0..s {
                    jittered[(a, a)] += JITTER;
                }
                jittered
                    .cholesky()
                    .ok_or_else(|| ScpError::NumericFailure("kernel system is not positive definite".into()))?
            }
        };
        chol.solve(&vty)
    };

    let value = (yty - vty.dot(&coef)) / n;
    let alpha = sample
        .indices()
        .iter()
        .map(|&i| {
            let row = data.x.row(i);
            let fitted: f64 = support.iter().zip(coef.iter()).map(|(&(j, w), c)| row[j] * w * c).sum();
            data.y[i] - fitted
        })
        .collect();
    Ok(Kernel { value, alpha })
}

/// `f(z; S)`; `z` may be relaxed to `[0, 1]^p`.
pub fn sparse_reg_value(data: &SparseRegressionData, z: &[f64], sample: &SubsetSample) -> Result<f64> {
    check_point(z, data.p())?;
    check_sample(sample, data.n())?;
    Ok(kernel(data, z, sample)?.value)
}

/// `∂f/∂zᵢ = −(γ_S/n)(X_{S,i}ᵀα)²` with `α = (I + γ_S Σ z_j X_{S,j}X_{S,j}ᵀ)⁻¹ y_S`
/// and `γ_S` from [`sample_gamma`].
pub fn sparse_reg_gradient(data: &SparseRegressionData, z: &[f64], sample: &SubsetSample) -> Result<Vec<f64>> {
    Ok(sparse_reg_evaluate(data, z, sample)?.1)
}

pub fn sparse_reg_evaluate(data: &SparseRegressionData, z: &[f64], sample: &SubsetSample) -> Result<(f64, Vec<f64>)> {
    check_point(z, data.p())?;
    check_sample(sample, data.n())?;
    let kern = kernel(data, z, sample)?;
    let mut xa = vec![0.0; data.p()];
    for (&i, &a) in sample.indices().iter().zip(&kern.alpha) {
        for (g, x) in xa.iter_mut().zip(data.x.row(i)) {
            *g += x * a;
        }
    }
    let scale = sample_gamma(data, sample) / sample.len() as f64;
    let grad = xa.into_iter().map(|v| -scale * v * v).collect();
    Ok((kern.value, grad))
}

/// Ridge coefficients on a fixed support: `β_z = (I/γ + X_zᵀX_z)⁻¹ X_zᵀy`, zero elsewhere.
pub fn fit_coefficients(data: &SparseRegressionData, support: &[usize]) -> Result<Vec<f64>> {
    let s = support.len();
    let mut gram = DMatrix::<f64>::zeros(s, s);
    let mut xty = DVector::<f64>::zeros(s);
    for i in 0..data.n() {
        let row = data.x.row(i);
        for a in 0..s {
            let va = row[support[a]];
            xty[a] += va * data.y[i];
            for b in a..s {
                gram[(a, b)] += va * row[support[b]];
            }
        }
    }
    for a in 0..s {
        gram[(a, a)] += 1.0 / data.gamma;
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let coef = gram
        .cholesky()
        .ok_or_else(|| ScpError::NumericFailure("ridge system is not positive definite".into()))?
        .solve(&xty);
    let mut beta = vec![0.0; data.p()];
    for (&j, c) in support.iter().zip(coef.iter()) {
        beta[j] = *c;
    }
    Ok(beta)
}

pub fn predict(x: &RowMatrix, beta: &[f64]) -> Vec<f64> {
    (0..x.rows()).map(|i| x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum()).collect()
}

/// Indices `j` with `z_j = 1`, ascending.
pub fn support_of(z: &[f64]) -> Vec<usize> {
    z.iter().enumerate().filter(|(_, &v)| v > 0.5).map(|(j, _)| j).collect()
}

#[derive(Debug, Clone)]
pub struct SparseRegressionOracle {
    data: SparseRegressionData,
}

impl SparseRegressionOracle {
    pub fn new(data: SparseRegressionData) -> Self {
        Self { data }
    }

    pub fn data(&self) -> &SparseRegressionData {
        &self.data
    }
}

impl SampledOracle for SparseRegressionOracle {
    fn population(&self) -> usize {
        self.data.n()
    }

    fn layout(&self) -> VariableLayout {
        VariableLayout::binary(self.data.p()).with_cardinality(self.data.k)
    }

    fn value(&self, point: &[f64], sample: &SubsetSample) -> Result<f64> {
        sparse_reg_value(&self.data, point, sample)
    }

    fn gradient(&self, point: &[f64], sample: &SubsetSample) -> Result<Vec<f64>> {
        sparse_reg_gradient(&self.data, point, sample)
    }

    fn evaluate(&self, point: &[f64], sample: &SubsetSample) -> Result<(f64, Vec<f64>)> {
        sparse_reg_evaluate(&self.data, point, sample)
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }

    /// The `k` columns with the largest `|X_{S,j}ᵀ y_S|`.
    fn warm_start(&self, sample: &SubsetSample) -> Result<Vec<f64>> {
        check_sample(sample, self.data.n())?;
        let p = self.data.p();
        let mut corr = vec![0.0; p];
        for &i in sample.indices() {
            let yi = self.data.y[i];
            for (c, x) in corr.iter_mut().zip(self.data.x.row(i)) {
                *c += x * yi;
            }
        }
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| corr[b].abs().total_cmp(&corr[a].abs()).then(a.cmp(&b)));
        let mut z = vec![0.0; p];
        for &j in &order[..self.data.k] {
            z[j] = 1.0;
        }
        Ok(z)
    }
}
