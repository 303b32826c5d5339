//! Static stochastic knapsack under sample average approximation:
//!
//! ```text
//! max_z  rᵀz − (c/n) Σ_j max(W^jᵀz − q, 0)
//! ```
//!
//! The oracle minimizes the negation, so cuts are taken on
//! `−rᵀz + C(z; S)` where `C` is the expected overrun penalty.

use serde::{Deserialize, Serialize};

use super::{check_point, check_sample, RowMatrix};
use crate::error::{invalid, Result, ScpError};
use crate::layout::{Sense, VariableLayout};
use crate::milp::{Column, MasterModel};
use crate::oracle::{dot, SampledOracle};
use crate::sampling::SubsetSample;

/// Largest column count accepted by [`sskp_linear_reformulation`].
pub const MAX_REFORMULATION_COLUMNS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SskpData {
    pub r: Vec<f64>,
    /// One scenario per row, one item per column.
    pub w: RowMatrix,
    pub c: f64,
    pub q: f64,
}

impl SskpData {
    pub fn new(r: Vec<f64>, w: RowMatrix, c: f64, q: f64) -> Result<Self> {
        if r.is_empty() || w.cols() != r.len() {
            return Err(invalid("reward and scenario dimensions differ"));
        }
        if w.rows() == 0 {
            return Err(invalid("no scenarios"));
        }
        if !(c > 0.0 && c.is_finite()) || !(q > 0.0 && q.is_finite()) {
            return Err(invalid("c and q must be positive and finite"));
        }
        if !w.is_finite() || r.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite knapsack data"));
        }
        Ok(Self { r, w, c, q })
    }

    pub fn n(&self) -> usize {
        self.w.rows()
    }

    pub fn k(&self) -> usize {
        self.r.len()
    }
}

/// `(c/n) Σ_{j∈S} max(W^jᵀz − q, 0)`.
pub fn sskp_cost_value(data: &SskpData, z: &[f64], sample: &SubsetSample) -> Result<f64> {
    check_point(z, data.k())?;
    check_sample(sample, data.n())?;
    let total: f64 = sample.indices().iter().map(|&j| (dot(data.w.row(j), z) - data.q).max(0.0)).sum();
    Ok(data.c * total / sample.len() as f64)
}

/// `(c/n) Σ_{j∈S} W^j · 1{W^jᵀz − q ≥ 0}`.
pub fn sskp_cost_gradient(data: &SskpData, z: &[f64], sample: &SubsetSample) -> Result<Vec<f64>> {
    Ok(cost_evaluate(data, z, sample)?.1)
}

fn cost_evaluate(data: &SskpData, z: &[f64], sample: &SubsetSample) -> Result<(f64, Vec<f64>)> {
    check_point(z, data.k())?;
    check_sample(sample, data.n())?;
    let mut total = 0.0;
    let mut g = vec![0.0; data.k()];
    for &j in sample.indices() {
        let row = data.w.row(j);
        let over = dot(row, z) - data.q;
        if over >= 0.0 {
            total += over;
            g.iter_mut().zip(row).for_each(|(g, w)| *g += w);
        }
    }
    let scale = data.c / sample.len() as f64;
    g.iter_mut().for_each(|v| *v *= scale);
    Ok((total * scale, g))
}

/// `rᵀz − C(z; S)`, the quantity being maximized.
pub fn sskp_full_objective(data: &SskpData, z: &[f64], sample: &SubsetSample) -> Result<f64> {
    Ok(dot(&data.r, z) - sskp_cost_value(data, z, sample)?)
}

/// The exact mixed-binary model over all `N` scenarios:
///
/// ```text
/// min −rᵀz + (c/N) Σ_j x_j   s.t.   x_j − W^jᵀz ≥ −q,   x ≥ 0,   z ∈ {0,1}^k
/// ```
///
/// Columns are `z_0..z_{k−1}` followed by `x_0..x_{N−1}`. The optimal
/// objective is the negated knapsack value.
pub fn sskp_linear_reformulation(data: &SskpData) -> Result<MasterModel> {
    let (k, n) = (data.k(), data.n());
    if k + n > MAX_REFORMULATION_COLUMNS {
        return Err(ScpError::ResourceExhausted(format!(
            "linear reformulation needs {} columns, limit is {MAX_REFORMULATION_COLUMNS}",
            k + n
        )));
    }
    let mut columns = Vec::with_capacity(k + n);
    let mut objective = Vec::with_capacity(k + n);
    for (i, &r) in data.r.iter().enumerate() {
        columns.push(Column { name: format!("z{i}"), lower: 0.0, upper: 1.0, integer: true });
        objective.push(-r);
    }
    for j in 0..n {
        // The overrun can never exceed the load of every positive item.
        let cap: f64 = data.w.row(j).iter().map(|w| w.max(0.0)).sum();
        columns.push(Column { name: format!("x{j}"), lower: 0.0, upper: (cap - data.q).max(0.0), integer: false });
        objective.push(data.c / n as f64);
    }
    let mut model = MasterModel::new(columns, objective)?;
    for j in 0..n {
        let mut coeffs = vec![0.0; k + n];
        for (a, w) in coeffs.iter_mut().zip(data.w.row(j)) {
            *a = -w;
        }
        coeffs[k + j] = 1.0;
        model.add_row(format!("over{j}"), coeffs, Sense::Ge, -data.q)?;
    }
    Ok(model)
}

#[derive(Debug, Clone)]
pub struct SskpOracle {
    data: SskpData,
}

impl SskpOracle {
    pub fn new(data: SskpData) -> Self {
        Self { data }
    }

    pub fn data(&self) -> &SskpData {
        &self.data
    }
}

impl SampledOracle for SskpOracle {
    fn population(&self) -> usize {
        self.data.n()
    }

    fn layout(&self) -> VariableLayout {
        VariableLayout::binary(self.data.k())
    }

    /// `−rᵀz + C(z; S)`.
    fn value(&self, point: &[f64], sample: &SubsetSample) -> Result<f64> {
        Ok(-sskp_full_objective(&self.data, point, sample)?)
    }

    fn gradient(&self, point: &[f64], sample: &SubsetSample) -> Result<Vec<f64>> {
        Ok(self.evaluate(point, sample)?.1)
    }

    fn evaluate(&self, point: &[f64], sample: &SubsetSample) -> Result<(f64, Vec<f64>)> {
        let (cost, mut g) = cost_evaluate(&self.data, point, sample)?;
        g.iter_mut().zip(&self.data.r).for_each(|(g, r)| *g -= r);
        Ok((cost - dot(&self.data.r, point), g))
    }

    fn lower_bound(&self) -> f64 {
        -self.data.r.iter().map(|r| r.max(0.0)).sum::<f64>()
    }

    /// Greedy by `rᵢ/μ̂ᵢ`, stopping at the first item whose mean load would overflow `q`.
    fn warm_start(&self, sample: &SubsetSample) -> Result<Vec<f64>> {
        check_sample(sample, self.data.n())?;
        let k = self.data.k();
        let mut mu = vec![0.0; k];
        for &j in sample.indices() {
            mu.iter_mut().zip(self.data.w.row(j)).for_each(|(m, w)| *m += w);
        }
        mu.iter_mut().for_each(|m| *m /= sample.len() as f64);
        let ratio = |i: usize| {
            if mu[i] > 0.0 {
                self.data.r[i] / mu[i]
            } else {
                f64::INFINITY
            }
        };
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)).then(a.cmp(&b)));
        let mut z = vec![0.0; k];
        let mut load = 0.0;
        for i in order {
            if load + mu[i] > self.data.q {
                break;
            }
            load += mu[i];
            z[i] = 1.0;
        }
        Ok(z)
    }
}
