//! The sampled objective abstraction and the linear cuts built from it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ScpError};
use crate::layout::VariableLayout;
use crate::sampling::{SampleId, SubsetSample};

/// A convex objective `f(z, θ; S)` that can be evaluated on any subset `S`
/// of its `N` data points.
///
/// Points are the concatenation `z ∥ θ` of length `p1 + p2`. Implementations
/// are immutable after construction so one oracle can back many concurrent runs.
pub trait SampledOracle: Send + Sync {
    /// Number of data points `N`.
    fn population(&self) -> usize;

    /// The problem's natural layout (domains plus static constraints).
    fn layout(&self) -> VariableLayout;

    fn value(&self, point: &[f64], sample: &SubsetSample) -> Result<f64>;

    fn gradient(&self, point: &[f64], sample: &SubsetSample) -> Result<Vec<f64>>;

    /// Value and gradient together; override when they share work.
    fn evaluate(&self, point: &[f64], sample: &SubsetSample) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(point, sample)?, self.gradient(point, sample)?))
    }

    /// A valid lower bound on `f` over the feasible set.
    fn lower_bound(&self) -> f64;

    /// A feasible starting point, computed from `sample` only.
    fn warm_start(&self, sample: &SubsetSample) -> Result<Vec<f64>>;

    /// Minimizes over `θ` with `z` fixed. `None` means the family has no
    /// subproblem solver.
    fn solve_subproblem(&self, _z: &[f64], _sample: &SubsetSample) -> Option<Result<Vec<f64>>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutKind {
    Objective,
    /// Linearization of constraint `g_j`. Never emitted by the engine.
    Constraint(usize),
}

/// The tangent plane `v + gᵀ(x − a)` of `f` at anchor `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub anchor: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub kind: CutKind,
    pub sample: SampleId,
}

impl Cut {
    pub fn new(anchor: Vec<f64>, value: f64, gradient: Vec<f64>, sample: SampleId) -> Result<Self> {
        if anchor.len() != gradient.len() {
            return Err(invalid(format!(
                "cut anchor has {} entries but gradient has {}",
                anchor.len(),
                gradient.len()
            )));
        }
        if !value.is_finite() || anchor.iter().chain(&gradient).any(|v| !v.is_finite()) {
            return Err(ScpError::InvalidArgument("non-finite cut data".into()));
        }
        Ok(Self { anchor, value, gradient, kind: CutKind::Objective, sample })
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    /// Constant term once the anchor is folded in: `v − gᵀa`.
    pub fn intercept(&self) -> f64 {
        self.value - dot(&self.gradient, &self.anchor)
    }

    pub fn value_at(&self, point: &[f64]) -> f64 {
        self.intercept() + dot(&self.gradient, point)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cut_is_tight_at_anchor() {
        let cut = Cut::new(vec![1.0, 0.0, 2.0], 3.5, vec![-1.0, 2.0, 0.5], SampleId::Full).unwrap();
        assert!((cut.value_at(&[1.0, 0.0, 2.0]) - 3.5).abs() < 1e-15);
        assert!((cut.value_at(&[0.0, 0.0, 2.0]) - 4.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_cut_data() {
        assert!(Cut::new(vec![0.0], f64::NAN, vec![0.0], SampleId::Full).is_err());
        assert!(Cut::new(vec![0.0], 1.0, vec![f64::INFINITY], SampleId::Full).is_err());
        assert!(Cut::new(vec![0.0, 1.0], 1.0, vec![0.0], SampleId::Full).is_err());
    }
}
