//! Variable layout of a problem: integer block `z`, continuous block `θ`,
//! their domains, and the static linear constraints over `z ∥ θ`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relation of a linear row to its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    /// Coefficients over the concatenated point `z ∥ θ`.
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Self {
        Self { coeffs, sense, rhs }
    }

    pub fn activity(&self, point: &[f64]) -> f64 {
        self.coeffs.iter().zip(point).map(|(a, x)| a * x).sum()
    }

    /// Amount by which `point` violates this row; 0 when satisfied.
    pub fn violation(&self, point: &[f64]) -> f64 {
        let lhs = self.activity(point);
        let v = match self.sense {
            Sense::Le => lhs - self.rhs,
            Sense::Ge => self.rhs - lhs,
            Sense::Eq => (lhs - self.rhs).abs(),
        };
        v.max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntBounds {
    pub lo: i64,
    pub hi: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealBounds {
    pub lo: f64,
    pub hi: f64,
}

/// Shape and domain of the decision variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableLayout {
    integer_domain: Vec<IntBounds>,
    continuous_domain: Vec<RealBounds>,
    constraints: Vec<LinearConstraint>,
}

impl VariableLayout {
    pub fn new(
        integer_domain: Vec<IntBounds>,
        continuous_domain: Vec<RealBounds>,
        constraints: Vec<LinearConstraint>,
    ) -> Result<Self> {
        if integer_domain.is_empty() && continuous_domain.is_empty() {
            return Err(invalid("layout needs at least one variable"));
        }
        for (i, b) in integer_domain.iter().enumerate() {
            if b.lo > b.hi {
                return Err(invalid(format!("integer variable {i} has lo > hi")));
            }
        }
        for (i, b) in continuous_domain.iter().enumerate() {
            if !b.lo.is_finite() || !b.hi.is_finite() || b.lo > b.hi {
                return Err(invalid(format!("continuous variable {i} needs finite bounds with lo <= hi")));
            }
        }
        let dim = integer_domain.len() + continuous_domain.len();
        for (j, c) in constraints.iter().enumerate() {
            if c.coeffs.len() != dim {
                return Err(invalid(format!("constraint {j} has {} coefficients, expected {dim}", c.coeffs.len())));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(invalid(format!("constraint {j} has non-finite data")));
            }
        }
        Ok(Self { integer_domain, continuous_domain, constraints })
    }

    /// `p` binary variables with no continuous block.
    pub fn binary(p: usize) -> Self {
        Self {
            integer_domain: vec![IntBounds { lo: 0, hi: 1 }; p],
            continuous_domain: Vec::new(),
            constraints: Vec::new(),
        }
    }

    /// Purely continuous layout with the box `[lo, hi]^p`.
    pub fn continuous(p: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![RealBounds { lo, hi }; p], Vec::new())
    }

    /// Adds `Σ z = k` over the integer block as a pair of inequalities.
    pub fn with_cardinality(mut self, k: usize) -> Self {
        let mut coeffs = vec![0.0; self.dim()];
        coeffs[..self.p1()].iter_mut().for_each(|c| *c = 1.0);
        self.constraints.push(LinearConstraint::new(coeffs.clone(), Sense::Le, k as f64));
        self.constraints.push(LinearConstraint::new(coeffs, Sense::Ge, k as f64));
        self
    }

    pub fn with_constraint(mut self, c: LinearConstraint) -> Result<Self> {
        self.constraints.push(c);
        Self::new(self.integer_domain, self.continuous_domain, self.constraints)
    }

    pub fn p1(&self) -> usize {
        self.integer_domain.len()
    }

    pub fn p2(&self) -> usize {
        self.continuous_domain.len()
    }

    pub fn dim(&self) -> usize {
        self.p1() + self.p2()
    }

    pub fn integer_domain(&self) -> &[IntBounds] {
        &self.integer_domain
    }

    pub fn continuous_domain(&self) -> &[RealBounds] {
        &self.continuous_domain
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    /// Number of integer points in the integer box, if it fits in a `u128`.
    pub fn integer_cardinality(&self) -> Option<u128> {
        self.integer_domain.iter().try_fold(1u128, |acc, b| {
            let width = u128::try_from(b.hi - b.lo + 1).ok()?;
            acc.checked_mul(width)
        })
    }

    /// Worst violation over the static constraints; 0 means feasible.
    pub fn worst_violation(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.dim());
        self.constraints.iter().map(|c| c.violation(point)).fold(0.0, f64::max)
    }

    /// Whether `point` lies within the variable bounds (and the integer block is integral).
    pub fn within_bounds(&self, point: &[f64], tol: f64) -> bool {
        let (z, theta) = point.split_at(self.p1());
        z.iter()
            .zip(&self.integer_domain)
            .all(|(&v, b)| (v - v.round()).abs() <= tol && v >= b.lo as f64 - tol && v <= b.hi as f64 + tol)
            && theta.iter().zip(&self.continuous_domain).all(|(&v, b)| v >= b.lo - tol && v <= b.hi + tol)
    }
}

/// Max over static linear constraints of `(lhs − rhs)⁺`.
pub fn evaluate_incumbent_feasibility(point: &[f64], layout: &VariableLayout) -> f64 {
    layout.worst_violation(point)
}
