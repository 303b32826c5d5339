//! One-slack quadratic master for linear SVMs:
//!
//! ```text
//! min ½‖θ‖² + C·ξ   s.t.   ξ ≥ bᵢ − aᵢᵀθ  for every cut i,   ξ ≥ 0
//! ```
//!
//! solved through its dual `max Σαᵢbᵢ − ½‖Σαᵢaᵢ‖²` over `α ≥ 0, Σα ≤ C`.
//! The `ξ ≥ 0` row is kept as an explicit zero cut, which turns the dual
//! feasible set into the scaled simplex `Σα = C`; coordinate ascent then
//! moves mass between pairs of cuts.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::oracle::dot;

const MAX_SWEEPS: usize = 100_000;
const STALL: f64 = 4.0 * f64::EPSILON;
const GAP_TOL: f64 = 1e-10;

/// Accumulated cuts `ξ ≥ bᵢ − aᵢᵀθ` plus the warm-start state of the dual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QpMaster {
    p: usize,
    c: f64,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    /// Row-major Gram matrix of the `aᵢ`, grown as cuts arrive.
    gram: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub theta: Vec<f64>,
    pub xi: f64,
    /// Primal objective `½‖θ‖² + Cξ`.
    pub objective: f64,
    pub dual_objective: f64,
    /// One multiplier per cut, the implicit zero cut first.
    pub alpha: Vec<f64>,
    /// `max gᵢ − min_{αᵢ>0} gᵢ` with `gᵢ = bᵢ − aᵢᵀθ`.
    pub kkt_residual: f64,
    pub sweeps: usize,
    /// False when the sweep cap was reached before the tolerance.
    pub converged: bool,
}

impl QpMaster {
    /// A master holding only the zero cut (`ξ ≥ 0`).
    pub fn new(p: usize, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("regularization weight C must be positive and finite"));
        }
        Ok(Self { p, c, a: vec![vec![0.0; p]], b: vec![0.0], gram: vec![vec![0.0]], alpha: vec![c] })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Number of cuts including the zero cut.
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cuts(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.a.iter().map(Vec::as_slice).zip(self.b.iter().copied())
    }

    /// Adds `ξ ≥ b − aᵀθ`.
    pub fn add_cut(&mut self, a: Vec<f64>, b: f64) -> Result<()> {
        if a.len() != self.p {
            return Err(invalid(format!("cut has dimension {}, expected {}", a.len(), self.p)));
        }
        if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite cut data"));
        }
        let row: Vec<f64> = self.a.iter().map(|ai| dot(ai, &a)).collect();
        for (g, &v) in self.gram.iter_mut().zip(&row) {
            g.push(v);
        }
        let mut row = row;
        row.push(dot(&a, &a));
        self.gram.push(row);
        self.a.push(a);
        self.b.push(b);
        self.alpha.push(0.0);
        Ok(())
    }

    /// Primal objective at `θ`.
    pub fn primal_objective(&self, theta: &[f64]) -> f64 {
        let xi = self.cuts().map(|(a, b)| b - dot(a, theta)).fold(0.0, f64::max);
        0.5 * dot(theta, theta) + self.c * xi
    }

    fn theta(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.p];
        for (ai, &al) in self.a.iter().zip(&self.alpha) {
            if al != 0.0 {
                w.iter_mut().zip(ai).for_each(|(w, a)| *w += al * a);
            }
        }
        w
    }

    /// Runs pairwise dual coordinate ascent from the stored multipliers.
    pub fn solve(&mut self) -> QpSolution {
        let k = self.len();
        // g_i = b_i − a_iᵀ w, with w = Σ α_j a_j.
        let mut g: Vec<f64> = (0..k).map(|i| self.b[i] - dot(&self.gram[i], &self.alpha)).collect();
        let mut sweeps = 0;
        let mut converged = false;

        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            let mut max_step = 0.0f64;
            for i in 0..k {
                // Strongest partner on either side of i.
                let (mut hi, mut lo) = (None::<usize>, None::<usize>);
                for j in 0..k {
                    if j == i {
                        continue;
                    }
                    if hi.is_none_or(|h| g[j] > g[h]) {
                        hi = Some(j);
                    }
                    if self.alpha[j] > 0.0 && lo.is_none_or(|l| g[j] < g[l]) {
                        lo = Some(j);
                    }
                }
                let up = lo.filter(|&j| g[i] > g[j]).map(|j| (i, j, g[i] - g[j]));
                let down = hi.filter(|&j| self.alpha[i] > 0.0 && g[j] > g[i]).map(|j| (j, i, g[j] - g[i]));
                let pick = match (up, down) {
                    (Some(u), Some(d)) => Some(if u.2 >= d.2 { u } else { d }),
                    (u, d) => u.or(d),
                };
                if let Some((to, from, _)) = pick {
                    max_step = max_step.max(self.transfer(to, from, &mut g));
                }
            }
            let gap = self.gap(&g);
            let primal = self.dual_objective(&g) + gap;
            if gap <= GAP_TOL * (1.0 + primal.abs()) {
                converged = true;
                break;
            }
            // Gains shrink quadratically with the KKT residual and vanish in
            // round-off long before the gap does; stall on step size instead.
            if max_step <= STALL * self.c {
                converged = gap <= 1e-7 * (1.0 + primal.abs());
                break;
            }
        }

        let theta = self.theta();
        let gmax = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let xi = gmax.max(0.0);
        let gmin_active =
            g.iter().zip(&self.alpha).filter(|(_, &a)| a > 0.0).map(|(g, _)| *g).fold(f64::INFINITY, f64::min);
        QpSolution {
            objective: 0.5 * dot(&theta, &theta) + self.c * xi,
            dual_objective: self.dual_objective(&g),
            theta,
            xi,
            alpha: self.alpha.clone(),
            kkt_residual: (gmax - gmin_active).max(0.0),
            sweeps,
            converged,
        }
    }

    /// Moves the dual-optimal amount of mass from `from` to `to` and returns it.
    fn transfer(&mut self, to: usize, from: usize, g: &mut [f64]) -> f64 {
        let diff = g[to] - g[from];
        let curv = self.gram[to][to] + self.gram[from][from] - 2.0 * self.gram[to][from];
        let cap = self.alpha[from];
        let t = if curv > 1e-300 { (diff / curv).min(cap) } else { cap };
        if t <= 0.0 {
            return 0.0;
        }
        self.alpha[to] += t;
        self.alpha[from] = if t == cap { 0.0 } else { self.alpha[from] - t };
        for (kk, gk) in g.iter_mut().enumerate() {
            *gk -= t * (self.gram[kk][to] - self.gram[kk][from]);
        }
        t
    }

    fn dual_objective(&self, g: &[f64]) -> f64 {
        // Σαb − ½wᵀw with wᵀw = Σα(b − g).
        let ab: f64 = self.alpha.iter().zip(&self.b).map(|(a, b)| a * b).sum();
        let ww: f64 = self.alpha.iter().zip(self.b.iter().zip(g)).map(|(a, (b, g))| a * (b - g)).sum();
        ab - 0.5 * ww
    }

    /// Primal-dual gap `Σαᵢ(max g − gᵢ)`.
    fn gap(&self, g: &[f64]) -> f64 {
        let gmax = g.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        self.alpha.iter().zip(g).map(|(a, gi)| a * (gmax - gi)).sum()
    }
}

/// Solves the master from a cold start.
pub fn solve_qp(master: &QpMaster) -> QpSolution {
    let mut m = master.clone();
    m.alpha.iter_mut().for_each(|a| *a = 0.0);
    m.alpha[0] = m.c;
    m.solve()
}
