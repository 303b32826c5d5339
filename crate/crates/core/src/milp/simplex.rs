//! Bounded-variable primal simplex on dense rows.
//!
//! Rows `aᵢᵀx {≤,≥,=} bᵢ` are turned into `Ax − r = 0` with one logical
//! variable `rᵢ` per row carrying the row bounds. Phase 1 minimizes the sum of
//! bound infeasibilities of the basic variables, so any nonsingular starting
//! basis is accepted; this is what lets branch-and-bound children restart from
//! their parent's basis. Pricing is Dantzig's rule, switching to Bland's rule
//! after a run of degenerate pivots. A primal infeasible start that is dual
//! feasible is first handed to a bounded dual simplex.
#![allow(clippy::needless_range_loop)]

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScpError};
use crate::layout::Sense;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const ZERO_PIVOT: f64 = 1e-11;
const SMALL_PIVOT: f64 = 1e-10;
const DEGENERATE_STEP: f64 = 1e-12;
const RATIO_TIE: f64 = 1e-12;
const BLAND_AFTER: usize = 50;
const REFACTOR_EVERY: usize = 64;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Basic variable per row plus which nonbasic variables sit at their upper bound.
///
/// Indices `0..n` are structural columns, `n..n+m` row logicals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub basic: Vec<usize>,
    pub at_upper: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Values of the structural columns.
    pub point: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y` of the final basis (phase-2 costs).
    pub duals: Vec<f64>,
    pub basis: Option<Basis>,
    pub pivots: usize,
}

/// Borrowed view of a dense LP: `min cᵀx` over rows and column bounds.
#[derive(Debug, Clone, Copy)]
pub struct LpView<'a> {
    pub objective: &'a [f64],
    pub rows: &'a [Vec<f64>],
    pub senses: &'a [Sense],
    pub rhs: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    FreeZero,
}

struct Simplex<'a> {
    lp: LpView<'a>,
    n: usize,
    m: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basic: Vec<usize>,
    /// Row `i` is handled as `(a_i x) / scale[i]`; `scale[i]` is its largest |coefficient|.
    scale: Vec<f64>,
    /// Nonzero positions per row and per structural column.
    row_nz: Vec<Vec<usize>>,
    col_nz: Vec<Vec<usize>>,
    binv: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
}

/// Solves the LP relaxation, optionally starting from `start`.
pub fn solve_lp(lp: LpView<'_>, start: Option<&Basis>) -> Result<LpSolution> {
    LpSession::new(lp)?.solve(lp.lower, lp.upper, start)
}

/// A simplex kept alive across solves that differ only in column bounds.
///
/// Re-solving without a starting basis continues from the previous final
/// basis and its factorization, which is what makes diving cheap.
pub struct LpSession<'a> {
    s: Simplex<'a>,
    warm: bool,
}

impl<'a> LpSession<'a> {
    pub fn new(lp: LpView<'a>) -> Result<Self> {
        validate(&lp)?;
        Ok(Self { s: Simplex::new(lp), warm: false })
    }

    /// Solves with the given structural bounds. `start` forces a basis;
    /// otherwise the previous final basis is reused when there is one.
    pub fn solve(&mut self, lower: &[f64], upper: &[f64], start: Option<&Basis>) -> Result<LpSolution> {
        let s = &mut self.s;
        if lower.len() != s.n || upper.len() != s.n {
            return Err(ScpError::InvalidArgument("bound vectors do not match column count".into()));
        }
        if lower
            .iter()
            .zip(upper)
            .any(|(l, h)| l.is_nan() || h.is_nan() || *l == f64::INFINITY || *h == f64::NEG_INFINITY)
        {
            return Err(ScpError::InvalidArgument("invalid column bound".into()));
        }
        s.lo[..s.n].copy_from_slice(lower);
        s.hi[..s.n].copy_from_slice(upper);
        s.pivots = 0;
        let reused = match start {
            Some(b) => s.install_basis(b),
            None if self.warm => {
                s.reset_nonbasics();
                s.recompute_basics();
                true
            }
            None => false,
        };
        if !reused {
            s.install_slack_basis();
        }
        let out = match s.run() {
            Err(ScpError::NumericFailure(_)) => {
                // One clean restart from the slack basis before giving up.
                s.pivots = 0;
                s.install_slack_basis();
                s.run()
            }
            other => other,
        };
        self.warm = out.is_ok();
        out
    }
}

fn validate(lp: &LpView<'_>) -> Result<()> {
    let n = lp.objective.len();
    let bad = |m: &str| Err(ScpError::InvalidArgument(m.to_string()));
    if lp.lower.len() != n || lp.upper.len() != n {
        return bad("bound vectors do not match column count");
    }
    if lp.rows.len() != lp.senses.len() || lp.rows.len() != lp.rhs.len() {
        return bad("row data lengths differ");
    }
    if lp.rows.iter().any(|r| r.len() != n) {
        return bad("row with wrong number of coefficients");
    }
    if lp.objective.iter().any(|c| !c.is_finite())
        || lp.rhs.iter().any(|b| !b.is_finite())
        || lp.rows.iter().flatten().any(|a| !a.is_finite())
    {
        return bad("non-finite LP data");
    }
    if lp.lower.iter().any(|l| l.is_nan() || *l == f64::INFINITY)
        || lp.upper.iter().any(|u| u.is_nan() || *u == f64::NEG_INFINITY)
    {
        return bad("invalid column bound");
    }
    Ok(())
}

impl<'a> Simplex<'a> {
    fn new(lp: LpView<'a>) -> Self {
        let n = lp.objective.len();
        let m = lp.rows.len();
        let mut lo = lp.lower.to_vec();
        let mut hi = lp.upper.to_vec();
        let scale: Vec<f64> = lp
            .rows
            .iter()
            .map(|r| {
                let m = r.iter().fold(0.0f64, |m, a| m.max(a.abs()));
                if m > 0.0 {
                    m
                } else {
                    1.0
                }
            })
            .collect();
        for ((sense, &b), &sc) in lp.senses.iter().zip(lp.rhs).zip(&scale) {
            let b = b / sc;
            let (l, h) = match sense {
                Sense::Le => (f64::NEG_INFINITY, b),
                Sense::Ge => (b, f64::INFINITY),
                Sense::Eq => (b, b),
            };
            lo.push(l);
            hi.push(h);
        }
        let row_nz: Vec<Vec<usize>> = lp.rows.iter().map(|r| (0..n).filter(|&j| r[j] != 0.0).collect()).collect();
        let mut col_nz = vec![Vec::new(); n];
        for (i, nz) in row_nz.iter().enumerate() {
            for &j in nz {
                col_nz[j].push(i);
            }
        }
        Self {
            lp,
            n,
            m,
            lo,
            hi,
            x: vec![0.0; n + m],
            state: vec![VarState::AtLower; n + m],
            basic: Vec::with_capacity(m),
            scale,
            row_nz,
            col_nz,
            binv: vec![0.0; m * m],
            pivots: 0,
            since_refactor: 0,
        }
    }

    fn nonbasic_state(&self, j: usize, prefer_upper: bool) -> (VarState, f64) {
        let (l, h) = (self.lo[j], self.hi[j]);
        match (l.is_finite(), h.is_finite()) {
            (true, true) if prefer_upper => (VarState::AtUpper, h),
            (true, _) => (VarState::AtLower, l),
            (false, true) => (VarState::AtUpper, h),
            (false, false) => (VarState::FreeZero, 0.0),
        }
    }

    fn install_slack_basis(&mut self) {
        for j in 0..self.n {
            let (st, v) = self.nonbasic_state(j, false);
            self.state[j] = st;
            self.x[j] = v;
        }
        self.basic = (self.n..self.n + self.m).collect();
        for j in self.n..self.n + self.m {
            self.state[j] = VarState::Basic;
        }
        // B = −I.
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.m {
            self.binv[i * self.m + i] = -1.0;
        }
        self.since_refactor = 0;
        self.recompute_basics();
    }

    /// Moves every nonbasic variable onto its (possibly changed) bound.
    fn reset_nonbasics(&mut self) {
        for j in 0..self.n + self.m {
            if self.state[j] != VarState::Basic {
                let (st, v) = self.nonbasic_state(j, self.state[j] == VarState::AtUpper);
                self.state[j] = st;
                self.x[j] = v;
            }
        }
    }

    /// Largest of the primal residual `|A x − r|` and the dual residual on basic
    /// columns `|c_j − a_jᵀ y|`, both in scaled units.
    fn residual(&self, cost: &[f64], y: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (i, (row, sc)) in self.lp.rows.iter().zip(&self.scale).enumerate() {
            let act: f64 = self.row_nz[i].iter().map(|&j| row[j] * self.x[j]).sum::<f64>() / sc;
            worst = worst.max((act - self.x[self.n + i]).abs() / (1.0 + act.abs()));
        }
        let mut col = vec![0.0; self.m];
        for &j in &self.basic {
            self.column(j, &mut col);
            let ay: f64 = col.iter().zip(y).map(|(a, b)| a * b).sum();
            worst = worst.max((cost[j] - ay).abs() / (1.0 + cost[j].abs()));
        }
        worst
    }

    fn install_basis(&mut self, b: &Basis) -> bool {
        let total = self.n + self.m;
        if b.basic.len() != self.m || b.at_upper.len() != total {
            return false;
        }
        let mut seen = vec![false; total];
        for &j in &b.basic {
            if j >= total || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        for j in 0..total {
            if seen[j] {
                self.state[j] = VarState::Basic;
            } else {
                let (st, v) = self.nonbasic_state(j, b.at_upper[j]);
                self.state[j] = st;
                self.x[j] = v;
            }
        }
        self.basic = b.basic.clone();
        if !self.refactor() {
            return false;
        }
        self.recompute_basics();
        true
    }

    /// Column `j` of `[A | −I]`, scattered into `out`.
    fn column(&self, j: usize, out: &mut [f64]) {
        if j < self.n {
            for ((o, row), sc) in out.iter_mut().zip(self.lp.rows).zip(&self.scale) {
                *o = row[j] / sc;
            }
        } else {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[j - self.n] = -1.0;
        }
    }

    /// `w = B⁻¹ a_j` for column `j` of `[A | −I]`.
    fn ftran(&self, j: usize, w: &mut [f64]) {
        let m = self.m;
        if j < self.n {
            w.iter_mut().for_each(|v| *v = 0.0);
            for &i in &self.col_nz[j] {
                let a = self.lp.rows[i][j] / self.scale[i];
                for (pos, v) in w.iter_mut().enumerate() {
                    *v += self.binv[pos * m + i] * a;
                }
            }
        } else {
            let i = j - self.n;
            for (pos, v) in w.iter_mut().enumerate() {
                *v = -self.binv[pos * m + i];
            }
        }
    }

    /// Rebuilds `B⁻¹` from scratch. Returns false when `B` is singular.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        if m == 0 {
            return true;
        }
        let mut b = DMatrix::<f64>::zeros(m, m);
        let mut col = vec![0.0; m];
        for (pos, &j) in self.basic.iter().enumerate() {
            self.column(j, &mut col);
            for i in 0..m {
                b[(i, pos)] = col[i];
            }
        }
        let lu = b.lu();
        let Some(inv) = lu.try_inverse() else {
            return false;
        };
        if inv.iter().any(|v| !v.is_finite()) {
            return false;
        }
        for r in 0..m {
            for i in 0..m {
                self.binv[r * m + i] = inv[(r, i)];
            }
        }
        self.since_refactor = 0;
        true
    }

    /// `x_B = −B⁻¹ N x_N`.
    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for (i, r) in rhs.iter_mut().enumerate() {
            let row = &self.lp.rows[i];
            let act: f64 =
                self.row_nz[i].iter().filter(|&&j| self.state[j] != VarState::Basic).map(|&j| row[j] * self.x[j]).sum();
            *r = -act / self.scale[i];
        }
        for i in 0..m {
            let j = self.n + i;
            if self.state[j] != VarState::Basic {
                rhs[i] += self.x[j];
            }
        }
        for pos in 0..m {
            let row = &self.binv[pos * m..(pos + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.basic[pos]] = v;
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - PRIMAL_TOL {
            self.lo[j] - v
        } else if v > self.hi[j] + PRIMAL_TOL {
            v - self.hi[j]
        } else {
            0.0
        }
    }

    /// `y = c_Bᵀ B⁻¹` and `d = c − [A | −I]ᵀ y`.
    fn reduced_costs(&self, cost: &[f64], y: &mut [f64], d: &mut [f64]) {
        let m = self.m;
        y.iter_mut().for_each(|v| *v = 0.0);
        for (pos, &j) in self.basic.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                let row = &self.binv[pos * m..(pos + 1) * m];
                for (yi, b) in y.iter_mut().zip(row) {
                    *yi += cb * b;
                }
            }
        }
        d[..self.n].copy_from_slice(&cost[..self.n]);
        for (i, yi) in y.iter().enumerate() {
            if *yi != 0.0 {
                let f = yi / self.scale[i];
                let row = &self.lp.rows[i];
                for &j in &self.row_nz[i] {
                    d[j] -= f * row[j];
                }
            }
        }
        for i in 0..m {
            d[self.n + i] = cost[self.n + i] + y[i];
        }
    }

    /// Puts boxed nonbasics on the bound their reduced cost prefers and reports
    /// whether the basis is then dual feasible for the true costs.
    fn make_dual_feasible(&mut self, d: &[f64]) -> bool {
        let mut moved = false;
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let (lo_ok, hi_ok) = (self.lo[j].is_finite(), self.hi[j].is_finite());
            if d[j] > DUAL_TOL {
                if !lo_ok {
                    return false;
                }
                if self.state[j] != VarState::AtLower {
                    self.state[j] = VarState::AtLower;
                    self.x[j] = self.lo[j];
                    moved = true;
                }
            } else if d[j] < -DUAL_TOL {
                if !hi_ok {
                    return false;
                }
                if self.state[j] != VarState::AtUpper {
                    self.state[j] = VarState::AtUpper;
                    self.x[j] = self.hi[j];
                    moved = true;
                }
            }
        }
        if moved {
            self.recompute_basics();
        }
        true
    }

    /// Bounded dual simplex from a dual feasible basis; the usual situation
    /// after bounds tighten or violated rows arrive with basic logicals.
    ///
    /// Returns `Some` only for an infeasibility verdict. `None` hands the
    /// current basis to the primal loop, which then either stops at once
    /// (the dual run reached optimality) or repairs whatever is left.
    fn dual_simplex(&mut self, max_pivots: usize) -> Option<LpSolution> {
        let m = self.m;
        let total = self.n + m;
        let mut cost = vec![0.0; total];
        cost[..self.n].copy_from_slice(self.lp.objective);
        let mut y = vec![0.0; m];
        let mut d = vec![0.0; total];
        let mut alpha = vec![0.0; total];
        let mut rho = vec![0.0; m];
        let mut w = vec![0.0; m];
        let mut fresh_verdict = false;

        self.reduced_costs(&cost, &mut y, &mut d);
        if !self.make_dual_feasible(&d) {
            return None;
        }
        loop {
            if self.pivots > max_pivots {
                return None;
            }
            if self.since_refactor >= REFACTOR_EVERY.max(m) {
                if !self.refactor() {
                    return None;
                }
                self.recompute_basics();
            }
            self.reduced_costs(&cost, &mut y, &mut d);

            // Leaving row: the largest bound violation.
            let mut leave: Option<(usize, f64)> = None;
            for (pos, &j) in self.basic.iter().enumerate() {
                let v = self.x[j];
                let delta = if v < self.lo[j] - PRIMAL_TOL {
                    v - self.lo[j]
                } else if v > self.hi[j] + PRIMAL_TOL {
                    v - self.hi[j]
                } else {
                    continue;
                };
                if leave.is_none_or(|(_, b)| delta.abs() > b.abs()) {
                    leave = Some((pos, delta));
                }
            }
            let (r, delta) = leave?;

            // Pivot row α_j = (B⁻¹)_r · column j.
            rho.copy_from_slice(&self.binv[r * m..(r + 1) * m]);
            alpha[..self.n].iter_mut().for_each(|a| *a = 0.0);
            for (i, p) in rho.iter().enumerate() {
                if *p != 0.0 {
                    let f = p / self.scale[i];
                    let row = &self.lp.rows[i];
                    for &j in &self.row_nz[i] {
                        alpha[j] += f * row[j];
                    }
                }
            }
            for i in 0..m {
                alpha[self.n + i] = -rho[i];
            }

            // Ratio test over nonbasics that move x_B[r] toward its bound.
            let mut enter: Option<(usize, f64)> = None;
            let mut best = f64::INFINITY;
            for j in 0..total {
                let a = alpha[j];
                if a.abs() <= ZERO_PIVOT || self.lo[j] == self.hi[j] {
                    continue;
                }
                // x_B[r] changes by −α_j per unit increase of x_j.
                let eligible = match self.state[j] {
                    VarState::Basic => false,
                    VarState::AtLower => (delta < 0.0) == (a < 0.0),
                    VarState::AtUpper => (delta < 0.0) == (a > 0.0),
                    VarState::FreeZero => true,
                };
                if !eligible {
                    continue;
                }
                let ratio = d[j].abs() / a.abs();
                let better =
                    ratio < best - RATIO_TIE || (ratio <= best + RATIO_TIE && enter.is_none_or(|(_, ab)| a.abs() > ab));
                if better {
                    best = best.min(ratio);
                    enter = Some((j, a.abs()));
                }
            }
            let Some((q, _)) = enter else {
                // A dual ray; confirm it on a fresh factorization before trusting it.
                if fresh_verdict || self.since_refactor == 0 {
                    return Some(self.finish(LpStatus::Infeasible, &y));
                }
                if !self.refactor() {
                    return None;
                }
                self.recompute_basics();
                fresh_verdict = true;
                continue;
            };
            fresh_verdict = false;

            self.ftran(q, &mut w);
            if w[r].abs() < SMALL_PIVOT {
                return None;
            }
            let out = self.basic[r];
            let step = delta / w[r];
            self.x[q] += step;
            for pos in 0..m {
                if w[pos] != 0.0 {
                    self.x[self.basic[pos]] -= step * w[pos];
                }
            }
            if delta < 0.0 {
                self.x[out] = self.lo[out];
                self.state[out] = VarState::AtLower;
            } else {
                self.x[out] = self.hi[out];
                self.state[out] = VarState::AtUpper;
            }
            self.state[q] = VarState::Basic;
            self.basic[r] = q;
            self.pivot_inverse(r, &w);
            self.pivots += 1;
        }
    }

    fn run(&mut self) -> Result<LpSolution> {
        let m = self.m;
        let total = self.n + self.m;
        let max_pivots = 50 * total + 10_000;
        if self.basic.iter().any(|&j| self.infeasibility(j) > 0.0) {
            if let Some(verdict) = self.dual_simplex(max_pivots / 2) {
                return Ok(verdict);
            }
        }
        let mut degenerate_run = 0usize;
        let mut retried_small_pivot = false;
        let mut cost = vec![0.0; total];
        let mut y = vec![0.0; m];
        let mut d = vec![0.0; total];
        let mut w = vec![0.0; m];

        loop {
            if self.pivots > max_pivots {
                return Err(ScpError::NumericFailure(format!("simplex exceeded {max_pivots} pivots")));
            }
            if self.since_refactor >= REFACTOR_EVERY.max(m) {
                if !self.refactor() {
                    return Err(ScpError::NumericFailure("singular basis".into()));
                }
                self.recompute_basics();
            }

            let phase_one = self.basic.iter().any(|&j| self.infeasibility(j) > 0.0);
            cost.iter_mut().for_each(|c| *c = 0.0);
            if phase_one {
                for &j in &self.basic {
                    let v = self.x[j];
                    if v < self.lo[j] - PRIMAL_TOL {
                        cost[j] = -1.0;
                    } else if v > self.hi[j] + PRIMAL_TOL {
                        cost[j] = 1.0;
                    }
                }
            } else {
                cost[..self.n].copy_from_slice(self.lp.objective);
            }

            self.reduced_costs(&cost, &mut y, &mut d);

            let bland = degenerate_run >= BLAND_AFTER;
            let entering = self.choose_entering(&d, bland);
            let Some((q, dir)) = entering else {
                // Verdicts need an accurate inverse: drift in the updated
                // inverse can hide infeasible basics or a nonoptimal basis.
                if self.since_refactor > 0 && self.residual(&cost, &y) > RESIDUAL_TOL {
                    if !self.refactor() {
                        return Err(ScpError::NumericFailure("singular basis".into()));
                    }
                    self.recompute_basics();
                    continue;
                }
                let status = if phase_one { LpStatus::Infeasible } else { LpStatus::Optimal };
                return Ok(self.finish(status, &y));
            };

            // w = B⁻¹ a_q
            self.ftran(q, &mut w);

            let (step, leave) = self.ratio_test(q, dir, &w, phase_one, bland);
            if step.is_infinite() {
                if phase_one {
                    return Err(ScpError::NumericFailure("unbounded ray in phase 1".into()));
                }
                return Ok(self.finish(LpStatus::Unbounded, &y));
            }
            if let Some((pos, _)) = leave {
                if w[pos].abs() < SMALL_PIVOT {
                    if retried_small_pivot {
                        return Err(ScpError::NumericFailure(format!(
                            "pivot {:.3e} below threshold after refactorization",
                            w[pos]
                        )));
                    }
                    retried_small_pivot = true;
                    if !self.refactor() {
                        return Err(ScpError::NumericFailure("singular basis".into()));
                    }
                    self.recompute_basics();
                    continue;
                }
            }
            retried_small_pivot = false;

            if step <= DEGENERATE_STEP {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            // Move along the edge.
            let signed = dir * step;
            self.x[q] += signed;
            for pos in 0..m {
                if w[pos] != 0.0 {
                    self.x[self.basic[pos]] -= signed * w[pos];
                }
            }
            self.pivots += 1;

            match leave {
                None => {
                    // Bound flip of the entering variable.
                    self.state[q] = if dir > 0.0 {
                        self.x[q] = self.hi[q];
                        VarState::AtUpper
                    } else {
                        self.x[q] = self.lo[q];
                        VarState::AtLower
                    };
                }
                Some((pos, to_upper)) => {
                    let out = self.basic[pos];
                    if to_upper {
                        self.x[out] = self.hi[out];
                        self.state[out] = VarState::AtUpper;
                    } else {
                        self.x[out] = self.lo[out];
                        self.state[out] = VarState::AtLower;
                    }
                    self.state[q] = VarState::Basic;
                    self.basic[pos] = q;
                    self.pivot_inverse(pos, &w);
                }
            }
        }
    }

    fn choose_entering(&self, d: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let dir = match self.state[j] {
                VarState::Basic => continue,
                _ if self.lo[j] == self.hi[j] => continue,
                VarState::AtLower if d[j] < -DUAL_TOL => 1.0,
                VarState::AtUpper if d[j] > DUAL_TOL => -1.0,
                VarState::FreeZero if d[j].abs() > DUAL_TOL => -d[j].signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = d[j].abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// Longest step keeping the basics feasible (phase 2), or not increasing
    /// any basic's infeasibility past its nearest violated bound (phase 1).
    ///
    /// Returns the step and, unless the entering variable flips bounds, the
    /// leaving row and whether it leaves at its upper bound.
    fn ratio_test(&self, q: usize, dir: f64, w: &[f64], phase_one: bool, bland: bool) -> (f64, Option<(usize, bool)>) {
        let mut best = f64::INFINITY;
        let mut leave: Option<(usize, bool)> = None;
        if self.lo[q].is_finite() && self.hi[q].is_finite() {
            best = self.hi[q] - self.lo[q];
        }
        for (pos, &wr) in w.iter().enumerate() {
            if wr.abs() <= ZERO_PIVOT {
                continue;
            }
            let j = self.basic[pos];
            let v = self.x[j];
            let rate = -dir * wr;
            let (lo, hi) = (self.lo[j], self.hi[j]);
            let below = phase_one && v < lo - PRIMAL_TOL;
            let above = phase_one && v > hi + PRIMAL_TOL;
            let candidate = if rate > 0.0 {
                if below {
                    Some(((lo - v) / rate, false))
                } else if above || !hi.is_finite() {
                    None
                } else {
                    Some((((hi - v) / rate).max(0.0), true))
                }
            } else if above {
                Some(((v - hi) / -rate, true))
            } else if below || !lo.is_finite() {
                None
            } else {
                Some((((v - lo) / -rate).max(0.0), false))
            };
            let Some((ratio, to_upper)) = candidate else {
                continue;
            };
            let take = if ratio < best - RATIO_TIE {
                true
            } else if ratio <= best + RATIO_TIE {
                match leave {
                    Some((cur, _)) if bland => j < self.basic[cur],
                    Some((cur, _)) => wr.abs() > w[cur].abs(),
                    None => false,
                }
            } else {
                false
            };
            if take {
                best = best.min(ratio);
                leave = Some((pos, to_upper));
            }
        }
        (best, leave)
    }

    fn pivot_inverse(&mut self, pos: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[pos];
        let (head, rest) = self.binv.split_at_mut(pos * m);
        let (prow, tail) = rest.split_at_mut(m);
        prow.iter_mut().for_each(|v| *v /= piv);
        for (r, row) in head.chunks_mut(m).enumerate() {
            let f = w[r];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(a, b)| *a -= f * b);
            }
        }
        for (k, row) in tail.chunks_mut(m).enumerate() {
            let f = w[pos + 1 + k];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(a, b)| *a -= f * b);
            }
        }
        self.since_refactor += 1;
    }

    fn finish(&mut self, status: LpStatus, y: &[f64]) -> LpSolution {
        let point = self.x[..self.n].to_vec();
        let objective = point.iter().zip(self.lp.objective).map(|(x, c)| x * c).sum();
        let at_upper = self.state.iter().map(|s| *s == VarState::AtUpper).collect();
        LpSolution {
            status,
            point,
            objective,
            duals: y.iter().zip(&self.scale).map(|(y, s)| y / s).collect(),
            basis: Some(Basis { basic: self.basic.clone(), at_upper }),
            pivots: self.pivots,
        }
    }
}
