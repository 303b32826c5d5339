//! Mixed-integer master problems: a dense model, its LP relaxation, and
//! best-bound branch-and-bound over the integer columns.

mod simplex;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use simplex::{solve_lp as solve_lp_view, Basis, LpSession, LpSolution, LpStatus, LpView};

use crate::error::{invalid, Result, ScpError};
use crate::layout::{Sense, VariableLayout};
use crate::oracle::Cut;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min cᵀx` over dense rows, column bounds and integrality marks.
///
/// Epigraph models built by [`MasterModel::epigraph`] carry an extra last
/// column `η` that cuts push up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterModel {
    columns: Vec<Column>,
    objective: Vec<f64>,
    rows: Vec<Row>,
    eta: Option<usize>,
}

impl MasterModel {
    pub fn new(columns: Vec<Column>, objective: Vec<f64>) -> Result<Self> {
        if columns.len() != objective.len() {
            return Err(invalid("objective length differs from column count"));
        }
        for c in &columns {
            if c.lower.is_nan() || c.upper.is_nan() || c.lower > c.upper {
                return Err(invalid(format!("column {} has invalid bounds", c.name)));
            }
            if c.integer && !(c.lower.is_finite() && c.upper.is_finite()) {
                return Err(invalid(format!("integer column {} must be bounded", c.name)));
            }
        }
        Ok(Self { columns, objective, rows: Vec::new(), eta: None })
    }

    /// `min η` over `z ∥ θ ∥ η` with the layout's bounds and static rows and `η ∈ [lb, eta_upper]`.
    pub fn epigraph(layout: &VariableLayout, lb: f64, eta_upper: f64) -> Result<Self> {
        if !lb.is_finite() || !eta_upper.is_finite() || lb > eta_upper {
            return Err(invalid("epigraph bounds must be finite with lb <= upper"));
        }
        let mut columns = Vec::with_capacity(layout.dim() + 1);
        for (i, b) in layout.integer_domain().iter().enumerate() {
            columns.push(Column { name: format!("z{i}"), lower: b.lo as f64, upper: b.hi as f64, integer: true });
        }
        for (i, b) in layout.continuous_domain().iter().enumerate() {
            columns.push(Column { name: format!("t{i}"), lower: b.lo, upper: b.hi, integer: false });
        }
        columns.push(Column { name: "eta".into(), lower: lb, upper: eta_upper, integer: false });
        let eta = columns.len() - 1;
        let mut objective = vec![0.0; columns.len()];
        objective[eta] = 1.0;
        let mut model = Self::new(columns, objective)?;
        model.eta = Some(eta);
        for (j, c) in layout.constraints().iter().enumerate() {
            let mut coeffs = c.coeffs.clone();
            coeffs.push(0.0);
            model.add_row(format!("s{j}"), coeffs, c.sense, c.rhs)?;
        }
        Ok(model)
    }

    pub fn add_row(&mut self, name: String, coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Result<()> {
        if coeffs.len() != self.columns.len() {
            return Err(invalid(format!(
                "row {name} has {} coefficients, expected {}",
                coeffs.len(),
                self.columns.len()
            )));
        }
        if !rhs.is_finite() || coeffs.iter().any(|a| !a.is_finite()) {
            return Err(invalid(format!("row {name} has non-finite data")));
        }
        self.rows.push(Row { name, coeffs, sense, rhs });
        Ok(())
    }

    /// Adds `η − gᵀx ≥ v − gᵀa` for the cut `η ≥ v + gᵀ(x − a)`.
    pub fn append_cut(&mut self, cut: &Cut) -> Result<()> {
        let eta = self.eta.ok_or_else(|| invalid("model has no epigraph column"))?;
        if cut.dim() != eta {
            return Err(invalid(format!("cut has dimension {}, model expects {eta}", cut.dim())));
        }
        if !cut.value.is_finite() || cut.gradient.iter().chain(&cut.anchor).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite cut data"));
        }
        let mut coeffs: Vec<f64> = cut.gradient.iter().map(|g| -g).collect();
        coeffs.push(1.0);
        let name = format!("cut{}", self.rows.len());
        self.add_row(name, coeffs, Sense::Ge, cut.intercept())
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn eta_column(&self) -> Option<usize> {
        self.eta
    }

    pub fn set_column_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.columns[j].lower = lower;
        self.columns[j].upper = upper;
    }

    pub fn objective_at(&self, point: &[f64]) -> f64 {
        self.objective.iter().zip(point).map(|(c, x)| c * x).sum()
    }

    /// Largest row violation at `point`, scaled by `1 + |rhs| + ‖row‖∞·‖x‖∞`.
    pub fn max_scaled_row_violation(&self, point: &[f64]) -> f64 {
        let xmax = point.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.rows
            .iter()
            .map(|r| {
                let lhs: f64 = r.coeffs.iter().zip(point).map(|(a, x)| a * x).sum();
                let v = match r.sense {
                    Sense::Le => lhs - r.rhs,
                    Sense::Ge => r.rhs - lhs,
                    Sense::Eq => (lhs - r.rhs).abs(),
                };
                let amax = r.coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()));
                v.max(0.0) / (1.0 + r.rhs.abs() + amax * xmax)
            })
            .fold(0.0, f64::max)
    }

    fn is_feasible(&self, point: &[f64], int_tol: f64) -> bool {
        point.len() == self.columns.len()
            && self.columns.iter().zip(point).all(|(c, &x)| {
                x >= c.lower - 1e-9 && x <= c.upper + 1e-9 && (!c.integer || (x - x.round()).abs() <= int_tol)
            })
            && self.max_scaled_row_violation(point) <= 1e-9
    }

    /// Solves the LP relaxation.
    pub fn solve_lp(&self, start: Option<&Basis>) -> Result<LpSolution> {
        let lower: Vec<f64> = self.columns.iter().map(|c| c.lower).collect();
        let upper: Vec<f64> = self.columns.iter().map(|c| c.upper).collect();
        self.solve_lp_with_bounds(&lower, &upper, start)
    }

    fn solve_lp_with_bounds(&self, lower: &[f64], upper: &[f64], start: Option<&Basis>) -> Result<LpSolution> {
        let coeffs: Vec<Vec<f64>> = self.rows.iter().map(|r| r.coeffs.clone()).collect();
        self.solve_lp_rows(&coeffs, lower, upper, start)
    }

    fn solve_lp_rows(
        &self,
        coeffs: &[Vec<f64>],
        lower: &[f64],
        upper: &[f64],
        start: Option<&Basis>,
    ) -> Result<LpSolution> {
        let senses: Vec<Sense> = self.rows.iter().map(|r| r.sense).collect();
        let rhs: Vec<f64> = self.rows.iter().map(|r| r.rhs).collect();
        solve_lp_view(
            LpView { objective: &self.objective, rows: coeffs, senses: &senses, rhs: &rhs, lower, upper },
            start,
        )
    }

    /// Branch-and-bound with best-bound node selection and most-fractional branching.
    pub fn solve_milp(&self, opts: &MilpOptions) -> Result<MilpSolution> {
        branch_and_bound(self, opts)
    }

    /// Plain-text listing: objective, one row per line, then bounds. Diagnostic only.
    pub fn write_listing(&self, mut out: impl Write) -> std::io::Result<()> {
        let term = |coeffs: &[f64]| {
            let mut s = String::new();
            for (a, c) in coeffs.iter().zip(&self.columns) {
                if *a != 0.0 {
                    let _ = write!(s, " {a:+} {}", c.name);
                }
            }
            if s.is_empty() {
                s.push_str(" 0");
            }
            s
        };
        writeln!(out, "minimize:{}", term(&self.objective))?;
        for r in &self.rows {
            writeln!(out, "{}:{} {} {}", r.name, term(&r.coeffs), r.sense.symbol(), r.rhs)?;
        }
        for c in &self.columns {
            let kind = if c.integer { "int" } else { "real" };
            writeln!(out, "bound {}: {} <= {} <= {} {kind}", c.name, c.lower, c.name, c.upper)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub int_tol: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub node_limit: usize,
    /// Starting basis for the root relaxation.
    pub root_basis: Option<Basis>,
    /// Candidate feasible points (all columns) used as initial incumbents.
    pub hints: Vec<Vec<f64>>,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self { int_tol: 1e-6, abs_gap: 1e-9, rel_gap: 1e-9, node_limit: 1_000_000, root_basis: None, hints: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Integer columns are rounded to exact integers.
    pub point: Vec<f64>,
    pub objective: f64,
    /// Proven lower bound on the optimum; below `objective` by at most the gap tolerance.
    pub bound: f64,
    pub nodes: usize,
    /// Global lower bound (over all open nodes) each time a node is processed.
    pub bound_trace: Vec<f64>,
    pub root_basis: Option<Basis>,
}

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(self.depth.cmp(&other.depth)).then(other.seq.cmp(&self.seq))
    }
}

fn branch_and_bound(model: &MasterModel, opts: &MilpOptions) -> Result<MilpSolution> {
    let n = model.columns.len();
    let integer: Vec<usize> = (0..n).filter(|&j| model.columns[j].integer).collect();
    let coeffs: Vec<Vec<f64>> = model.rows.iter().map(|r| r.coeffs.clone()).collect();
    let lower: Vec<f64> = model.columns.iter().map(|c| c.lower).collect();
    let upper: Vec<f64> = model.columns.iter().map(|c| c.upper).collect();

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    for hint in &opts.hints {
        if model.is_feasible(hint, opts.int_tol) {
            let mut p = hint.clone();
            for &j in &integer {
                p[j] = p[j].round();
            }
            let obj = model.objective_at(&p);
            if incumbent.as_ref().is_none_or(|(_, best)| obj < *best) {
                incumbent = Some((p, obj));
            }
        }
    }
    let cutoff = |inc: &Option<(Vec<f64>, f64)>| {
        inc.as_ref().map_or(f64::INFINITY, |(_, v)| v - (opts.abs_gap + opts.rel_gap * v.abs()))
    };

    let senses: Vec<Sense> = model.rows.iter().map(|r| r.sense).collect();
    let rhs: Vec<f64> = model.rows.iter().map(|r| r.rhs).collect();
    let mut session = LpSession::new(LpView {
        objective: &model.objective,
        rows: &coeffs,
        senses: &senses,
        rhs: &rhs,
        lower: &lower,
        upper: &upper,
    })?;

    let mut heap = BinaryHeap::new();
    // After branching, the child on the rounding side is solved next, straight
    // from its parent's final basis; its sibling goes to the queue.
    let mut dive =
        Some(Node { bound: f64::NEG_INFINITY, depth: 0, seq: 0, lower: lower.clone(), upper: upper.clone() });
    let mut seq = 1;
    let mut nodes = 0usize;
    let mut bound_trace = Vec::new();
    let mut root_basis = None;
    let mut closing_bound = f64::INFINITY;

    loop {
        let (node, dived) = match dive.take() {
            Some(d) => (d, true),
            None => match heap.pop() {
                Some(h) => (h, false),
                None => break,
            },
        };
        if node.bound >= cutoff(&incumbent) {
            // The queue is ordered by bound, so nothing left in it can improve.
            closing_bound = closing_bound.min(node.bound);
            if dived {
                continue;
            }
            break;
        }
        bound_trace.push(heap.peek().map_or(node.bound, |h| h.bound.min(node.bound)));
        nodes += 1;
        if nodes > opts.node_limit {
            return Err(ScpError::ResourceExhausted(format!("branch-and-bound exceeded {} nodes", opts.node_limit)));
        }
        let start = if node.depth == 0 { opts.root_basis.as_ref() } else { None };
        let lp = session.solve(&node.lower, &node.upper, start)?;
        if node.depth == 0 {
            root_basis = lp.basis.clone();
        }
        match lp.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Ok(MilpSolution {
                    status: MilpStatus::Unbounded,
                    point: lp.point,
                    objective: f64::NEG_INFINITY,
                    bound: f64::NEG_INFINITY,
                    nodes,
                    bound_trace,
                    root_basis,
                })
            }
            LpStatus::Optimal => {}
        }
        let bound = lp.objective.max(node.bound);
        if bound >= cutoff(&incumbent) {
            // Pruned within the gap: the optimum may still sit below the incumbent here.
            closing_bound = closing_bound.min(bound);
            continue;
        }

        let mut branch: Option<(usize, f64)> = None;
        for &j in &integer {
            let x = lp.point[j];
            let frac = x - x.floor();
            let dist = frac.min(1.0 - frac);
            if dist > opts.int_tol && branch.is_none_or(|(_, d)| dist > d) {
                branch = Some((j, dist));
            }
        }

        match branch {
            None => {
                let mut p = lp.point.clone();
                for &j in &integer {
                    p[j] = p[j].round();
                }
                let obj = model.objective_at(&p);
                if incumbent.as_ref().is_none_or(|(_, best)| obj < *best) {
                    incumbent = Some((p, obj));
                }
            }
            Some((j, _)) => {
                let x = lp.point[j];
                let mut down_hi = node.upper.clone();
                down_hi[j] = x.floor();
                let mut up_lo = node.lower.clone();
                up_lo[j] = x.ceil();
                let down = Node { bound, depth: node.depth + 1, seq, lower: node.lower, upper: down_hi };
                let up = Node { bound, depth: node.depth + 1, seq: seq + 1, lower: up_lo, upper: node.upper };
                seq += 2;
                let (first, second) = if x - x.floor() >= 0.5 { (up, down) } else { (down, up) };
                dive = Some(first);
                heap.push(second);
            }
        }
    }

    Ok(match incumbent {
        Some((point, objective)) => MilpSolution {
            status: MilpStatus::Optimal,
            point,
            objective,
            bound: objective.min(closing_bound),
            nodes,
            bound_trace,
            root_basis,
        },
        None => MilpSolution {
            status: MilpStatus::Infeasible,
            point: Vec::new(),
            objective: f64::INFINITY,
            bound: f64::INFINITY,
            nodes,
            bound_trace,
            root_basis,
        },
    })
}

/// Extends a basis from a model with fewer rows by making the new rows' logicals basic.
pub fn extend_basis(basis: &Basis, columns: usize, rows: usize) -> Option<Basis> {
    let old_rows = basis.basic.len();
    if rows < old_rows || basis.at_upper.len() != columns + old_rows {
        return None;
    }
    let mut b = basis.clone();
    b.basic.extend(columns + old_rows..columns + rows);
    b.at_upper.resize(columns + rows, false);
    Some(b)
}
