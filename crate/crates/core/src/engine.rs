//! The cutting-plane loop, in full-data and subsampled variants.
//!
//! Each iteration evaluates the oracle at the incumbent on the current
//! sample, stops if the master's `η` already covers that value within `ε`,
//! and otherwise adds the tangent cut and re-solves the master. The
//! subsampled variant draws a fresh subset before every evaluation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ScpError};
use crate::layout::{evaluate_incumbent_feasibility, VariableLayout};
use crate::milp::{extend_basis, Basis, MasterModel, MilpOptions, MilpStatus};
use crate::oracle::{dot, Cut, SampledOracle};
use crate::qp::QpMaster;
use crate::sampling::{derive_seed, sample_without_replacement, NSchedule, SubsetSample};

/// Static constraints count as satisfied up to this violation.
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Every evaluation uses all `N` points.
    Full,
    /// Every evaluation uses a fresh subset drawn by the schedule.
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub mode: Mode,
    pub n_schedule: NSchedule,
    pub epsilon: f64,
    /// Lower bound for `η`; the oracle's own bound when `None`.
    pub lb: Option<f64>,
    pub max_iterations: usize,
    pub seed: u64,
    /// Optimality gap left to each master solve, as a fraction of `epsilon`.
    pub master_gap: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Full,
            n_schedule: NSchedule::SqrtTen,
            epsilon: 1e-4,
            lb: None,
            max_iterations: 500,
            seed: 0,
            master_gap: 0.5,
        }
    }
}

impl EngineConfig {
    pub fn full(epsilon: f64) -> Self {
        Self { epsilon, ..Self::default() }
    }

    pub fn stochastic(epsilon: f64, seed: u64) -> Self {
        Self { mode: Mode::Stochastic, epsilon, seed, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon must be positive and finite"));
        }
        if !(0.0..1.0).contains(&self.master_gap) {
            return Err(invalid("master_gap must lie in [0, 1)"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if let Some(lb) = self.lb {
            if !lb.is_finite() {
                return Err(invalid("lower bound must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Optimal,
    IterationCap,
    Infeasible,
}

/// One pass through the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Seed of the sample the oracle was evaluated on; `None` for the full set.
    pub sample_seed: Option<u64>,
    pub sample_size: usize,
    /// Master value `η_t` going into this iteration (`lb` on the first).
    pub eta: f64,
    pub oracle_value: f64,
    /// Time spent in the master solve that followed; zero on the last iteration.
    pub master_seconds: f64,
    pub oracle_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    /// `z* ∥ θ*`; empty when the master was infeasible on the first solve.
    pub solution: Vec<f64>,
    pub p1: usize,
    pub eta: f64,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    /// `f(z*, θ*; [N])`, evaluated once after the loop.
    pub full_objective: f64,
    pub cuts: Vec<Cut>,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn z(&self) -> &[f64] {
        &self.solution[..self.p1.min(self.solution.len())]
    }

    pub fn theta(&self) -> &[f64] {
        &self.solution[self.p1.min(self.solution.len())..]
    }

    pub fn master_seconds(&self) -> f64 {
        self.trace.iter().map(|r| r.master_seconds).sum()
    }

    pub fn oracle_seconds(&self) -> f64 {
        self.trace.iter().map(|r| r.oracle_seconds).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MasterOutcome {
    /// `eta` is a lower bound on the master optimum, and `point`'s master
    /// value exceeds it by at most the requested gap.
    Optimal {
        point: Vec<f64>,
        eta: f64,
    },
    Infeasible,
}

/// Solves `min η` (plus any regularizer the solver owns) over the cuts so far.
///
/// Implementations may keep state between calls; `cuts` only ever grows
/// within a run. `gap` is the absolute suboptimality the solve may leave.
pub trait MasterSolver {
    fn solve(
        &mut self,
        layout: &VariableLayout,
        cuts: &[Cut],
        lb: f64,
        eta_upper: f64,
        gap: f64,
    ) -> Result<MasterOutcome>;

    /// Ranks incumbents when the iteration cap is hit; lower is better.
    fn score(&self, _point: &[f64], oracle_value: f64) -> f64 {
        oracle_value
    }
}

/// Mixed-integer master solved by branch-and-bound, re-solved each
/// iteration from the previous root basis.
#[derive(Debug, Clone, Default)]
pub struct MilpMaster {
    model: Option<MasterModel>,
    synced: usize,
    basis: Option<Basis>,
    options: MilpOptions,
    /// Largest bound returned so far. Cuts only accumulate, so every earlier
    /// bound still bounds the current master optimum.
    floor: Option<f64>,
    /// Nodes explored by the most recent solve.
    pub last_nodes: usize,
}

impl MilpMaster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_options(options: MilpOptions) -> Self {
        Self { options, ..Self::default() }
    }

    pub fn model(&self) -> Option<&MasterModel> {
        self.model.as_ref()
    }
}

impl MasterSolver for MilpMaster {
    fn solve(
        &mut self,
        layout: &VariableLayout,
        cuts: &[Cut],
        lb: f64,
        eta_upper: f64,
        gap: f64,
    ) -> Result<MasterOutcome> {
        if cuts.len() < self.synced {
            return Err(invalid("cut pool shrank between master solves"));
        }
        let model = match self.model.as_mut() {
            Some(m) => m,
            None => self.model.insert(MasterModel::epigraph(layout, lb, eta_upper)?),
        };
        let eta = model.eta_column().expect("epigraph model");
        model.set_column_bounds(eta, lb, eta_upper);
        for cut in &cuts[self.synced..] {
            model.append_cut(cut)?;
        }
        self.synced = cuts.len();

        // Every anchor is feasible for the static rows, so it seeds an incumbent.
        let hints = cuts
            .iter()
            .filter_map(|c| {
                let level = cuts.iter().map(|d| d.value_at(&c.anchor)).fold(lb, f64::max);
                (level <= eta_upper).then(|| {
                    let mut p = c.anchor.clone();
                    p.push(level);
                    p
                })
            })
            .collect();
        let opts = MilpOptions {
            root_basis: self.basis.as_ref().and_then(|b| extend_basis(b, model.columns().len(), model.rows().len())),
            hints,
            abs_gap: self.options.abs_gap.max(gap),
            ..self.options.clone()
        };
        let sol = model.solve_milp(&opts)?;
        self.last_nodes = sol.nodes;
        log::debug!("master: {} cuts, {} nodes", cuts.len(), sol.nodes);
        if sol.root_basis.is_some() {
            self.basis = sol.root_basis;
        }
        match sol.status {
            MilpStatus::Optimal => {
                let mut point = sol.point;
                point.pop().expect("eta column");
                let eta = self.floor.map_or(sol.bound, |f| f.max(sol.bound)).max(lb);
                self.floor = Some(eta);
                Ok(MasterOutcome::Optimal { point, eta })
            }
            MilpStatus::Infeasible => Ok(MasterOutcome::Infeasible),
            MilpStatus::Unbounded => {
                Err(ScpError::NumericFailure("master reported unbounded despite finite bounds".into()))
            }
        }
    }
}

/// One-slack SVM master `min ½‖θ‖² + C·ξ`; cuts on the risk become
/// `ξ ≥ b − aᵀθ` with `a = −g` and `b = v − gᵀθ₀`.
#[derive(Debug, Clone)]
pub struct QpMasterSolver {
    master: Option<QpMaster>,
    c: f64,
    synced: usize,
    /// False if any solve so far hit the sweep cap.
    pub all_converged: bool,
}

impl QpMasterSolver {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("C must be positive and finite"));
        }
        Ok(Self { master: None, c, synced: 0, all_converged: true })
    }
}

impl MasterSolver for QpMasterSolver {
    fn solve(
        &mut self,
        layout: &VariableLayout,
        cuts: &[Cut],
        _lb: f64,
        _eta_upper: f64,
        _gap: f64,
    ) -> Result<MasterOutcome> {
        if layout.p1() != 0 {
            return Err(ScpError::UnsupportedProblem("the quadratic master handles continuous-only layouts".into()));
        }
        let c = self.c;
        let master = match self.master.as_mut() {
            Some(m) => m,
            None => self.master.insert(QpMaster::new(layout.p2(), c)?),
        };
        for cut in &cuts[self.synced..] {
            let a = cut.gradient.iter().map(|g| -g).collect();
            master.add_cut(a, cut.intercept())?;
        }
        self.synced = cuts.len();
        let sol = master.solve();
        if !sol.converged {
            self.all_converged = false;
            log::warn!("quadratic master stopped after {} sweeps with residual {:e}", sol.sweeps, sol.kkt_residual);
        }
        Ok(MasterOutcome::Optimal { point: sol.theta, eta: sol.xi })
    }

    fn score(&self, point: &[f64], oracle_value: f64) -> f64 {
        0.5 * dot(point, point) + self.c * oracle_value
    }
}

/// Minimizes over `θ` with `z` fixed on `sample`. Layouts without
/// continuous variables return the empty vector.
pub fn solve_nlp_subproblem(
    oracle: &dyn SampledOracle,
    z: &[f64],
    sample: &SubsetSample,
    layout: &VariableLayout,
) -> Result<Vec<f64>> {
    if z.len() != layout.p1() {
        return Err(invalid(format!("integer part has {} entries, layout expects {}", z.len(), layout.p1())));
    }
    if layout.p2() == 0 {
        return Ok(Vec::new());
    }
    let theta = oracle.solve_subproblem(z, sample).ok_or_else(|| {
        ScpError::UnsupportedProblem("problem has continuous variables but no subproblem solver".into())
    })??;
    if theta.len() != layout.p2() {
        return Err(invalid(format!("subproblem returned {} values, layout expects {}", theta.len(), layout.p2())));
    }
    Ok(theta)
}

fn draw(config: &EngineConfig, population: usize, iteration: usize) -> Result<SubsetSample> {
    match config.mode {
        Mode::Full => Ok(SubsetSample::full(population).tagged(iteration)),
        Mode::Stochastic => {
            let n = config.n_schedule.size(population);
            let seed = derive_seed(config.seed, iteration as u64);
            Ok(sample_without_replacement(population, n, seed)?.tagged(iteration))
        }
    }
}

/// Runs the cutting-plane loop until the termination guard holds, the
/// master becomes infeasible, or `max_iterations` oracle evaluations pass.
pub fn run_cutting_planes(
    oracle: &dyn SampledOracle,
    layout: &VariableLayout,
    config: &EngineConfig,
    master: &mut dyn MasterSolver,
) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let population = oracle.population();
    if population == 0 {
        return Err(invalid("oracle has no data"));
    }
    if layout.dim() != oracle.layout().dim() {
        return Err(invalid(format!(
            "layout has {} variables, oracle expects {}",
            layout.dim(),
            oracle.layout().dim()
        )));
    }
    let lb = config.lb.unwrap_or_else(|| oracle.lower_bound());
    let (p1, p2) = (layout.p1(), layout.p2());

    let mut sample = draw(config, population, 1)?;
    let mut point = oracle.warm_start(&sample)?;
    if point.len() != layout.dim() {
        return Err(invalid("warm start has the wrong dimension"));
    }
    let mut eta = lb;
    let mut cuts: Vec<Cut> = Vec::new();
    let mut trace: Vec<IterationRecord> = Vec::new();
    // (score, point, eta) of the best evaluated incumbent.
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut status = RunStatus::IterationCap;

    for _ in 0..config.max_iterations {
        let t0 = Instant::now();
        let (value, gradient) = oracle.evaluate(&point, &sample)?;
        let oracle_seconds = t0.elapsed().as_secs_f64();
        if !value.is_finite() {
            return Err(ScpError::NumericFailure("oracle returned a non-finite value".into()));
        }
        trace.push(IterationRecord {
            sample_seed: (!sample.is_full()).then(|| sample.seed()),
            sample_size: sample.len(),
            eta,
            oracle_value: value,
            master_seconds: 0.0,
            oracle_seconds,
        });

        let violation = evaluate_incumbent_feasibility(&point, layout);
        if violation <= FEASIBILITY_TOL {
            let score = master.score(&point, value);
            if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                best = Some((score, point.clone(), eta));
            }
            if eta >= value - config.epsilon {
                status = RunStatus::Optimal;
                best = Some((score, point.clone(), eta));
                break;
            }
        }

        cuts.push(Cut::new(point.clone(), value, gradient, sample.id())?);
        // The first anchor is feasible, so max(lb, cuts at it) bounds the master optimum.
        let reference = &cuts[0].anchor;
        let eta_upper = cuts.iter().map(|c| c.value_at(reference)).fold(lb, f64::max) + 1.0;

        let t0 = Instant::now();
        let outcome = master.solve(layout, &cuts, lb, eta_upper, config.master_gap * config.epsilon)?;
        trace.last_mut().expect("record pushed above").master_seconds = t0.elapsed().as_secs_f64();
        log::debug!(
            "iteration {}: value {:.6e}, eta {:.6e}, master {:.3}s",
            trace.len(),
            value,
            eta,
            trace.last().map_or(0.0, |r| r.master_seconds)
        );
        let (next, next_eta) = match outcome {
            MasterOutcome::Optimal { point, eta } => (point, eta),
            MasterOutcome::Infeasible => {
                status = RunStatus::Infeasible;
                break;
            }
        };

        sample = draw(config, population, trace.len() + 1)?;
        point = if p1 > 0 && p2 > 0 {
            let mut z = next[..p1].to_vec();
            z.extend(solve_nlp_subproblem(oracle, &next[..p1], &sample, layout)?);
            z
        } else {
            next
        };
        eta = next_eta;
    }

    let (solution, eta, full_objective) = match (status, best) {
        (RunStatus::Infeasible, _) | (_, None) => (Vec::new(), f64::NAN, f64::NAN),
        (_, Some((_, point, eta))) => {
            let full = oracle.value(&point, &SubsetSample::full(population))?;
            (point, eta, full)
        }
    };
    Ok(RunReport {
        status,
        solution,
        p1,
        eta,
        iterations: trace.len(),
        trace,
        full_objective,
        cuts,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}
