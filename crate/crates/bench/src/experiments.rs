//! Benchmark cells: one generated instance solved by full and subsampled
//! cutting planes, with the metrics each table reports.

use std::path::Path;
use std::time::Instant;

use scpkit::datagen::{
    gen_sparse_regression, gen_sskp, load_covertype, mape, support_fingerprint, ResultRow, SparseRegGenSpec,
    SskpGenSpec,
};
use scpkit::engine::{run_cutting_planes, EngineConfig, MilpMaster, Mode, QpMasterSolver, RunReport, RunStatus};
use scpkit::milp::{MilpOptions, MilpStatus};
use scpkit::oracle::SampledOracle;
use scpkit::problems::sparse_reg::{fit_coefficients, predict, support_of};
use scpkit::problems::sskp::{sskp_full_objective, sskp_linear_reformulation};
use scpkit::problems::{SparseRegressionData, SparseRegressionOracle, SskpData, SskpOracle, SvmData, SvmOracle};
use scpkit::sampling::{NSchedule, SubsetSample};
use scpkit::Result;

/// Multipliers of the ridge-weight grid, relative to the mean squared column norm.
pub const GAMMA_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

/// Largest `k` solved by enumeration; above it the full-data cutting-plane
/// optimum serves as the reference.
pub const ENUMERATION_MAX_K: usize = 16;

/// Largest `N` for which the knapsack's linear reformulation is also solved.
pub const REFORMULATION_MAX_N: usize = 1_000;

/// SVM weight used throughout the SVM experiments.
pub const SVM_C: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaRule {
    /// Pick from [`GAMMA_GRID`] by validation error of the full-data solution.
    Validate,
    /// Absolute ridge weight.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeOutcome {
    pub mode: Mode,
    pub status: RunStatus,
    pub sample_size: usize,
    pub support: Vec<usize>,
    pub fingerprint: String,
    pub objective: f64,
    pub metric: f64,
    pub iterations: usize,
    pub oracle_seconds: f64,
    pub master_seconds: f64,
    pub total_seconds: f64,
}

impl ModeOutcome {
    fn from_report(mode: Mode, report: &RunReport, sample_size: usize, support: Vec<usize>, metric: f64) -> Self {
        Self {
            mode,
            status: report.status,
            sample_size,
            fingerprint: support_fingerprint(&support),
            support,
            objective: report.full_objective,
            metric,
            iterations: report.iterations,
            oracle_seconds: report.oracle_seconds(),
            master_seconds: report.master_seconds(),
            total_seconds: report.wall_seconds,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn to_row(
        &self,
        experiment: &str,
        family: &str,
        population: usize,
        dim: usize,
        sparsity: usize,
        sigma: f64,
        seed: u64,
        metric_name: &str,
    ) -> ResultRow {
        ResultRow {
            experiment: experiment.to_string(),
            family: family.to_string(),
            population,
            dim,
            sparsity,
            sigma,
            mode: mode_name(self.mode).to_string(),
            sample_size: self.sample_size,
            seed,
            oracle_seconds: self.oracle_seconds,
            master_seconds: self.master_seconds,
            total_seconds: self.total_seconds,
            iterations: self.iterations,
            objective: self.objective,
            metric_name: metric_name.to_string(),
            metric: self.metric,
            fingerprint: self.fingerprint.clone(),
        }
    }
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Full => "full",
        Mode::Stochastic => "stochastic",
    }
}

fn config(mode: Mode, schedule: NSchedule, epsilon: f64, seed: u64) -> EngineConfig {
    EngineConfig { mode, n_schedule: schedule, epsilon, seed, ..EngineConfig::default() }
}

fn sample_size(mode: Mode, schedule: NSchedule, population: usize) -> usize {
    match mode {
        Mode::Full => population,
        Mode::Stochastic => schedule.size(population),
    }
}

/// Solves one sparse-regression training set and scores it on `test`.
pub fn solve_sparse(
    train: &SparseRegressionData,
    test: &SparseRegressionData,
    mode: Mode,
    schedule: NSchedule,
    epsilon: f64,
    seed: u64,
) -> Result<ModeOutcome> {
    let oracle = SparseRegressionOracle::new(train.clone());
    let report =
        run_cutting_planes(&oracle, &oracle.layout(), &config(mode, schedule, epsilon, seed), &mut MilpMaster::new())?;
    let support = support_of(report.z());
    let beta = fit_coefficients(train, &support)?;
    let metric = mape(&predict(&test.x, &beta), &test.y)?;
    Ok(ModeOutcome::from_report(mode, &report, sample_size(mode, schedule, train.n()), support, metric))
}

/// `‖X‖_F² / p`, the scale the ridge grid is expressed in.
pub fn design_scale(data: &SparseRegressionData) -> f64 {
    let s: f64 = data.x.as_slice().iter().map(|v| v * v).sum();
    s / data.p() as f64
}

/// The grid weight whose full-data support has the lowest validation error.
pub fn select_gamma(train: &SparseRegressionData, validation: &SparseRegressionData, epsilon: f64) -> Result<f64> {
    let scale = design_scale(train);
    let mut best = (f64::INFINITY, GAMMA_GRID[0] / scale);
    for mult in GAMMA_GRID {
        let gamma = mult / scale;
        let data = train.with_gamma(gamma)?;
        let oracle = SparseRegressionOracle::new(data.clone());
        let report =
            run_cutting_planes(&oracle, &oracle.layout(), &EngineConfig::full(epsilon), &mut MilpMaster::new())?;
        let beta = fit_coefficients(&data, &support_of(report.z()))?;
        let pred = predict(&validation.x, &beta);
        let mse = pred.iter().zip(&validation.y).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / pred.len() as f64;
        if mse < best.0 {
            best = (mse, gamma);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCell {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub sigma: f64,
    pub seed: u64,
    pub epsilon: f64,
    pub gamma: GammaRule,
    pub schedule: NSchedule,
}

impl SparseCell {
    pub fn new(n: usize, p: usize, k: usize, sigma: f64, seed: u64) -> Self {
        Self { n, p, k, sigma, seed, epsilon: 1e-4, gamma: GammaRule::Validate, schedule: NSchedule::SqrtTen }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCellResult {
    pub gamma: f64,
    pub true_support: Vec<usize>,
    pub full: ModeOutcome,
    pub scp: ModeOutcome,
}

/// Full and subsampled cutting planes on the same generated data.
pub fn run_sparse_cell(cell: &SparseCell) -> Result<SparseCellResult> {
    let inst = gen_sparse_regression(&SparseRegGenSpec::new(cell.n, cell.p, cell.k, cell.sigma, cell.seed))?;
    let gamma = match cell.gamma {
        GammaRule::Validate => select_gamma(&inst.train, &inst.validation, cell.epsilon)?,
        GammaRule::Fixed(g) => g,
    };
    let train = inst.train.with_gamma(gamma)?;
    let full = solve_sparse(&train, &inst.test, Mode::Full, cell.schedule, cell.epsilon, cell.seed)?;
    let scp = solve_sparse(&train, &inst.test, Mode::Stochastic, cell.schedule, cell.epsilon, cell.seed)?;
    Ok(SparseCellResult { gamma, true_support: inst.support, full, scp })
}

/// The best knapsack value over all `2^k` selections.
///
/// Selections are visited in Gray-code order, so each step moves one item in
/// or out and updates every scenario load in `O(N)`.
pub fn sskp_enumerate(data: &SskpData) -> (f64, Vec<f64>) {
    let (k, n) = (data.k(), data.n());
    let mut loads = vec![0.0; n];
    let mut z = vec![0.0; k];
    let mut reward = 0.0;
    let scale = data.c / n as f64;
    let objective =
        |reward: f64, loads: &[f64]| reward - scale * loads.iter().map(|l| (l - data.q).max(0.0)).sum::<f64>();
    let mut best = (objective(0.0, &loads), z.clone());
    for step in 1u64..1 << k {
        let i = step.trailing_zeros() as usize;
        let sign = if z[i] == 0.0 { 1.0 } else { -1.0 };
        z[i] = if sign > 0.0 { 1.0 } else { 0.0 };
        reward += sign * data.r[i];
        for (j, l) in loads.iter_mut().enumerate() {
            *l += sign * data.w.get(j, i);
        }
        let v = objective(reward, &loads);
        if v > best.0 {
            best = (v, z.clone());
        }
    }
    // Report the winner's value from a fresh sum rather than the running one.
    let value = sskp_full_objective(data, &best.1, &SubsetSample::full(n)).expect("dimensions match");
    (value, best.1)
}

/// Ratio of a knapsack value to the optimum; an optimum of zero counts
/// any non-negative value as fully optimal.
pub fn normalized_objective(value: f64, optimum: f64) -> f64 {
    if optimum > 0.0 {
        value / optimum
    } else if value >= optimum - 1e-9 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SskpCellResult {
    pub optimum: f64,
    pub optimum_by_enumeration: bool,
    pub full: ModeOutcome,
    pub scp: ModeOutcome,
    /// `(value, seconds)` of the linear reformulation when `N` is small enough.
    pub reformulation: Option<(f64, f64)>,
}

pub fn solve_sskp(
    data: &SskpData,
    mode: Mode,
    schedule: NSchedule,
    epsilon: f64,
    seed: u64,
) -> Result<(ModeOutcome, f64)> {
    let oracle = SskpOracle::new(data.clone());
    let report =
        run_cutting_planes(&oracle, &oracle.layout(), &config(mode, schedule, epsilon, seed), &mut MilpMaster::new())?;
    let value = -report.full_objective;
    let support = support_of(report.z());
    let mut out = ModeOutcome::from_report(mode, &report, sample_size(mode, schedule, data.n()), support, f64::NAN);
    // Knapsack rows carry the maximized value, like the reference rows.
    out.objective = value;
    Ok((out, value))
}

/// Value and solve time of the knapsack's exact mixed-binary model.
pub fn solve_sskp_reformulation(data: &SskpData) -> Result<(f64, f64)> {
    let t0 = Instant::now();
    let model = sskp_linear_reformulation(data)?;
    let sol = model.solve_milp(&MilpOptions::default())?;
    if sol.status != MilpStatus::Optimal {
        return Err(scpkit::ScpError::NumericFailure("reformulation not solved to optimality".into()));
    }
    Ok((-sol.objective, t0.elapsed().as_secs_f64()))
}

pub fn run_sskp_cell(n: usize, k: usize, seed: u64, epsilon: f64, schedule: NSchedule) -> Result<SskpCellResult> {
    let data = gen_sskp(&SskpGenSpec::new(n, k, seed))?;
    let (mut full, full_value) = solve_sskp(&data, Mode::Full, schedule, epsilon, seed)?;
    let (mut scp, scp_value) = solve_sskp(&data, Mode::Stochastic, schedule, epsilon, seed)?;
    let (optimum, by_enum) = if k <= ENUMERATION_MAX_K { (sskp_enumerate(&data).0, true) } else { (full_value, false) };
    full.metric = normalized_objective(full_value, optimum);
    scp.metric = normalized_objective(scp_value, optimum);
    let reformulation = if n <= REFORMULATION_MAX_N { Some(solve_sskp_reformulation(&data)?) } else { None };
    Ok(SskpCellResult { optimum, optimum_by_enumeration: by_enum, full, scp, reformulation })
}

pub fn solve_svm(
    train: &SvmData,
    test: &SvmData,
    mode: Mode,
    schedule: NSchedule,
    epsilon: f64,
    seed: u64,
) -> Result<ModeOutcome> {
    let oracle = SvmOracle::new(train.clone());
    let mut master = QpMasterSolver::new(train.c)?;
    let report = run_cutting_planes(&oracle, &oracle.layout(), &config(mode, schedule, epsilon, seed), &mut master)?;
    let metric = test.accuracy(report.theta());
    let objective = 0.5 * report.theta().iter().map(|t| t * t).sum::<f64>() + train.c * report.full_objective;
    let mut out = ModeOutcome::from_report(mode, &report, sample_size(mode, schedule, train.n()), Vec::new(), metric);
    out.objective = objective;
    out.fingerprint = String::new();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmCellResult {
    pub rows_loaded: usize,
    pub full: ModeOutcome,
    pub scp: ModeOutcome,
}

pub fn run_svm_cell(path: &Path, n: usize, seed: u64, epsilon: f64, schedule: NSchedule) -> Result<SvmCellResult> {
    let split = load_covertype(path, seed, n, SVM_C)?;
    let full = solve_svm(&split.train, &split.test, Mode::Full, schedule, epsilon, seed)?;
    let scp = solve_svm(&split.train, &split.test, Mode::Stochastic, schedule, epsilon, seed)?;
    Ok(SvmCellResult { rows_loaded: split.rows_loaded, full, scp })
}

/// One sparse-regression instance solved once with full data and once per sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSweepResult {
    pub gamma: f64,
    pub full: ModeOutcome,
    pub scp: Vec<ModeOutcome>,
}

impl SparseSweepResult {
    /// Whether each subsampled run found the full-data support.
    pub fn agreement(&self) -> Vec<bool> {
        self.scp.iter().map(|o| o.support == self.full.support).collect()
    }
}

pub fn run_sparse_sweep(cell: &SparseCell, sizes: &[usize]) -> Result<SparseSweepResult> {
    let inst = gen_sparse_regression(&SparseRegGenSpec::new(cell.n, cell.p, cell.k, cell.sigma, cell.seed))?;
    let gamma = match cell.gamma {
        GammaRule::Validate => select_gamma(&inst.train, &inst.validation, cell.epsilon)?,
        GammaRule::Fixed(g) => g,
    };
    let train = inst.train.with_gamma(gamma)?;
    let full = solve_sparse(&train, &inst.test, Mode::Full, cell.schedule, cell.epsilon, cell.seed)?;
    let scp = sizes
        .iter()
        .map(|&n| solve_sparse(&train, &inst.test, Mode::Stochastic, NSchedule::Fixed(n), cell.epsilon, cell.seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SparseSweepResult { gamma, full, scp })
}

/// One knapsack instance: the reference optimum and one subsampled run per
/// sample size, each scored as a fraction of the optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct SskpSweepResult {
    pub optimum: f64,
    pub optimum_by_enumeration: bool,
    pub scp: Vec<ModeOutcome>,
}

pub fn run_sskp_sweep(n: usize, k: usize, seed: u64, epsilon: f64, sizes: &[usize]) -> Result<SskpSweepResult> {
    let data = gen_sskp(&SskpGenSpec::new(n, k, seed))?;
    let (optimum, by_enum) = sskp_reference(&data, epsilon, seed)?;
    let scp = sizes
        .iter()
        .map(|&m| {
            let (mut out, value) = solve_sskp(&data, Mode::Stochastic, NSchedule::Fixed(m), epsilon, seed)?;
            out.metric = normalized_objective(value, optimum);
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SskpSweepResult { optimum, optimum_by_enumeration: by_enum, scp })
}

/// Enumeration up to [`ENUMERATION_MAX_K`] items, the full-data cutting-plane optimum above.
pub fn sskp_reference(data: &SskpData, epsilon: f64, seed: u64) -> Result<(f64, bool)> {
    if data.k() <= ENUMERATION_MAX_K {
        Ok((sskp_enumerate(data).0, true))
    } else {
        let (_, value) = solve_sskp(data, Mode::Full, NSchedule::SqrtTen, epsilon, seed)?;
        Ok((value, false))
    }
}
