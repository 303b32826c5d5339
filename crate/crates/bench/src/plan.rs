//! Experiment grids and their execution over a bounded worker pool.

use std::collections::HashMap;
use std::path::PathBuf;

use rayon::prelude::*;

use scpkit::datagen::ResultRow;
use scpkit::engine::Mode;
use scpkit::sampling::NSchedule;
use scpkit::{Result, ScpError};

use crate::experiments::{
    mode_name, run_sparse_cell, run_sparse_sweep, run_sskp_cell, run_sskp_sweep, run_svm_cell, SparseCell,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    SparseReg,
    Svm,
    Sskp,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::SparseReg => "sparsereg",
            Family::Svm => "svm",
            Family::Sskp => "sskp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Table1,
    Table2,
    Table3,
    Sweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Table1 => "table1",
            Experiment::Table2 => "table2",
            Experiment::Table3 => "table3",
            Experiment::Sweep => "sweep",
        }
    }
}

/// One grid point. `dim` is `p` for regression and SVM, `k` for the knapsack.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub population: usize,
    pub dim: usize,
    /// Support size; regression only.
    pub sparsity: usize,
    pub sigma: f64,
    /// Fixed sample sizes to sweep; empty means the default schedule.
    pub sample_sizes: Vec<usize>,
}

impl GridCell {
    fn sparse(population: usize, p: usize, k: usize, sigma: f64) -> Self {
        Self { population, dim: p, sparsity: k, sigma, sample_sizes: Vec::new() }
    }

    fn sskp(population: usize, k: usize) -> Self {
        Self { population, dim: k, sparsity: 0, sigma: 0.0, sample_sizes: Vec::new() }
    }

    fn sweeping(mut self, sizes: &[usize]) -> Self {
        self.sample_sizes = sizes.iter().copied().filter(|&n| n <= self.population).collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub experiment: Experiment,
    pub family: Family,
    pub grid: Vec<GridCell>,
    pub repetitions: usize,
    /// Repetition `r` uses seed `base_seed + r`.
    pub base_seed: u64,
    pub epsilon: f64,
    /// Covertype file; SVM only.
    pub data_path: Option<PathBuf>,
}

impl ExperimentPlan {
    fn new(experiment: Experiment, family: Family, grid: Vec<GridCell>) -> Self {
        Self { experiment, family, grid, repetitions: 10, base_seed: 1, epsilon: 1e-4, data_path: None }
    }

    /// Sparse regression, full vs subsampled. The desk grid keeps the
    /// N, σ, p and k blocks at `N ≤ 10^5`, `p ≤ 100`, `k ≤ 10`.
    pub fn table1(full: bool) -> Self {
        let grid = if full {
            vec![
                GridCell::sparse(1_000, 100, 10, 0.1),
                GridCell::sparse(10_000, 100, 10, 0.1),
                GridCell::sparse(100_000, 100, 10, 0.1),
                GridCell::sparse(1_000_000, 100, 10, 0.1),
                GridCell::sparse(100_000, 1_000, 10, 0.1),
                GridCell::sparse(100_000, 10_000, 10, 0.1),
                GridCell::sparse(100_000, 100, 20, 0.1),
                GridCell::sparse(100_000, 100, 50, 0.1),
                GridCell::sparse(100_000, 100, 10, 0.2),
                GridCell::sparse(100_000, 100, 10, 0.3),
            ]
        } else {
            vec![
                GridCell::sparse(1_000, 50, 5, 0.1),
                GridCell::sparse(10_000, 50, 5, 0.1),
                GridCell::sparse(100_000, 50, 5, 0.1),
                GridCell::sparse(10_000, 100, 5, 0.1),
                GridCell::sparse(10_000, 50, 10, 0.1),
                GridCell::sparse(10_000, 50, 5, 0.2),
                GridCell::sparse(10_000, 50, 5, 0.3),
            ]
        };
        Self::new(Experiment::Table1, Family::SparseReg, grid)
    }

    /// Covertype SVM at the given training sizes.
    pub fn table2(full: bool, data_path: PathBuf) -> Self {
        let sizes: &[usize] = if full { &[1_000, 10_000, 100_000] } else { &[1_000, 10_000] };
        let grid = sizes
            .iter()
            .map(|&n| GridCell { population: n, dim: 54, sparsity: 0, sigma: 0.0, sample_sizes: Vec::new() })
            .collect();
        let mut plan = Self::new(Experiment::Table2, Family::Svm, grid);
        plan.data_path = Some(data_path);
        plan
    }

    /// Knapsack: enumeration, full, subsampled and reformulated.
    pub fn table3(full: bool) -> Self {
        let (ns, ks): (&[usize], &[usize]) = if full {
            (&[1_000, 10_000, 100_000, 1_000_000], &[10, 20, 50])
        } else {
            (&[1_000, 10_000, 100_000], &[10, 20])
        };
        let grid = ks.iter().flat_map(|&k| ns.iter().map(move |&n| GridCell::sskp(n, k))).collect();
        Self::new(Experiment::Table3, Family::Sskp, grid)
    }

    /// Agreement (regression) or normalized objective (knapsack) against the
    /// per-iteration sample size.
    pub fn sweep(family: Family, full: bool) -> Result<Self> {
        let grid = match (family, full) {
            (Family::SparseReg, false) => vec![
                GridCell::sparse(1_000, 50, 5, 0.1).sweeping(&[30, 100, 320]),
                GridCell::sparse(10_000, 50, 5, 0.1).sweeping(&[50, 100, 300, 1_000]),
            ],
            (Family::SparseReg, true) => [1_000, 10_000, 100_000]
                .iter()
                .map(|&n| GridCell::sparse(n, 100, 10, 0.1).sweeping(&[30, 50, 100, 300, 1_000, 3_000, 10_000]))
                .collect(),
            (Family::Sskp, false) => {
                [1_000, 10_000].iter().map(|&n| GridCell::sskp(n, 10).sweeping(&[10, 30, 100, 300, 1_000])).collect()
            }
            (Family::Sskp, true) => [1_000, 10_000, 100_000]
                .iter()
                .map(|&n| GridCell::sskp(n, 20).sweeping(&[10, 30, 100, 300, 1_000, 3_000, 10_000]))
                .collect(),
            (Family::Svm, _) => return Err(ScpError::InvalidArgument("the sweep covers sparsereg and sskp".into())),
        };
        Ok(Self::new(Experiment::Sweep, family, grid))
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.repetitions as u64).map(move |r| self.base_seed + r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(ScpError::InvalidArgument("repetitions must be at least 1".into()));
        }
        if self.grid.is_empty() {
            return Err(ScpError::InvalidArgument("empty grid".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(ScpError::InvalidArgument("epsilon must be positive and finite".into()));
        }
        if self.family == Family::Svm && self.data_path.is_none() {
            return Err(ScpError::InvalidArgument("the SVM experiment needs a covertype file".into()));
        }
        Ok(())
    }
}

/// Rows in grid order, plus one message per failed `(cell, seed)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridOutput {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<String>,
}

/// Runs every `(cell, seed)` pair in parallel on the current rayon pool.
/// Each pair is independent and single-threaded; results are assembled in grid order.
pub fn run_plan(plan: &ExperimentPlan) -> Result<GridOutput> {
    plan.validate()?;
    let jobs: Vec<(&GridCell, u64)> = plan.grid.iter().flat_map(|c| plan.seeds().map(move |s| (c, s))).collect();
    let results: Vec<(String, Result<Vec<ResultRow>>)> = jobs
        .par_iter()
        .map(|&(cell, seed)| {
            let label = format!(
                "{} {} N={} dim={} sigma={} seed={}",
                plan.experiment.name(),
                plan.family.name(),
                cell.population,
                cell.dim,
                cell.sigma,
                seed
            );
            log::info!("start {label}");
            let out = run_job(plan, cell, seed);
            log::info!("done {label}");
            (label, out)
        })
        .collect();
    let mut output = GridOutput::default();
    for (label, result) in results {
        match result {
            Ok(rows) => output.rows.extend(rows),
            Err(e) => output.failures.push(format!("{label}: {e}")),
        }
    }
    Ok(output)
}

fn run_job(plan: &ExperimentPlan, cell: &GridCell, seed: u64) -> Result<Vec<ResultRow>> {
    let exp = plan.experiment.name();
    let fam = plan.family.name();
    let (n, dim, sigma) = (cell.population, cell.dim, cell.sigma);
    match (plan.experiment, plan.family) {
        (Experiment::Table1, Family::SparseReg) => {
            let mut sc = SparseCell::new(n, dim, cell.sparsity, sigma, seed);
            sc.epsilon = plan.epsilon;
            let r = run_sparse_cell(&sc)?;
            Ok(vec![
                r.full.to_row(exp, fam, n, dim, cell.sparsity, sigma, seed, "mape"),
                r.scp.to_row(exp, fam, n, dim, cell.sparsity, sigma, seed, "mape"),
            ])
        }
        (Experiment::Table2, Family::Svm) => {
            let path = plan.data_path.as_deref().expect("validated");
            let r = run_svm_cell(path, n, seed, plan.epsilon, NSchedule::SqrtTen)?;
            Ok(vec![
                r.full.to_row(exp, fam, n, dim, cell.sparsity, sigma, seed, "accuracy"),
                r.scp.to_row(exp, fam, n, dim, cell.sparsity, sigma, seed, "accuracy"),
            ])
        }
        (Experiment::Table3, Family::Sskp) => {
            let r = run_sskp_cell(n, dim, seed, plan.epsilon, NSchedule::SqrtTen)?;
            let metric = "normalized_objective";
            let mut rows = vec![
                reference_row(exp, fam, n, dim, seed, r.optimum, r.optimum_by_enumeration),
                r.full.to_row(exp, fam, n, dim, cell.sparsity, sigma, seed, metric),
                r.scp.to_row(exp, fam, n, dim, cell.sparsity, sigma, seed, metric),
            ];
            if let Some((value, seconds)) = r.reformulation {
                let mut row = reference_row(exp, fam, n, dim, seed, value, false);
                row.mode = "reformulation".into();
                row.total_seconds = seconds;
                row.metric = crate::experiments::normalized_objective(value, r.optimum);
                rows.push(row);
            }
            Ok(rows)
        }
        (Experiment::Sweep, Family::SparseReg) => {
            let mut sc = SparseCell::new(n, dim, cell.sparsity, sigma, seed);
            sc.epsilon = plan.epsilon;
            let r = run_sparse_sweep(&sc, &cell.sample_sizes)?;
            let mut rows = vec![{
                let mut row = r.full.to_row(exp, fam, n, dim, cell.sparsity, sigma, seed, "agreement");
                row.metric = 1.0;
                row
            }];
            for (out, agrees) in r.scp.iter().zip(r.agreement()) {
                let mut row = out.to_row(exp, fam, n, dim, cell.sparsity, sigma, seed, "agreement");
                row.metric = if agrees { 1.0 } else { 0.0 };
                rows.push(row);
            }
            Ok(rows)
        }
        (Experiment::Sweep, Family::Sskp) => {
            let r = run_sskp_sweep(n, dim, seed, plan.epsilon, &cell.sample_sizes)?;
            let mut rows = vec![reference_row(exp, fam, n, dim, seed, r.optimum, r.optimum_by_enumeration)];
            rows.extend(
                r.scp.iter().map(|o| o.to_row(exp, fam, n, dim, cell.sparsity, sigma, seed, "normalized_objective")),
            );
            Ok(rows)
        }
        (e, f) => Err(ScpError::InvalidArgument(format!("{} does not run {}", e.name(), f.name()))),
    }
}

/// The knapsack optimum the other rows are normalized by.
fn reference_row(exp: &str, fam: &str, n: usize, k: usize, seed: u64, value: f64, by_enumeration: bool) -> ResultRow {
    ResultRow {
        experiment: exp.into(),
        family: fam.into(),
        population: n,
        dim: k,
        sparsity: 0,
        sigma: 0.0,
        mode: if by_enumeration { "enumeration" } else { "reference" }.into(),
        sample_size: n,
        seed,
        oracle_seconds: 0.0,
        master_seconds: 0.0,
        total_seconds: 0.0,
        iterations: 0,
        objective: value,
        metric_name: "normalized_objective".into(),
        metric: 1.0,
        fingerprint: String::new(),
    }
}

/// Mean and standard error of one metric over the repetitions of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryLine {
    pub experiment: String,
    pub population: usize,
    pub dim: usize,
    pub sparsity: usize,
    pub sigma: f64,
    pub mode: String,
    pub sample_size: usize,
    pub metric_name: String,
    pub count: usize,
    pub metric_mean: f64,
    pub metric_stderr: f64,
    pub seconds_mean: f64,
    pub iterations_mean: f64,
}

/// Experiment, N, dim, k, σ bits, mode, n, metric.
type CellKey = (String, usize, usize, usize, u64, String, usize, String);

/// Groups rows by cell and mode, in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryLine> {
    let mut index: HashMap<CellKey, usize> = HashMap::new();
    let mut groups: Vec<Vec<&ResultRow>> = Vec::new();
    for row in rows {
        let key = (
            row.experiment.clone(),
            row.population,
            row.dim,
            row.sparsity,
            row.sigma.to_bits(),
            row.mode.clone(),
            row.sample_size,
            row.metric_name.clone(),
        );
        let g = *index.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(row);
    }
    groups
        .into_iter()
        .map(|members| {
            let first = members[0];
            let count = members.len() as f64;
            let mean = |f: &dyn Fn(&ResultRow) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / count;
            let metric_mean = mean(&|r| r.metric);
            let var = if members.len() > 1 {
                members.iter().map(|r| (r.metric - metric_mean).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            SummaryLine {
                experiment: first.experiment.clone(),
                population: first.population,
                dim: first.dim,
                sparsity: first.sparsity,
                sigma: first.sigma,
                mode: first.mode.clone(),
                sample_size: first.sample_size,
                metric_name: first.metric_name.clone(),
                count: members.len(),
                metric_mean,
                metric_stderr: (var / count).sqrt(),
                seconds_mean: mean(&|r| r.total_seconds),
                iterations_mean: mean(&|r| r.iterations as f64),
            }
        })
        .collect()
}

/// Seeds on which the subsampled support matched the full-data support, per
/// regression cell of an experiment with paired `full`/`stochastic` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Agreement {
    pub population: usize,
    pub dim: usize,
    pub sparsity: usize,
    pub sigma: f64,
    pub agree: usize,
    pub total: usize,
}

pub fn support_agreement(rows: &[ResultRow]) -> Vec<Agreement> {
    let mut out: Vec<Agreement> = Vec::new();
    let full_rows =
        rows.iter().filter(|r| r.experiment == Experiment::Table1.name() && r.mode == mode_name(Mode::Full));
    for full in full_rows {
        let Some(scp) = rows.iter().find(|r| {
            r.experiment == full.experiment
                && r.mode == mode_name(Mode::Stochastic)
                && r.population == full.population
                && r.dim == full.dim
                && r.sparsity == full.sparsity
                && r.sigma == full.sigma
                && r.seed == full.seed
        }) else {
            continue;
        };
        let same = usize::from(scp.fingerprint == full.fingerprint);
        match out.iter_mut().find(|a| {
            a.population == full.population && a.dim == full.dim && a.sparsity == full.sparsity && a.sigma == full.sigma
        }) {
            Some(a) => {
                a.agree += same;
                a.total += 1;
            }
            None => out.push(Agreement {
                population: full.population,
                dim: full.dim,
                sparsity: full.sparsity,
                sigma: full.sigma,
                agree: same,
                total: 1,
            }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(mode: &str, n: usize, metric: f64) -> ResultRow {
        ResultRow {
            experiment: "sweep".into(),
            family: "sskp".into(),
            population: n,
            dim: 10,
            sparsity: 0,
            sigma: 0.0,
            mode: mode.into(),
            sample_size: 100,
            seed: 1,
            oracle_seconds: 0.0,
            master_seconds: 0.0,
            total_seconds: 2.0,
            iterations: 4,
            objective: 0.0,
            metric_name: "normalized_objective".into(),
            metric,
            fingerprint: String::new(),
        }
    }

    #[test]
    fn summary_groups_in_first_seen_order() {
        let rows = vec![row("stochastic", 1000, 1.0), row("full", 1000, 1.0), row("stochastic", 1000, 0.0)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].mode, "stochastic");
        assert_eq!(s[0].count, 2);
        assert!((s[0].metric_mean - 0.5).abs() < 1e-15);
        assert!((s[0].metric_stderr - 0.5).abs() < 1e-15);
        assert_eq!(s[1].mode, "full");
    }

    #[test]
    fn plans_validate() {
        for plan in [ExperimentPlan::table1(false), ExperimentPlan::table3(false), ExperimentPlan::table1(true)] {
            plan.validate().unwrap();
        }
        assert!(ExperimentPlan::sweep(Family::Svm, false).is_err());
        let mut plan = ExperimentPlan::table3(false);
        plan.repetitions = 0;
        assert!(plan.validate().is_err());
    }

    #[test]
    fn sweep_sizes_are_clipped_to_the_population() {
        let plan = ExperimentPlan::sweep(Family::SparseReg, false).unwrap();
        for cell in &plan.grid {
            assert!(cell.sample_sizes.iter().all(|&n| n <= cell.population));
            assert!(!cell.sample_sizes.is_empty());
        }
    }
}
