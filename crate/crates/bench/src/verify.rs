//! Property suites behind `scpkit verify`.
//!
//! Each suite draws its own seeded instances, compares a fast path against a
//! reference from [`crate::oracles`] and reports the worst discrepancy.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scpkit::datagen::{gen_sparse_regression, gen_sskp, SparseRegGenSpec, SskpGenSpec};
use scpkit::engine::{run_cutting_planes, EngineConfig, MilpMaster, QpMasterSolver, RunReport};
use scpkit::layout::{Sense, VariableLayout};
use scpkit::milp::{Column, MasterModel, MilpOptions, MilpStatus};
use scpkit::oracle::SampledOracle;
use scpkit::problems::sparse_reg::{fit_coefficients, sparse_reg_value, support_of};
use scpkit::problems::{
    RowMatrix, SparseRegressionData, SparseRegressionOracle, SskpData, SskpOracle, SvmData, SvmOracle,
};
use scpkit::qp::QpMaster;
use scpkit::sampling::{derive_seed, sample_without_replacement, SubsetSample};
use scpkit::Result;

use crate::experiments::design_scale;
use crate::oracles::{
    dense_sparse_reg_value, direct_sskp_cost, direct_svm_risk, fd_gradient, lp_by_vertices, milp_by_enumeration,
    qp_certificate, SmallLp,
};

pub const WOODBURY_TOL: f64 = 1e-10;
pub const FD_TOL: f64 = 1e-5;
pub const SUBGRADIENT_TOL: f64 = 1e-9;
pub const MILP_TOL: f64 = 1e-7;
pub const LP_DUALITY_TOL: f64 = 1e-6;
pub const QP_TOL: f64 = 1e-7;
/// Subsets drawn per point by the concentration suite.
pub const CONCENTRATION_DRAWS: usize = 500;
pub const CUT_TOL: f64 = 1e-9;

const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub checks: usize,
    /// Largest scaled discrepancy seen; compare with `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<14} {:>5} checks, worst {:.3e} (tol {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.checks,
            self.worst,
            self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, "  {}", self.detail)?;
        }
        Ok(())
    }
}

/// Running maximum of scaled errors.
struct Tally {
    name: &'static str,
    tolerance: f64,
    checks: usize,
    worst: f64,
    detail: String,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, checks: 0, worst: 0.0, detail: String::new() }
    }

    fn record(&mut self, err: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        // NaN counts as a failure.
        if err.is_nan() || err > self.worst {
            self.worst = if err.is_nan() { f64::INFINITY } else { err };
            if err.is_nan() || err > self.tolerance {
                self.detail = what();
            }
        }
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            name: self.name,
            passed: self.checks > 0 && self.worst <= self.tolerance,
            checks: self.checks,
            worst: self.worst,
            tolerance: self.tolerance,
            detail: self.detail,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Test hook: the gradient-based suites see every gradient negated.
    pub corrupt_gradients: bool,
}

/// Wraps an oracle and returns `−∇f` instead of `∇f`.
pub struct ReversedGradient<'a>(pub &'a dyn SampledOracle);

impl SampledOracle for ReversedGradient<'_> {
    fn population(&self) -> usize {
        self.0.population()
    }

    fn layout(&self) -> VariableLayout {
        self.0.layout()
    }

    fn value(&self, point: &[f64], sample: &SubsetSample) -> Result<f64> {
        self.0.value(point, sample)
    }

    fn gradient(&self, point: &[f64], sample: &SubsetSample) -> Result<Vec<f64>> {
        Ok(self.0.gradient(point, sample)?.into_iter().map(|g| -g).collect())
    }

    fn lower_bound(&self) -> f64 {
        self.0.lower_bound()
    }

    fn warm_start(&self, sample: &SubsetSample) -> Result<Vec<f64>> {
        self.0.warm_start(sample)
    }
}

pub fn run_all(opts: &VerifyOptions) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        woodbury(opts.seed)?,
        finite_differences(opts.seed, opts.corrupt_gradients)?,
        subgradient_inequality(opts.seed, opts.corrupt_gradients)?,
        milp_enumeration(opts.seed)?,
        lp_duality(opts.seed)?,
        qp_kkt(opts.seed),
        concentration(opts.seed)?,
        subset_consistency(opts.seed)?,
        cut_validity(opts.seed)?,
        cut_slack(opts.seed)?,
        full_mode(opts.seed)?,
        replay(opts.seed)?,
    ])
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

fn sparse_fixture(n: usize, p: usize, k: usize, seed: u64, gamma_mult: f64) -> Result<SparseRegressionData> {
    let train = gen_sparse_regression(&SparseRegGenSpec::new(n, p, k, 0.1, seed))?.train;
    let gamma = gamma_mult / design_scale(&train);
    train.with_gamma(gamma)
}

fn sskp_fixture(n: usize, k: usize, seed: u64) -> Result<SskpData> {
    gen_sskp(&SskpGenSpec::new(n, k, seed))
}

/// Gaussian features, labels from a noisy random hyperplane.
pub fn svm_fixture(n: usize, p: usize, c: f64, seed: u64) -> Result<SvmData> {
    let mut rng = rng(seed, 0x5_u64);
    let w: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let score: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + rng.gen_range(-0.3..0.3);
        y.push(if score >= 0.0 { 1.0 } else { -1.0 });
        x.extend(row);
    }
    SvmData::new(RowMatrix::new(n, p, x)?, y, c)
}

fn random_sample(population: usize, rng: &mut ChaCha8Rng) -> Result<SubsetSample> {
    if rng.gen_bool(0.3) {
        return Ok(SubsetSample::full(population));
    }
    let n = rng.gen_range(2..=population);
    sample_without_replacement(population, n, rng.gen())
}

fn binary_point(p: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..p).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect()
}

fn relaxed_point(p: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..p).map(|_| rng.gen_range(lo..hi)).collect()
}

fn rel(err: f64, reference: f64) -> f64 {
    err / reference.abs().max(1.0)
}

/// Fast sparse-regression values against an explicit `n × n` solve.
pub fn woodbury(seed: u64) -> Result<SuiteReport> {
    let mut tally = Tally::new("woodbury", WOODBURY_TOL);
    let mut rng = rng(seed, 1);
    for (inst, gamma_mult) in [(0u64, 0.1), (1, 1.0), (2, 10.0)] {
        let data = sparse_fixture(60, 10, 3, derive_seed(seed, 100 + inst), gamma_mult)?;
        for _ in 0..50 {
            let z = if rng.gen_bool(0.5) {
                binary_point(data.p(), &mut rng)
            } else {
                relaxed_point(data.p(), 0.0, 1.0, &mut rng)
            };
            let sample = random_sample(data.n(), &mut rng)?;
            let fast = sparse_reg_value(&data, &z, &sample)?;
            let dense = dense_sparse_reg_value(&data, &z, &sample);
            tally.record(rel((fast - dense).abs(), dense), || {
                format!("gamma mult {gamma_mult}, n = {}: {fast} vs {dense}", sample.len())
            });
        }
    }
    // The sskp and svm values are plain sums; check them against the term-by-term loops too.
    let sskp = sskp_fixture(80, 6, derive_seed(seed, 110))?;
    let svm = svm_fixture(80, 4, 1.0, derive_seed(seed, 111))?;
    let sskp_oracle = SskpOracle::new(sskp.clone());
    let svm_oracle = SvmOracle::new(svm.clone());
    for _ in 0..20 {
        let z = relaxed_point(6, 0.0, 1.0, &mut rng);
        let sample = random_sample(80, &mut rng)?;
        let reward: f64 = sskp.r.iter().zip(&z).map(|(r, z)| r * z).sum();
        let want = direct_sskp_cost(&sskp, &z, &sample) - reward;
        let got = sskp_oracle.value(&z, &sample)?;
        tally.record(rel((got - want).abs(), want), || format!("sskp: {got} vs {want}"));

        let theta = relaxed_point(4, -2.0, 2.0, &mut rng);
        let want = direct_svm_risk(&svm, &theta, &sample);
        let got = svm_oracle.value(&theta, &sample)?;
        tally.record(rel((got - want).abs(), want), || format!("svm: {got} vs {want}"));
    }
    Ok(tally.finish())
}

/// Smallest `|load − q|` over the sample; central differences need it well above the step.
fn sskp_kink_distance(data: &SskpData, z: &[f64], sample: &SubsetSample) -> f64 {
    sample
        .indices()
        .iter()
        .map(|&j| {
            let load: f64 = data.w.row(j).iter().zip(z).map(|(w, z)| w * z).sum();
            (load - data.q).abs()
        })
        .fold(f64::INFINITY, f64::min)
}

fn svm_kink_distance(data: &SvmData, theta: &[f64], sample: &SubsetSample) -> f64 {
    sample
        .indices()
        .iter()
        .map(|&i| {
            let m: f64 = data.x.row(i).iter().zip(theta).map(|(x, t)| x * t).sum();
            (1.0 - data.y[i] * m).abs()
        })
        .fold(f64::INFINITY, f64::min)
}

fn check_fd(
    tally: &mut Tally,
    family: &str,
    oracle: &dyn SampledOracle,
    point: &[f64],
    sample: &SubsetSample,
) -> Result<()> {
    let g = oracle.gradient(point, sample)?;
    let fd = fd_gradient(oracle, point, sample, FD_STEP);
    let err = g.iter().zip(&fd).map(|(a, b)| rel((a - b).abs(), *b)).fold(0.0, f64::max);
    tally.record(err, || format!("{family}: gradient {g:?} vs differences {fd:?}"));
    Ok(())
}

/// Analytic gradients against central differences at smooth interior points.
pub fn finite_differences(seed: u64, corrupt: bool) -> Result<SuiteReport> {
    let mut tally = Tally::new("finite-diff", FD_TOL);
    let mut rng = rng(seed, 2);

    let sparse = SparseRegressionOracle::new(sparse_fixture(60, 8, 3, derive_seed(seed, 200), 1.0)?);
    let sskp_data = sskp_fixture(120, 6, derive_seed(seed, 201))?;
    let sskp = SskpOracle::new(sskp_data.clone());
    let svm_data = svm_fixture(100, 4, 1.0, derive_seed(seed, 202))?;
    let svm = SvmOracle::new(svm_data.clone());
    let (sparse_r, sskp_r, svm_r) = (ReversedGradient(&sparse), ReversedGradient(&sskp), ReversedGradient(&svm));
    let sparse_o: &dyn SampledOracle = if corrupt { &sparse_r } else { &sparse };
    let sskp_o: &dyn SampledOracle = if corrupt { &sskp_r } else { &sskp };
    let svm_o: &dyn SampledOracle = if corrupt { &svm_r } else { &svm };

    for _ in 0..40 {
        let z = relaxed_point(8, 0.2, 1.0, &mut rng);
        let sample = random_sample(60, &mut rng)?;
        check_fd(&mut tally, "sparse regression", sparse_o, &z, &sample)?;
    }
    let mut done = 0;
    while done < 40 {
        let z = relaxed_point(6, 0.0, 1.0, &mut rng);
        let sample = random_sample(120, &mut rng)?;
        if sskp_kink_distance(&sskp_data, &z, &sample) < 1e-2 {
            continue;
        }
        check_fd(&mut tally, "sskp", sskp_o, &z, &sample)?;
        done += 1;
    }
    let mut done = 0;
    while done < 40 {
        let theta = relaxed_point(4, -2.0, 2.0, &mut rng);
        let sample = random_sample(100, &mut rng)?;
        if svm_kink_distance(&svm_data, &theta, &sample) < 1e-3 {
            continue;
        }
        check_fd(&mut tally, "svm", svm_o, &theta, &sample)?;
        done += 1;
    }
    Ok(tally.finish())
}

/// `f(y) ≥ f(x) + g(x)ᵀ(y − x)` for convex `f`, on far and nearby pairs.
pub fn subgradient_inequality(seed: u64, corrupt: bool) -> Result<SuiteReport> {
    let mut tally = Tally::new("subgradient", SUBGRADIENT_TOL);
    let mut rng = rng(seed, 3);

    let sparse = SparseRegressionOracle::new(sparse_fixture(60, 8, 3, derive_seed(seed, 300), 1.0)?);
    let sskp = SskpOracle::new(sskp_fixture(120, 6, derive_seed(seed, 301))?);
    let svm = SvmOracle::new(svm_fixture(100, 4, 1.0, derive_seed(seed, 302))?);
    let (sparse_r, sskp_r, svm_r) = (ReversedGradient(&sparse), ReversedGradient(&sskp), ReversedGradient(&svm));
    let families: [(&str, &dyn SampledOracle, usize, f64, f64); 3] = [
        ("sparse regression", if corrupt { &sparse_r } else { &sparse }, 8, 0.0, 1.0),
        ("sskp", if corrupt { &sskp_r } else { &sskp }, 6, 0.0, 1.0),
        ("svm", if corrupt { &svm_r } else { &svm }, 4, -2.0, 2.0),
    ];

    for (family, oracle, dim, lo, hi) in families {
        let population = oracle.population();
        for trial in 0..100 {
            let sample = random_sample(population, &mut rng)?;
            let binary = lo == 0.0 && trial % 2 == 0;
            let x = if binary { binary_point(dim, &mut rng) } else { relaxed_point(dim, lo, hi, &mut rng) };
            let y = if trial % 4 == 3 {
                // Nearby point, still inside the box.
                x.iter().map(|v| (v + rng.gen_range(-0.05..0.05) * (hi - lo)).clamp(lo, hi)).collect()
            } else if binary {
                binary_point(dim, &mut rng)
            } else {
                relaxed_point(dim, lo, hi, &mut rng)
            };
            let (fx, g) = (oracle.value(&x, &sample)?, oracle.gradient(&x, &sample)?);
            let fy = oracle.value(&y, &sample)?;
            let linear: f64 = fx + g.iter().zip(y.iter().zip(&x)).map(|(g, (a, b))| g * (a - b)).sum::<f64>();
            let scale = fx.abs().max(fy.abs()).max(1.0);
            let err = ((linear - fy) / scale).max(0.0);
            tally.record(err, || format!("{family}: f(y) = {fy}, linearization {linear}"));
        }
    }
    Ok(tally.finish())
}

/// A random epigraph master: binaries `z`, a bounded `η`, tangent-like cuts,
/// a knapsack row and sometimes a cardinality row.
fn random_master(b: usize, rng: &mut ChaCha8Rng) -> Result<MasterModel> {
    let mut cols: Vec<Column> =
        (0..b).map(|j| Column { name: format!("z{j}"), lower: 0.0, upper: 1.0, integer: true }).collect();
    cols.push(Column { name: "eta".into(), lower: -50.0, upper: 50.0, integer: false });
    let mut objective: Vec<f64> = (0..b).map(|_| rng.gen_range(-1.0..1.0)).collect();
    objective.push(1.0);
    let mut model = MasterModel::new(cols, objective)?;
    for c in 0..rng.gen_range(1..=8) {
        // η − gᵀz ≥ v − gᵀa
        let anchor = binary_point(b, rng);
        let g: Vec<f64> = (0..b).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let v: f64 = rng.gen_range(-10.0..10.0);
        let mut coeffs: Vec<f64> = g.iter().map(|g| -g).collect();
        coeffs.push(1.0);
        let rhs = v - g.iter().zip(&anchor).map(|(g, a)| g * a).sum::<f64>();
        model.add_row(format!("cut{c}"), coeffs, Sense::Ge, rhs)?;
    }
    let mut weights: Vec<f64> = (0..b).map(|_| rng.gen_range(1.0..10.0)).collect();
    let capacity = weights.iter().sum::<f64>() * rng.gen_range(0.2..0.8);
    weights.push(0.0);
    model.add_row("knapsack".into(), weights, Sense::Le, capacity)?;
    if rng.gen_bool(0.4) {
        let mut ones = vec![1.0; b];
        ones.push(0.0);
        let k = rng.gen_range(0..=b) as f64;
        let sense = if rng.gen_bool(0.5) { Sense::Eq } else { Sense::Ge };
        model.add_row("cardinality".into(), ones, sense, k)?;
    }
    Ok(model)
}

/// Branch-and-bound against enumeration, and the simplex against vertex enumeration.
pub fn milp_enumeration(seed: u64) -> Result<SuiteReport> {
    let mut tally = Tally::new("milp-enum", MILP_TOL);
    let mut rng = rng(seed, 4);
    let opts = MilpOptions { abs_gap: 0.0, rel_gap: 0.0, ..MilpOptions::default() };
    for trial in 0..110 {
        let b = 2 + trial % 11;
        let model = random_master(b, &mut rng)?;
        let sol = model.solve_milp(&opts)?;
        match (sol.status, milp_by_enumeration(&model)) {
            (MilpStatus::Optimal, Some((want, _))) => {
                let err = rel((sol.objective - want).abs(), want).max(model.max_scaled_row_violation(&sol.point));
                tally.record(err, || format!("{b} binaries: {} vs {want}", sol.objective));
            }
            (MilpStatus::Infeasible, None) => tally.record(0.0, String::new),
            (status, want) => tally.record(f64::INFINITY, || {
                format!("{b} binaries: status {status:?}, enumeration {:?}", want.map(|w| w.0))
            }),
        }
    }
    for trial in 0..40 {
        let n = 1 + trial % 3;
        let lp = SmallLp {
            objective: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            rows: (0..rng.gen_range(1..=4))
                .map(|_| {
                    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                    let sense = match rng.gen_range(0..3) {
                        0 => Sense::Le,
                        1 => Sense::Ge,
                        _ => Sense::Eq,
                    };
                    (a, sense, rng.gen_range(-2.0..2.0))
                })
                .collect(),
            lower: vec![-3.0; n],
            upper: vec![3.0; n],
        };
        let cols = (0..n).map(|j| Column { name: format!("x{j}"), lower: -3.0, upper: 3.0, integer: false }).collect();
        let mut model = MasterModel::new(cols, lp.objective.clone())?;
        for (i, (a, sense, rhs)) in lp.rows.iter().enumerate() {
            model.add_row(format!("r{i}"), a.clone(), *sense, *rhs)?;
        }
        let sol = model.solve_milp(&opts)?;
        match (sol.status, lp_by_vertices(&lp)) {
            (MilpStatus::Optimal, Some((want, _))) => {
                tally.record(rel((sol.objective - want).abs(), want), || {
                    format!("lp with {n} columns: {} vs {want}", sol.objective)
                });
            }
            (MilpStatus::Infeasible, None) => tally.record(0.0, String::new),
            (status, want) => tally.record(f64::INFINITY, || {
                format!("lp with {n} columns: status {status:?}, vertices {:?}", want.map(|w| w.0))
            }),
        }
    }
    Ok(tally.finish())
}

/// Optimal LP duals, moved into the sign-feasible orthant, give a Lagrangian
/// bound `bᵀy + Σ min over the box of (c − Aᵀy)ⱼxⱼ` that matches the primal value.
pub fn lp_duality(seed: u64) -> Result<SuiteReport> {
    let mut tally = Tally::new("lp-duality", LP_DUALITY_TOL);
    let mut rng = rng(seed, 11);
    for trial in 0..60 {
        let n = 1 + trial % 5;
        let cols: Vec<Column> = (0..n)
            .map(|j| Column {
                name: format!("x{j}"),
                lower: rng.gen_range(-3.0..0.0),
                upper: rng.gen_range(0.0..3.0),
                integer: false,
            })
            .collect();
        let objective: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut model = MasterModel::new(cols, objective.clone())?;
        for i in 0..rng.gen_range(1..=6) {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            // Rows pass through a box point with slack, so the LP stays feasible.
            let sense = if rng.gen_bool(0.5) { Sense::Le } else { Sense::Ge };
            let rhs = match sense {
                Sense::Le => rng.gen_range(0.0..2.0),
                _ => rng.gen_range(-2.0..0.0),
            };
            model.add_row(format!("r{i}"), a, sense, rhs)?;
        }
        let sol = model.solve_lp(None)?;
        if sol.status != scpkit::milp::LpStatus::Optimal {
            tally.record(f64::INFINITY, || format!("trial {trial}: {:?}", sol.status));
            continue;
        }
        let rows = model.rows();
        let y: Vec<f64> = rows
            .iter()
            .zip(&sol.duals)
            .map(|(r, y)| match r.sense {
                Sense::Le => y.min(0.0),
                Sense::Ge => y.max(0.0),
                Sense::Eq => *y,
            })
            .collect();
        let mut bound: f64 = rows.iter().zip(&y).map(|(r, y)| r.rhs * y).sum();
        for (j, col) in model.columns().iter().enumerate() {
            let reduced = objective[j] - rows.iter().zip(&y).map(|(r, y)| r.coeffs[j] * y).sum::<f64>();
            bound += if reduced >= 0.0 { reduced * col.lower } else { reduced * col.upper };
        }
        let err = rel((sol.objective - bound).abs(), sol.objective);
        tally.record(err, || format!("trial {trial}: primal {} vs dual bound {bound}", sol.objective));
    }
    Ok(tally.finish())
}

/// One-slack QP solutions checked through an independently computed duality
/// certificate, plus monotonicity of the master value as cuts arrive.
pub fn qp_kkt(seed: u64) -> SuiteReport {
    let mut tally = Tally::new("qp-kkt", QP_TOL);
    let mut rng = rng(seed, 5);
    for trial in 0..30 {
        let p = 1 + trial % 6;
        let c = [0.1, 1.0, 100.0][trial % 3];
        let mut master = QpMaster::new(p, c).expect("valid dimensions");
        let mut previous = 0.0;
        for _ in 0..rng.gen_range(1..=20) {
            let a: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
            master.add_cut(a, rng.gen_range(-1.0..2.0)).expect("finite cut");
            let sol = master.solve();
            let cert = qp_certificate(&master, &sol);
            let scale = cert.scale;
            let gap = (cert.primal - cert.dual) / scale;
            let weak = ((cert.dual - cert.primal) / scale).max(0.0);
            let drop = ((previous - cert.primal) / scale).max(0.0);
            let err = gap.max(weak).max(cert.stationarity / scale).max(cert.complementarity / scale).max(drop);
            tally.record(err, || {
                format!(
                    "p = {p}, C = {c}, {} cuts: primal {}, dual {}, stationarity {:.2e}, complementarity {:.2e}",
                    master.len(),
                    cert.primal,
                    cert.dual,
                    cert.stationarity,
                    cert.complementarity
                )
            });
            previous = cert.primal;
        }
    }
    tally.finish()
}

/// The `q`-quantile of `v` (nearest rank, rounding up).
fn percentile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(q * (v.len() - 1) as f64).ceil() as usize]
}

/// `max − min` of a list of per-sample losses.
fn spread(losses: &[f64]) -> f64 {
    let hi = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = losses.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// Family name, oracle, evaluation point and per-row losses.
type ConcentrationCase<'a> = (&'a str, &'a dyn SampledOracle, &'a [f64], Vec<f64>);

/// Subsampled values concentrate around the full-data value: over
/// [`CONCENTRATION_DRAWS`] subsets of size `N/10`, the 99th percentile of the
/// deviation stays below `3·R·√(ln 100/(2n))`, with `R` the spread of the
/// per-sample losses. The reported error is the percentile over the bound.
pub fn concentration(seed: u64) -> Result<SuiteReport> {
    let mut tally = Tally::new("concentration", 1.0);
    let mut rng = rng(seed, 6);
    let population = 2000;
    let n = population / 10;
    let bound = |r: f64| 3.0 * r * (100f64.ln() / (2.0 * n as f64)).sqrt();
    let full = SubsetSample::full(population);

    let sskp = SskpOracle::new(sskp_fixture(population, 10, derive_seed(seed, 600))?);
    let svm = SvmOracle::new(svm_fixture(population, 5, 1.0, derive_seed(seed, 601))?);
    let sparse_data = sparse_fixture(population, 10, 3, derive_seed(seed, 602), 1.0)?;
    let sparse = SparseRegressionOracle::new(sparse_data.clone());

    for _ in 0..3 {
        let z = binary_point(10, &mut rng);
        let sskp_losses: Vec<f64> = (0..population)
            .map(|j| {
                let s = SubsetSample::from_indices(vec![j], population).expect("index in range");
                sskp.value(&z, &s).expect("valid point")
            })
            .collect();

        let theta = relaxed_point(5, -2.0, 2.0, &mut rng);
        let svm_losses: Vec<f64> = (0..population)
            .map(|i| {
                direct_svm_risk(
                    svm.data(),
                    &theta,
                    &SubsetSample::from_indices(vec![i], population).expect("index in range"),
                )
            })
            .collect();

        // Per-row ridge losses at the full-data minimizer for this support.
        let mut zs = vec![0.0; 10];
        for j in rand::seq::index::sample(&mut rng, 10, 3) {
            zs[j] = 1.0;
        }
        let beta = fit_coefficients(&sparse_data, &support_of(&zs))?;
        let penalty = beta.iter().map(|b| b * b).sum::<f64>() / (sparse_data.gamma * population as f64);
        let sparse_losses: Vec<f64> = (0..population)
            .map(|i| {
                let fit: f64 = sparse_data.x.row(i).iter().zip(&beta).map(|(x, b)| x * b).sum();
                (sparse_data.y[i] - fit).powi(2) + penalty
            })
            .collect();

        let cases: [ConcentrationCase; 3] = [
            ("sskp", &sskp, &z, sskp_losses),
            ("svm", &svm, &theta, svm_losses),
            ("sparse regression", &sparse, &zs, sparse_losses),
        ];
        for (family, oracle, point, losses) in cases {
            let truth = oracle.value(point, &full)?;
            let mut dev = Vec::with_capacity(CONCENTRATION_DRAWS);
            for _ in 0..CONCENTRATION_DRAWS {
                let s = sample_without_replacement(population, n, rng.gen())?;
                dev.push((oracle.value(point, &s)? - truth).abs());
            }
            let r = spread(&losses);
            let q = percentile(dev, 0.99);
            let err = if r == 0.0 {
                if q == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                q / bound(r)
            };
            tally.record(err, || format!("{family}: 99th percentile {q} over bound {}", bound(r)));
        }
    }
    Ok(tally.finish())
}

/// Full index sets given explicitly behave exactly like the full sample.
pub fn subset_consistency(seed: u64) -> Result<SuiteReport> {
    let mut tally = Tally::new("subset", 0.0);
    let mut rng = rng(seed, 9);
    let sparse = SparseRegressionOracle::new(sparse_fixture(50, 6, 2, derive_seed(seed, 900), 1.0)?);
    let sskp = SskpOracle::new(sskp_fixture(50, 6, derive_seed(seed, 901))?);
    let svm = SvmOracle::new(svm_fixture(50, 6, 1.0, derive_seed(seed, 902))?);
    let cases: [(&str, &dyn SampledOracle, f64, f64); 3] =
        [("sparse regression", &sparse, 0.0, 1.0), ("sskp", &sskp, 0.0, 1.0), ("svm", &svm, -2.0, 2.0)];
    for (family, oracle, lo, hi) in cases {
        let full = SubsetSample::full(50);
        let listed = SubsetSample::from_indices((0..50).rev().collect(), 50)?;
        for _ in 0..20 {
            let x = relaxed_point(6, lo, hi, &mut rng);
            let a = oracle.evaluate(&x, &full)?;
            let b = oracle.evaluate(&x, &listed)?;
            let same = a.0.to_bits() == b.0.to_bits() && a.1.iter().zip(&b.1).all(|(u, v)| u.to_bits() == v.to_bits());
            tally.record(if same { 0.0 } else { 1.0 }, || format!("{family}: {a:?} vs {b:?}"));
        }
    }
    Ok(tally.finish())
}

/// Subsampled knapsack cuts overshoot the full objective by more than
/// `5σ̂_n` on at most 1% of random (cut, probe) pairs, where `σ̂_n` is the
/// standard deviation of the subsampled value at the probe. The reported
/// error is the overshooting fraction.
pub fn cut_slack(seed: u64) -> Result<SuiteReport> {
    let mut tally = Tally::new("cut-slack", 0.01);
    let mut rng = rng(seed, 10);
    let population = 2000;
    let oracle = SskpOracle::new(sskp_fixture(population, 10, derive_seed(seed, 1000))?);
    let n = scpkit::sampling::default_n_schedule(population);
    let full = SubsetSample::full(population);
    let mut cuts = Vec::new();
    for run in 0..4 {
        let config = EngineConfig::stochastic(1e-4, derive_seed(seed, 1001 + run));
        cuts.extend(run_cutting_planes(&oracle, &oracle.layout(), &config, &mut MilpMaster::new())?.cuts);
    }
    let mut over = 0;
    let pairs = 200;
    for _ in 0..pairs {
        let cut = &cuts[rng.gen_range(0..cuts.len())];
        let z = binary_point(10, &mut rng);
        let values: Vec<f64> = (0..100)
            .map(|_| {
                let s = sample_without_replacement(population, n, rng.gen())?;
                oracle.value(&z, &s)
            })
            .collect::<Result<_>>()?;
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt();
        if cut.value_at(&z) - oracle.value(&z, &full)? > 5.0 * sd {
            over += 1;
        }
    }
    let fraction = f64::from(over) / f64::from(pairs);
    tally.record(fraction, || format!("{over} of {pairs} pairs overshoot by more than 5 sd"));
    Ok(tally.finish())
}

/// Full-mode runs: `η` never decreases, the exit certificate
/// `f(z*) − η* ≤ ε` holds, and enumerable problems finish within `10·|Z|`
/// iterations.
pub fn full_mode(seed: u64) -> Result<SuiteReport> {
    let mut tally = Tally::new("full-mode", CUT_TOL);
    let eps = 1e-4;
    for inst in 0..5 {
        let sskp = SskpOracle::new(sskp_fixture(300, 7, derive_seed(seed, 1100 + inst))?);
        let sparse = SparseRegressionOracle::new(sparse_fixture(200, 7, 2, derive_seed(seed, 1110 + inst), 10.0)?);
        let cases: [(&str, &dyn SampledOracle); 2] = [("sskp", &sskp), ("sparse regression", &sparse)];
        for (family, oracle) in cases {
            let layout = oracle.layout();
            let size = layout.integer_cardinality().expect("binary domain") as usize;
            let config = EngineConfig { max_iterations: 10 * size, ..EngineConfig::full(eps) };
            let report = run_cutting_planes(oracle, &layout, &config, &mut MilpMaster::new())?;
            let finished = report.status == scpkit::engine::RunStatus::Optimal;
            tally.record(if finished { 0.0 } else { f64::INFINITY }, || {
                format!("{family}: {:?} after {} iterations", report.status, report.iterations)
            });
            let excess = (report.full_objective - report.eta - eps).max(0.0);
            tally.record(excess, || format!("{family}: f − η = {}", report.full_objective - report.eta));
            for w in report.trace.windows(2) {
                let drop = (w[0].eta - w[1].eta).max(0.0);
                tally.record(drop, || format!("{family}: η fell from {} to {}", w[0].eta, w[1].eta));
            }
        }
    }
    Ok(tally.finish())
}

fn all_binary_points(p: usize, k: Option<usize>) -> Vec<Vec<f64>> {
    (0u32..1 << p)
        .filter(|m| k.is_none_or(|k| m.count_ones() as usize == k))
        .map(|m| (0..p).map(|j| f64::from((m >> j) & 1)).collect())
        .collect()
}

/// Full-mode cuts never exceed the objective at feasible probes.
pub fn cut_validity(seed: u64) -> Result<SuiteReport> {
    let mut tally = Tally::new("cut-validity", CUT_TOL);
    let mut rng = rng(seed, 7);
    let config = EngineConfig::full(1e-6);
    let full = |n| SubsetSample::full(n);

    let sskp = SskpOracle::new(sskp_fixture(300, 8, derive_seed(seed, 700))?);
    let sparse = SparseRegressionOracle::new(sparse_fixture(200, 8, 3, derive_seed(seed, 701), 10.0)?);
    let svm = SvmOracle::new(svm_fixture(200, 4, 1.0, derive_seed(seed, 702))?);

    let cases: [(&str, &dyn SampledOracle, Vec<Vec<f64>>); 2] =
        [("sskp", &sskp, all_binary_points(8, None)), ("sparse regression", &sparse, all_binary_points(8, Some(3)))];
    for (family, oracle, mut probes) in cases {
        let report = run_cutting_planes(oracle, &oracle.layout(), &config, &mut MilpMaster::new())?;
        probes.extend((0..50).map(|_| relaxed_point(8, 0.0, 1.0, &mut rng)));
        let sample = full(oracle.population());
        for z in &probes {
            let f = oracle.value(z, &sample)?;
            for cut in &report.cuts {
                let v = cut.value_at(z);
                tally.record(rel((v - f).max(0.0), f), || format!("{family}: cut gives {v} above f = {f}"));
            }
        }
    }

    let report = run_cutting_planes(&svm, &svm.layout(), &config, &mut QpMasterSolver::new(1.0)?)?;
    let sample = full(svm.population());
    for _ in 0..200 {
        let theta = relaxed_point(4, -3.0, 3.0, &mut rng);
        let f = svm.value(&theta, &sample)?;
        for cut in &report.cuts {
            let v = cut.value_at(&theta);
            tally.record(rel((v - f).max(0.0), f), || format!("svm: cut gives {v} above f = {f}"));
        }
    }
    Ok(tally.finish())
}

/// The report with every timing field zeroed.
pub fn without_timings(report: &RunReport) -> RunReport {
    let mut r = report.clone();
    r.wall_seconds = 0.0;
    for rec in &mut r.trace {
        rec.master_seconds = 0.0;
        rec.oracle_seconds = 0.0;
    }
    r
}

/// Identical seeds give identical reports, timings aside.
pub fn replay(seed: u64) -> Result<SuiteReport> {
    let mut tally = Tally::new("replay", 0.0);
    let sskp = SskpOracle::new(sskp_fixture(2000, 10, derive_seed(seed, 800))?);
    let sparse = SparseRegressionOracle::new(sparse_fixture(1000, 12, 3, derive_seed(seed, 801), 10.0)?);
    let svm = SvmOracle::new(svm_fixture(1000, 4, 10.0, derive_seed(seed, 802))?);
    let config = EngineConfig::stochastic(1e-4, derive_seed(seed, 803));

    let cases: [(&str, &dyn SampledOracle, bool); 3] =
        [("sskp", &sskp, false), ("sparse regression", &sparse, false), ("svm", &svm, true)];
    for (family, oracle, qp) in cases {
        let run = || -> Result<RunReport> {
            if qp {
                run_cutting_planes(oracle, &oracle.layout(), &config, &mut QpMasterSolver::new(10.0)?)
            } else {
                run_cutting_planes(oracle, &oracle.layout(), &config, &mut MilpMaster::new())
            }
        };
        let (a, b) = (without_timings(&run()?), without_timings(&run()?));
        tally.record(if a == b { 0.0 } else { 1.0 }, || format!("{family}: reports differ"));
    }
    Ok(tally.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_of_a_ramp() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(percentile(v.clone(), 0.95), 95.0);
        assert_eq!(percentile(v, 0.99), 99.0);
    }

    #[test]
    fn binary_points_with_cardinality() {
        assert_eq!(all_binary_points(4, Some(2)).len(), 6);
        assert_eq!(all_binary_points(3, None).len(), 8);
    }
}
