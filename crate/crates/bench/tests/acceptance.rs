//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Criterion 6 needs the covertype file; point `SCPKIT_COVERTYPE` at
//! `covtype.data` or `covtype.data.gz` to run it, otherwise it is skipped.

use std::process::ExitCode;
use std::time::Instant;

use scpkit::datagen::{gen_sskp, SskpGenSpec};
use scpkit::engine::{run_cutting_planes, EngineConfig, MilpMaster, Mode};
use scpkit::oracle::SampledOracle;
use scpkit::problems::SskpOracle;
use scpkit::sampling::NSchedule;
use scpkit_bench::experiments::{
    normalized_objective, run_sparse_cell, run_svm_cell, solve_sskp, sskp_enumerate, sskp_reference, SparseCell,
};
use scpkit_bench::plan::{run_plan, summarize, ExperimentPlan, Family, SummaryLine};
use scpkit_bench::verify::{run_all, VerifyOptions};

const EPSILON: f64 = 1e-4;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Verdict;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Full cutting planes at ε = 1e-8 with exact master solves against 2^10 enumeration.
fn oracle_equivalence() -> Verdict {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for seed in 1..=20u64 {
        let data = gen_sskp(&SskpGenSpec::new(1_000, 10, seed)).unwrap();
        let (best, _) = sskp_enumerate(&data);
        let oracle = SskpOracle::new(data);
        let config = EngineConfig { master_gap: 0.0, seed, ..EngineConfig::full(1e-8) };
        let report = run_cutting_planes(&oracle, &oracle.layout(), &config, &mut MilpMaster::new()).unwrap();
        // An optimum of exactly 0 (nothing worth selecting) is compared absolutely.
        let scale = if best == 0.0 { 1.0 } else { best.abs() };
        worst = worst.max((-report.full_objective - best).abs() / scale);
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-9 && secs < 30.0,
        format!("20 seeds, worst relative error {worst:.2e} (tol 1e-9), {secs:.1}s (limit 30s)"),
    )
}

/// SCP at n = min(N, 10√N), mean normalized objective per cell over 20 seeds.
fn stochastic_near_optimality() -> Verdict {
    let t0 = Instant::now();
    let mut scp_secs = 0.0;
    let mut cells = Vec::new();
    let mut ok = true;
    for (n, k) in [(1_000, 10), (10_000, 10), (10_000, 20)] {
        let mut scores = Vec::new();
        for seed in 1..=20u64 {
            let data = gen_sskp(&SskpGenSpec::new(n, k, seed)).unwrap();
            let (optimum, _) = sskp_reference(&data, EPSILON, seed).unwrap();
            let (out, value) = solve_sskp(&data, Mode::Stochastic, NSchedule::SqrtTen, EPSILON, seed).unwrap();
            scp_secs += out.total_seconds;
            scores.push(normalized_objective(value, optimum));
        }
        let m = mean(&scores);
        ok &= m >= 0.995;
        cells.push(format!("({n},{k}) {:.2}%", 100.0 * m));
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        ok && secs < 120.0,
        format!(
            "{} (min 99.5%), {secs:.1}s including references, {scp_secs:.1}s in SCP (limit 120s)",
            cells.join(", ")
        ),
    )
}

/// SCP and full-CP supports on the desk regression cell, 10 seeds.
fn solution_agreement() -> Verdict {
    let t0 = Instant::now();
    let mut agree = 0;
    let mut worst_gap = 0.0f64;
    for seed in 1..=10u64 {
        let r = run_sparse_cell(&SparseCell::new(10_000, 50, 5, 0.1, seed)).unwrap();
        if r.full.support == r.scp.support {
            agree += 1;
            worst_gap = worst_gap.max((r.full.metric - r.scp.metric).abs());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        agree >= 9 && worst_gap <= 1e-3 && secs < 300.0,
        format!(
            "supports agree {agree}/10 (min 9), max MAPE gap on agreeing runs {:.4} pp (max 0.1 pp), {secs:.1}s (limit 300s)",
            100.0 * worst_gap
        ),
    )
}

/// Consecutive sweep cells may drop by at most the standard error of their difference.
fn monotone_cells(lines: &[SummaryLine]) -> Vec<String> {
    let mut bad = Vec::new();
    let mut cells: Vec<&SummaryLine> = lines.iter().filter(|s| s.mode == "stochastic").collect();
    cells.sort_by_key(|s| (s.population, s.sample_size));
    for w in cells.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.population != b.population {
            continue;
        }
        let se = (a.metric_stderr.powi(2) + b.metric_stderr.powi(2)).sqrt();
        if b.metric_mean < a.metric_mean - se - 1e-12 {
            bad.push(format!(
                "N={} n={}->{}: {:.3}->{:.3} (se {:.3})",
                a.population, a.sample_size, b.sample_size, a.metric_mean, b.metric_mean, se
            ));
        }
    }
    bad
}

fn sample_size_monotonicity() -> Verdict {
    let t0 = Instant::now();
    let sparse = ExperimentPlan::sweep(Family::SparseReg, false).unwrap();
    let mut sskp = ExperimentPlan::sweep(Family::Sskp, false).unwrap();
    sskp.repetitions = 20;
    let sparse_lines = summarize(&run_plan(&sparse).unwrap().rows);
    let sskp_lines = summarize(&run_plan(&sskp).unwrap().rows);
    let mut bad = monotone_cells(&sparse_lines);
    bad.extend(monotone_cells(&sskp_lines));
    let anchor = sparse_lines
        .iter()
        .find(|s| s.mode == "stochastic" && s.population == 10_000 && s.sample_size == 300)
        .map_or(f64::NAN, |s| s.metric_mean);
    let secs = t0.elapsed().as_secs_f64();
    let drops = if bad.is_empty() { "none".to_string() } else { bad.join("; ") };
    verdict(
        bad.is_empty() && anchor >= 0.9,
        format!(
            "drops beyond one standard error: {drops}; sparse (1e4, 300) agreement {:.0}% (min 90%), {secs:.1}s",
            100.0 * anchor
        ),
    )
}

fn speedup_ordering() -> Verdict {
    let t0 = Instant::now();
    let mut sparse_wins = 0;
    let mut sskp_wins = 0;
    let (mut sparse_ratio, mut sskp_ratio) = (Vec::new(), Vec::new());
    for seed in 1..=10u64 {
        let r = run_sparse_cell(&SparseCell::new(100_000, 50, 5, 0.1, seed)).unwrap();
        if r.scp.total_seconds < r.full.total_seconds {
            sparse_wins += 1;
        }
        sparse_ratio.push(r.full.total_seconds / r.scp.total_seconds);

        let data = gen_sskp(&SskpGenSpec::new(100_000, 10, seed)).unwrap();
        let (full, _) = solve_sskp(&data, Mode::Full, NSchedule::SqrtTen, EPSILON, seed).unwrap();
        let (scp, _) = solve_sskp(&data, Mode::Stochastic, NSchedule::SqrtTen, EPSILON, seed).unwrap();
        if scp.total_seconds < full.total_seconds {
            sskp_wins += 1;
        }
        sskp_ratio.push(full.total_seconds / scp.total_seconds);
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        sparse_wins >= 9 && sskp_wins >= 9,
        format!(
            "SCP faster in {sparse_wins}/10 sparse and {sskp_wins}/10 SSKP pairs (min 9), mean speedup {:.1}x / {:.1}x, {secs:.1}s",
            mean(&sparse_ratio),
            mean(&sskp_ratio)
        ),
    )
}

fn svm_accuracy() -> Verdict {
    let Some(path) = std::env::var_os("SCPKIT_COVERTYPE") else {
        return Verdict::Skip("SCPKIT_COVERTYPE not set".into());
    };
    let t0 = Instant::now();
    let (mut full, mut scp) = (Vec::new(), Vec::new());
    for seed in 1..=10u64 {
        let r = run_svm_cell(std::path::Path::new(&path), 10_000, seed, EPSILON, NSchedule::SqrtTen).unwrap();
        full.push(r.full.metric);
        scp.push(r.scp.metric);
    }
    let (f, s) = (mean(&full), mean(&scp));
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        f >= 0.735 && (f - s).abs() <= 0.015,
        format!(
            "full-CP accuracy {:.2}% (min 73.5%), SCP {:.2}% (within 1.5 pp), 10 seeds, {secs:.1}s",
            100.0 * f,
            100.0 * s
        ),
    )
}

fn property_suites() -> Verdict {
    let t0 = Instant::now();
    let reports = run_all(&VerifyOptions { seed: 1, corrupt_gradients: false }).unwrap();
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        failed.is_empty(),
        format!(
            "{}/{} suites pass{}, {secs:.1}s",
            reports.len() - failed.len(),
            reports.len(),
            if failed.is_empty() { String::new() } else { format!(" (failing: {})", failed.join(", ")) }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 7] = [
        ("oracle equivalence (SSKP)", oracle_equivalence),
        ("stochastic near-optimality (SSKP)", stochastic_near_optimality),
        ("solution agreement (sparse regression)", solution_agreement),
        ("sample-size monotonicity", sample_size_monotonicity),
        ("speedup ordering at N=1e5", speedup_ordering),
        ("SVM accuracy on covertype", svm_accuracy),
        ("property suites", property_suites),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let line = match check() {
            Verdict::Pass(d) => format!("PASS criterion {} {name}: {d}", i + 1),
            Verdict::Fail(d) => {
                failures += 1;
                format!("FAIL criterion {} {name}: {d}", i + 1)
            }
            Verdict::Skip(d) => format!("SKIP criterion {} {name}: {d}", i + 1),
        };
        println!("{line}");
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
