use scpkit::datagen::{gen_sskp, SskpGenSpec};
use scpkit::engine::{
    run_cutting_planes, solve_nlp_subproblem, EngineConfig, MasterSolver, MilpMaster, Mode, QpMasterSolver, RunReport,
    RunStatus,
};
use scpkit::layout::{IntBounds, LinearConstraint, RealBounds, Sense, VariableLayout};
use scpkit::oracle::SampledOracle;
use scpkit::problems::sskp::sskp_full_objective;
use scpkit::problems::{RowMatrix, SparseRegressionData, SparseRegressionOracle, SskpOracle, SvmData, SvmOracle};
use scpkit::sampling::SubsetSample;
use scpkit::{Result, ScpError};

/// `f(z) = (1/n) Σ (z − d_i)²` over integer `z ∈ [0, 10]`.
struct Quadratic1d {
    d: Vec<f64>,
}

impl SampledOracle for Quadratic1d {
    fn population(&self) -> usize {
        self.d.len()
    }
    fn layout(&self) -> VariableLayout {
        VariableLayout::new(vec![IntBounds { lo: 0, hi: 10 }], vec![], vec![]).unwrap()
    }
    fn value(&self, x: &[f64], s: &SubsetSample) -> Result<f64> {
        Ok(s.indices().iter().map(|&i| (x[0] - self.d[i]).powi(2)).sum::<f64>() / s.len() as f64)
    }
    fn gradient(&self, x: &[f64], s: &SubsetSample) -> Result<Vec<f64>> {
        Ok(vec![s.indices().iter().map(|&i| 2.0 * (x[0] - self.d[i])).sum::<f64>() / s.len() as f64])
    }
    fn lower_bound(&self) -> f64 {
        0.0
    }
    fn warm_start(&self, _s: &SubsetSample) -> Result<Vec<f64>> {
        Ok(vec![0.0])
    }
}

/// One integer and one continuous variable, with no subproblem solver.
struct Mixed;

impl SampledOracle for Mixed {
    fn population(&self) -> usize {
        1
    }
    fn layout(&self) -> VariableLayout {
        VariableLayout::new(vec![IntBounds { lo: 0, hi: 1 }], vec![RealBounds { lo: -1.0, hi: 1.0 }], vec![]).unwrap()
    }
    fn value(&self, x: &[f64], _s: &SubsetSample) -> Result<f64> {
        Ok((x[0] - 0.5).powi(2) + x[1] * x[1])
    }
    fn gradient(&self, x: &[f64], _s: &SubsetSample) -> Result<Vec<f64>> {
        Ok(vec![2.0 * (x[0] - 0.5), 2.0 * x[1]])
    }
    fn lower_bound(&self) -> f64 {
        0.0
    }
    fn warm_start(&self, _s: &SubsetSample) -> Result<Vec<f64>> {
        Ok(vec![1.0, 0.5])
    }
}

fn sskp_brute_force(oracle: &SskpOracle) -> f64 {
    let k = oracle.data().k();
    let full = SubsetSample::full(oracle.population());
    (0u32..1 << k)
        .map(|mask| {
            let z: Vec<f64> = (0..k).map(|i| f64::from((mask >> i) & 1)).collect();
            sskp_full_objective(oracle.data(), &z, &full).unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn run(oracle: &dyn SampledOracle, config: &EngineConfig) -> RunReport {
    run_cutting_planes(oracle, &oracle.layout(), config, &mut MilpMaster::new()).unwrap()
}

#[test]
fn one_dimensional_toy_converges_fast() {
    let oracle = Quadratic1d { d: vec![3.0; 3] };
    let report = run(&oracle, &EngineConfig::full(1e-6));
    assert_eq!(report.status, RunStatus::Optimal);
    assert_eq!(report.solution, vec![3.0]);
    assert!(report.iterations <= 3, "took {} iterations", report.iterations);
    assert_eq!(report.full_objective, 0.0);
}

#[test]
fn sskp_full_mode_matches_enumeration() {
    let oracle = SskpOracle::new(gen_sskp(&SskpGenSpec::new(1000, 10, 17)).unwrap());
    let report = run(&oracle, &EngineConfig::full(1e-9));
    assert_eq!(report.status, RunStatus::Optimal);
    let best = sskp_brute_force(&oracle);
    let got = -report.full_objective;
    assert!((got - best).abs() <= 1e-9 * best.abs(), "{got} vs {best}");
}

#[test]
fn full_mode_certificate_and_monotone_eta() {
    for seed in 0..5 {
        let oracle = SskpOracle::new(gen_sskp(&SskpGenSpec::new(300, 8, seed)).unwrap());
        let eps = 1e-4;
        let report = run(&oracle, &EngineConfig::full(eps));
        assert_eq!(report.status, RunStatus::Optimal);
        assert!(report.full_objective - report.eta <= eps);
        assert_eq!(report.trace.len(), report.iterations);
        for w in report.trace.windows(2) {
            assert!(w[1].eta >= w[0].eta - 1e-9, "{} then {}", w[0].eta, w[1].eta);
        }
    }
}

#[test]
fn full_mode_cuts_underestimate_the_objective() {
    let oracle = SskpOracle::new(gen_sskp(&SskpGenSpec::new(200, 8, 3)).unwrap());
    let report = run(&oracle, &EngineConfig::full(1e-6));
    let full = SubsetSample::full(200);
    for mask in 0u32..256 {
        let z: Vec<f64> = (0..8).map(|i| f64::from((mask >> i) & 1)).collect();
        let f = oracle.value(&z, &full).unwrap();
        for cut in &report.cuts {
            assert!(cut.value_at(&z) <= f + 1e-9 * (1.0 + f.abs()));
        }
    }
}

#[test]
fn stochastic_runs_replay_exactly() {
    let oracle = SskpOracle::new(gen_sskp(&SskpGenSpec::new(2000, 10, 5)).unwrap());
    let config = EngineConfig::stochastic(1e-4, 99);
    let a = run(&oracle, &config);
    let b = run(&oracle, &config);
    let strip = |r: &RunReport| {
        r.trace
            .iter()
            .map(|t| (t.sample_seed, t.sample_size, t.eta.to_bits(), t.oracle_value.to_bits()))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(a.solution, b.solution);
    assert_eq!(a.cuts, b.cuts);
    assert_eq!(a.trace[0].sample_size, 448);
    let c = run(&oracle, &EngineConfig::stochastic(1e-4, 100));
    assert_ne!(strip(&a)[0].0, strip(&c)[0].0);
}

#[test]
fn stochastic_mode_is_near_optimal_on_sskp() {
    let oracle = SskpOracle::new(gen_sskp(&SskpGenSpec::new(1000, 10, 17)).unwrap());
    let best = sskp_brute_force(&oracle);
    let mean = (0..20).map(|s| -run(&oracle, &EngineConfig::stochastic(1e-4, s)).full_objective).sum::<f64>() / 20.0;
    assert!(mean >= 0.995 * best, "{mean} vs {best}");
}

#[test]
fn iteration_cap_is_reported() {
    let oracle = SskpOracle::new(gen_sskp(&SskpGenSpec::new(300, 10, 1)).unwrap());
    let config = EngineConfig { max_iterations: 1, epsilon: 1e-9, ..EngineConfig::default() };
    let report = run(&oracle, &config);
    assert_eq!(report.status, RunStatus::IterationCap);
    assert_eq!(report.iterations, 1);
    assert_eq!(report.solution.len(), 10);
}

#[test]
fn enumerable_problems_terminate_within_ten_times_domain() {
    for seed in 0..3 {
        let oracle = SskpOracle::new(gen_sskp(&SskpGenSpec::new(100, 4, seed)).unwrap());
        let config = EngineConfig { max_iterations: 10 * 16, epsilon: 1e-9, ..EngineConfig::stochastic(1e-9, seed) };
        assert_eq!(run(&oracle, &config).status, RunStatus::Optimal);
    }
}

#[test]
fn infeasible_static_constraints_are_reported() {
    let oracle = SskpOracle::new(gen_sskp(&SskpGenSpec::new(50, 2, 0)).unwrap());
    let layout =
        VariableLayout::binary(2).with_constraint(LinearConstraint::new(vec![1.0, 1.0], Sense::Ge, 3.0)).unwrap();
    let report = run_cutting_planes(&oracle, &layout, &EngineConfig::full(1e-6), &mut MilpMaster::new()).unwrap();
    assert_eq!(report.status, RunStatus::Infeasible);
}

#[test]
fn subproblem_hook() {
    let x = RowMatrix::new(4, 3, (0..12).map(f64::from).collect()).unwrap();
    let sparse = SparseRegressionOracle::new(SparseRegressionData::new(x, vec![1.0; 4], 2, 1.0).unwrap());
    let layout = sparse.layout();
    let theta = solve_nlp_subproblem(&sparse, &[1.0, 1.0, 0.0], &SubsetSample::full(4), &layout).unwrap();
    assert!(theta.is_empty());

    let sskp = SskpOracle::new(gen_sskp(&SskpGenSpec::new(10, 3, 0)).unwrap());
    let theta = solve_nlp_subproblem(&sskp, &[1.0, 0.0, 0.0], &SubsetSample::full(10), &sskp.layout()).unwrap();
    assert!(theta.is_empty());

    let err = solve_nlp_subproblem(&Mixed, &[1.0], &SubsetSample::full(1), &Mixed.layout()).unwrap_err();
    assert!(matches!(err, ScpError::UnsupportedProblem(_)));
    let err =
        run_cutting_planes(&Mixed, &Mixed.layout(), &EngineConfig::full(1e-6), &mut MilpMaster::new()).unwrap_err();
    assert!(matches!(err, ScpError::UnsupportedProblem(_)));
}

#[test]
fn svm_runs_through_the_quadratic_master() {
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let t = f64::from(i) / 40.0;
            vec![t, 1.0 - 2.0 * t]
        })
        .collect();
    let y = rows.iter().map(|r| if r[1] < 0.1 { 1.0 } else { -1.0 }).collect();
    let data = SvmData::new(RowMatrix::from_rows(&rows).unwrap(), y, 10.0).unwrap();
    let oracle = SvmOracle::new(data.clone());
    let mut master = QpMasterSolver::new(10.0).unwrap();
    let report = run_cutting_planes(&oracle, &oracle.layout(), &EngineConfig::full(1e-6), &mut master).unwrap();
    assert_eq!(report.status, RunStatus::Optimal);
    assert!(report.z().is_empty());
    assert_eq!(report.theta().len(), 2);
    assert!(data.accuracy(report.theta()) >= 0.9);
    assert!(master.all_converged);
    assert!(master.score(report.theta(), report.full_objective).is_finite());
}

#[test]
fn rejects_bad_config() {
    let oracle = Quadratic1d { d: vec![1.0] };
    for config in [
        EngineConfig { epsilon: 0.0, ..EngineConfig::default() },
        EngineConfig { max_iterations: 0, ..EngineConfig::default() },
        EngineConfig { lb: Some(f64::NAN), ..EngineConfig::default() },
    ] {
        assert!(run_cutting_planes(&oracle, &oracle.layout(), &config, &mut MilpMaster::new()).is_err());
    }
    assert_eq!(EngineConfig::default().mode, Mode::Full);
}
