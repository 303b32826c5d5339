use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use scpkit::oracle::SampledOracle;
use scpkit::problems::sparse_reg::sample_gamma;
use scpkit::problems::{
    RowMatrix, SparseRegressionData, SparseRegressionOracle, SskpData, SskpOracle, SvmData, SvmOracle,
};
use scpkit::sampling::{sample_without_replacement, SubsetSample};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = RowMatrix> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |d| RowMatrix::new(rows, cols, d).unwrap())
}

fn sparse_case() -> impl Strategy<Value = (SparseRegressionData, Vec<f64>, u64)> {
    (6usize..30, 1usize..6).prop_flat_map(|(n, p)| {
        (
            matrix(n, p),
            prop::collection::vec(-3.0..3.0f64, n),
            0.05..5.0f64,
            prop::collection::vec(0.0..1.0f64, p),
            any::<u64>(),
        )
            .prop_map(move |(x, y, g, z, seed)| (SparseRegressionData::new(x, y, p.min(2), g).unwrap(), z, seed))
    })
}

/// `(1/n) y_Sᵀ (I + γ_S X_S diag(z) X_Sᵀ)⁻¹ y_S` by a dense solve.
fn dense_value(data: &SparseRegressionData, x: &RowMatrix, y: &[f64], z: &[f64], s: &SubsetSample) -> f64 {
    let g = sample_gamma(data, s);
    let idx = s.indices();
    let m = idx.len();
    let xs = DMatrix::from_fn(m, z.len(), |i, j| x.row(idx[i])[j] * z[j].sqrt());
    let k = DMatrix::identity(m, m) + (&xs * xs.transpose()) * g;
    let ys = DVector::from_iterator(m, idx.iter().map(|&i| y[i]));
    let a = k.lu().solve(&ys).unwrap();
    ys.dot(&a) / m as f64
}

fn sub(n: usize, seed: u64) -> SubsetSample {
    sample_without_replacement(n, (n / 2).max(1), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sparse_value_matches_a_dense_solve(
        (x, y, gamma, z, seed) in (6usize..30, 1usize..6).prop_flat_map(|(n, p)| (
            matrix(n, p),
            prop::collection::vec(-3.0..3.0f64, n),
            0.05..5.0f64,
            prop::collection::vec(0.0..1.0f64, p),
            any::<u64>(),
        ))
    ) {
        let n = y.len();
        let data = SparseRegressionData::new(x.clone(), y.clone(), 1, gamma).unwrap();
        let oracle = SparseRegressionOracle::new(data.clone());
        for s in [SubsetSample::full(n), sub(n, seed)] {
            let got = oracle.value(&z, &s).unwrap();
            let want = dense_value(&data, &x, &y, &z, &s);
            prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{} vs {}", got, want);
        }
    }

    #[test]
    fn sparse_gradient_matches_central_differences((data, z, seed) in sparse_case()) {
        let oracle = SparseRegressionOracle::new(data.clone());
        let s = sub(data.n(), seed);
        let g = oracle.gradient(&z, &s).unwrap();
        let h = 1e-6;
        for j in 0..z.len() {
            let (mut up, mut dn) = (z.clone(), z.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (oracle.value(&up, &s).unwrap() - oracle.value(&dn, &s).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0), "coord {}: {} vs {}", j, fd, g[j]);
        }
    }

    #[test]
    fn sparse_objective_is_convex_in_z((data, z, seed) in sparse_case(), t in prop::collection::vec(0.0..1.0f64, 5)) {
        let oracle = SparseRegressionOracle::new(data.clone());
        let s = sub(data.n(), seed);
        let (f, g) = oracle.evaluate(&z, &s).unwrap();
        let other: Vec<f64> = t.iter().cycle().take(z.len()).copied().collect();
        let lin = f + g.iter().zip(other.iter().zip(&z)).map(|(g, (o, z))| g * (o - z)).sum::<f64>();
        prop_assert!(oracle.value(&other, &s).unwrap() >= lin - 1e-9 * f.abs().max(1.0));
    }

    #[test]
    fn sskp_cost_splits_over_disjoint_samples(
        (w, r, q, z) in (4usize..40, 1usize..8).prop_flat_map(|(n, k)| (
            matrix(n, k),
            prop::collection::vec(0.0..1.0f64, k),
            0.0..3.0f64,
            prop::collection::vec(0.0..1.0f64, k),
        ))
    ) {
        let n = w.rows();
        let oracle = SskpOracle::new(SskpData::new(r.clone(), w, 4.0, q).unwrap());
        let half = n / 2;
        let a = SubsetSample::from_indices((0..half).collect(), n).unwrap();
        let b = SubsetSample::from_indices((half..n).collect(), n).unwrap();
        let reward: f64 = r.iter().zip(&z).map(|(r, z)| r * z).sum();
        // The reward term is the same on every sample; only the penalty averages.
        let cost = |s: &SubsetSample| oracle.value(&z, s).unwrap() + reward;
        let full = cost(&SubsetSample::full(n));
        let mixed = (half as f64 * cost(&a) + (n - half) as f64 * cost(&b)) / n as f64;
        prop_assert!((full - mixed).abs() <= 1e-12 * full.abs().max(1.0));
    }

    #[test]
    fn sskp_subgradient_inequality(
        (w, r, q, z, o, seed) in (4usize..40, 1usize..8).prop_flat_map(|(n, k)| (
            matrix(n, k),
            prop::collection::vec(0.0..1.0f64, k),
            0.0..3.0f64,
            prop::collection::vec(0.0..1.0f64, k),
            prop::collection::vec(0.0..1.0f64, k),
            any::<u64>(),
        ))
    ) {
        let n = w.rows();
        let oracle = SskpOracle::new(SskpData::new(r, w, 4.0, q).unwrap());
        let s = sub(n, seed);
        let (f, g) = oracle.evaluate(&z, &s).unwrap();
        let lin = f + g.iter().zip(o.iter().zip(&z)).map(|(g, (o, z))| g * (o - z)).sum::<f64>();
        prop_assert!(oracle.value(&o, &s).unwrap() >= lin - 1e-12 * f.abs().max(1.0));
    }

    #[test]
    fn svm_subgradient_inequality(
        (x, labels, t, u, seed) in (4usize..40, 1usize..6).prop_flat_map(|(n, p)| (
            matrix(n, p),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(-2.0..2.0f64, p),
            prop::collection::vec(-2.0..2.0f64, p),
            any::<u64>(),
        ))
    ) {
        let n = x.rows();
        let y: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let oracle = SvmOracle::new(SvmData::new(x, y, 1.0).unwrap());
        let s = sub(n, seed);
        let (f, g) = oracle.evaluate(&t, &s).unwrap();
        let lin = f + g.iter().zip(u.iter().zip(&t)).map(|(g, (u, t))| g * (u - t)).sum::<f64>();
        prop_assert!(oracle.value(&u, &s).unwrap() >= lin - 1e-12 * f.abs().max(1.0));
    }

    #[test]
    fn explicit_full_index_set_matches_the_full_sample((data, z, _seed) in sparse_case()) {
        let n = data.n();
        let oracle = SparseRegressionOracle::new(data);
        let all = SubsetSample::from_indices((0..n).rev().collect(), n).unwrap();
        let (a, ga) = oracle.evaluate(&z, &SubsetSample::full(n)).unwrap();
        let (b, gb) = oracle.evaluate(&z, &all).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(ga, gb);
    }
}
