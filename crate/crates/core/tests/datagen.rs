use std::io::Write;
use std::time::Instant;

use flate2::write::GzEncoder;
use flate2::Compression;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scpkit::datagen::{
    gen_sparse_regression, gen_sskp_instance, load_covertype, mape, read_results_csv, support_fingerprint,
    write_results_csv, ResultRow, SparseRegGenSpec, SskpGenSpec,
};
use scpkit::ScpError;

#[test]
fn sparse_regression_is_deterministic() {
    let spec = SparseRegGenSpec::new(1000, 20, 5, 0.1, 1);
    let a = gen_sparse_regression(&spec).unwrap();
    let b = gen_sparse_regression(&spec).unwrap();
    assert_eq!(a, b);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(a.train.x.as_slice()), bits(b.train.x.as_slice()));
    let other = gen_sparse_regression(&SparseRegGenSpec::new(1000, 20, 5, 0.1, 2)).unwrap();
    assert_ne!(a.train.y, other.train.y);
}

#[test]
fn sparse_regression_noise_has_the_requested_std() {
    let sigma = 0.1;
    let inst = gen_sparse_regression(&SparseRegGenSpec::new(100_000, 20, 5, sigma, 7)).unwrap();
    for split in [&inst.train, &inst.validation, &inst.test] {
        let resid: Vec<f64> = (0..split.n())
            .map(|i| {
                let fit: f64 = split.x.row(i).iter().zip(&inst.beta).map(|(x, b)| x * b).sum();
                split.y[i] - fit
            })
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let std = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64).sqrt();
        assert!((std - sigma).abs() <= 0.05 * sigma, "std {std}");
    }
    assert_eq!(inst.support.len(), 5);
    for j in 0..20 {
        assert_eq!(inst.beta[j] != 0.0, inst.support.contains(&j));
    }
}

#[test]
fn splits_share_beta_but_not_rows() {
    let inst = gen_sparse_regression(&SparseRegGenSpec::new(50, 8, 3, 0.0, 3)).unwrap();
    assert_ne!(inst.train.x, inst.validation.x);
    assert_ne!(inst.validation.x, inst.test.x);
    for split in [&inst.train, &inst.validation, &inst.test] {
        for i in 0..split.n() {
            let fit: f64 = split.x.row(i).iter().zip(&inst.beta).map(|(x, b)| x * b).sum();
            assert!((split.y[i] - fit).abs() < 1e-12);
        }
    }
}

#[test]
fn sparse_regression_rejects_bad_specs() {
    assert!(gen_sparse_regression(&SparseRegGenSpec::new(10, 4, 5, 0.1, 1)).is_err());
    assert!(gen_sparse_regression(&SparseRegGenSpec::new(10, 4, 0, 0.1, 1)).is_err());
    assert!(gen_sparse_regression(&SparseRegGenSpec::new(10, 4, 2, -0.1, 1)).is_err());
}

#[test]
fn sskp_moments_and_ranges() {
    let n = 20_000;
    let spec = SskpGenSpec::new(n, 10, 5);
    let inst = gen_sskp_instance(&spec).unwrap();
    assert_eq!(inst, gen_sskp_instance(&spec).unwrap());
    assert_eq!(inst.data.c, 4.0);
    assert_eq!(inst.data.q, 20.0);
    assert!(inst.data.r.iter().all(|r| (10.0..=20.0).contains(r)));
    assert!(inst.mu.iter().all(|m| (20.0..=30.0).contains(m)));
    assert!(inst.sigma.iter().all(|s| (5.0..=15.0).contains(s)));
    for i in 0..10 {
        let mean = (0..n).map(|j| inst.data.w.get(j, i)).sum::<f64>() / n as f64;
        assert!(
            (mean - inst.mu[i]).abs() <= 3.0 * inst.sigma[i] / (n as f64).sqrt(),
            "item {i}: mean {mean} vs mu {}",
            inst.mu[i]
        );
    }
    assert_eq!(SskpGenSpec::new(10, 30, 1).q, 30.0);
}

fn row(i: usize) -> ResultRow {
    ResultRow {
        experiment: "table1".into(),
        family: "sparsereg".into(),
        population: 1000 + i,
        dim: 50,
        sparsity: 5,
        sigma: 0.1,
        mode: if i.is_multiple_of(2) { "full" } else { "stochastic" }.into(),
        sample_size: 317,
        seed: i as u64,
        oracle_seconds: 0.125 * i as f64,
        master_seconds: 1.0 / 3.0,
        total_seconds: 2.5,
        iterations: i,
        objective: -1.0 / (i as f64 + 7.0),
        metric_name: "mape".into(),
        metric: 0.044,
        fingerprint: support_fingerprint(&[i, i + 1]),
    }
}

#[test]
fn results_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    let mut rows: Vec<ResultRow> = (0..5).map(row).collect();
    rows[2].experiment = "needs, \"quoting\"".into();
    write_results_csv(&rows, &path).unwrap();
    assert_eq!(read_results_csv(&path).unwrap(), rows);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("experiment,family,population,dim,sparsity,sigma,mode,sample_size,seed,"));
    assert!(text.contains("\"needs, \"\"quoting\"\"\""));
}

#[test]
fn empty_results_give_a_header_only_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    write_results_csv(&[], &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(read_results_csv(&path).unwrap().is_empty());
}

#[test]
fn ten_thousand_rows_write_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.csv");
    let rows: Vec<ResultRow> = (0..10_000).map(row).collect();
    let t0 = Instant::now();
    write_results_csv(&rows, &path).unwrap();
    assert!(t0.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn write_error_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("rows.csv");
    let err = write_results_csv(&[row(0)], &path).unwrap_err();
    assert!(err.to_string().contains("missing"), "{err}");
}

#[test]
fn mape_matches_the_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.gen_range(1..200);
        let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let actual: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut direct = 0.0;
        for i in 0..n {
            direct += (pred[i] - actual[i]).abs() / actual[i].abs().max(1e-8);
        }
        direct /= n as f64;
        let got = mape(&pred, &actual).unwrap();
        assert!((got - direct).abs() <= 1e-12 * direct.max(1.0));
    }
    let actual = [1.0, -2.0, 4.0];
    let scaled: Vec<f64> = actual.iter().map(|a| 1.1 * a).collect();
    assert!((mape(&scaled, &actual).unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(mape(&actual, &actual).unwrap(), 0.0);
    assert!(mape(&[1.0], &[1.0, 2.0]).is_err());
}

/// Rows whose first feature is the row number, so samples can be told apart.
fn covertype_text(rows: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for i in 0..rows {
        let mut fields = vec![i.to_string()];
        fields.extend((1..54).map(|_| rng.gen_range(0..3000).to_string()));
        fields.push(rng.gen_range(1..=7).to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[test]
fn covertype_split_is_disjoint_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("covtype.data");
    std::fs::write(&path, covertype_text(300, 1)).unwrap();
    let split = load_covertype(&path, 4, 100, 1e6).unwrap();
    assert_eq!(split.rows_loaded, 300);
    assert_eq!((split.train.n(), split.test.n(), split.train.p()), (100, 100, 54));
    let ids = |d: &scpkit::problems::SvmData| (0..d.n()).map(|i| d.x.get(i, 0) as usize).collect::<Vec<_>>();
    let train = ids(&split.train);
    assert!(ids(&split.test).iter().all(|i| !train.contains(i)));
    assert!(split.train.y.iter().all(|y| *y == 1.0 || *y == -1.0));
    assert_eq!(load_covertype(&path, 4, 100, 1e6).unwrap(), split);
    assert_ne!(load_covertype(&path, 5, 100, 1e6).unwrap().train, split.train);
}

#[test]
fn covertype_labels_class_two_as_positive() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("covtype.data");
    let mut text = String::new();
    for i in 0..10 {
        let label = if i < 5 { 2 } else { 1 + (i % 3) * 3 };
        let mut fields = vec![i.to_string(); 54];
        fields.push(label.to_string());
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    let split = load_covertype(&path, 0, 5, 1.0).unwrap();
    for d in [&split.train, &split.test] {
        for i in 0..d.n() {
            let id = d.x.get(i, 0) as usize;
            assert_eq!(d.y[i], if id < 5 { 1.0 } else { -1.0 });
        }
    }
}

#[test]
fn gzipped_covertype_matches_plain() {
    let dir = tempfile::tempdir().unwrap();
    let text = covertype_text(120, 2);
    let plain = dir.path().join("covtype.data");
    let gz = dir.path().join("covtype.data.gz");
    std::fs::write(&plain, &text).unwrap();
    let mut enc = GzEncoder::new(std::fs::File::create(&gz).unwrap(), Compression::default());
    enc.write_all(text.as_bytes()).unwrap();
    enc.finish().unwrap();
    assert_eq!(load_covertype(&plain, 9, 50, 1.0).unwrap(), load_covertype(&gz, 9, 50, 1.0).unwrap());
}

#[test]
fn malformed_covertype_row_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("covtype.data");
    let mut lines: Vec<String> = covertype_text(20, 3).lines().map(String::from).collect();
    lines[6] = lines[6].replacen(',', ",x", 1);
    std::fs::write(&path, lines.join("\n")).unwrap();
    match load_covertype(&path, 0, 5, 1.0) {
        Err(ScpError::Parse { line, .. }) => assert_eq!(line, 7),
        other => panic!("expected a parse error, got {other:?}"),
    }

    let mut lines: Vec<String> = covertype_text(20, 3).lines().map(String::from).collect();
    lines[2].push_str(",5");
    std::fs::write(&path, lines.join("\n")).unwrap();
    assert!(matches!(load_covertype(&path, 0, 5, 1.0), Err(ScpError::Parse { line: 3, .. })));

    let mut lines: Vec<String> = covertype_text(20, 3).lines().map(String::from).collect();
    let cut = lines[9].rfind(',').unwrap();
    lines[9].truncate(cut);
    lines[9].push_str(",8");
    std::fs::write(&path, lines.join("\n")).unwrap();
    assert!(matches!(load_covertype(&path, 0, 5, 1.0), Err(ScpError::Parse { line: 10, .. })));
}

#[test]
fn covertype_needs_two_disjoint_samples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("covtype.data");
    std::fs::write(&path, covertype_text(30, 4)).unwrap();
    assert!(load_covertype(&path, 0, 15, 1.0).is_ok());
    assert!(matches!(load_covertype(&path, 0, 16, 1.0), Err(ScpError::InvalidArgument(_))));
    assert!(load_covertype(&dir.path().join("absent"), 0, 1, 1.0).is_err());
}
