use std::path::Path;
use std::process::{Command, Output};

use scpkit::datagen::{read_results_csv, ResultRow};

fn scpkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scpkit")).args(args).env_remove("SCPKIT_THREADS").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn without_timings(path: &Path) -> Vec<ResultRow> {
    let mut rows = read_results_csv(path).unwrap();
    for r in &mut rows {
        r.oracle_seconds = 0.0;
        r.master_seconds = 0.0;
        r.total_seconds = 0.0;
    }
    rows
}

#[test]
fn verify_passes_and_catches_corrupted_gradients() {
    let ok = scpkit(&["verify"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));

    let bad = scpkit(&["verify", "--corrupt-gradient"]);
    assert_eq!(code(&bad), 1);
    let text = String::from_utf8_lossy(&bad.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL subgradient")), "{text}");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&scpkit(&["table2"])), 2);
    assert_eq!(code(&scpkit(&["sweep", "--reps", "0"])), 2);
    assert_eq!(code(&scpkit(&["sweep", "--epsilon", "-1"])), 2);
    assert_eq!(code(&scpkit(&["table4"])), 2);
    assert_eq!(code(&scpkit(&[])), 2);

    let threads =
        Command::new(env!("CARGO_BIN_EXE_scpkit")).args(["verify"]).env("SCPKIT_THREADS", "many").output().unwrap();
    assert_eq!(code(&threads), 2);
    assert!(String::from_utf8_lossy(&threads.stderr).contains("SCPKIT_THREADS"));
}

#[test]
fn help_exits_cleanly() {
    let out = scpkit(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("table1"));
}

#[test]
fn reruns_reproduce_the_csv_up_to_timings() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = scpkit(&["sweep", "--family", "sskp", "--reps", "2", "--seed", "7", "--out", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let rows = without_timings(&a);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.seed == 7 || r.seed == 8));
    assert_eq!(rows, without_timings(&b));
}

#[test]
fn single_thread_pool_gives_the_same_rows() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let run = |path: &Path, threads: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_scpkit"));
        cmd.args(["sweep", "--family", "sskp", "--reps", "2", "--out", path.to_str().unwrap()]);
        match threads {
            Some(t) => cmd.env("SCPKIT_THREADS", t),
            None => cmd.env_remove("SCPKIT_THREADS"),
        };
        assert!(cmd.output().unwrap().status.success());
    };
    run(&a, Some("1"));
    run(&b, Some("3"));
    assert_eq!(without_timings(&a), without_timings(&b));
}
