use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use scpkit::datagen::{write_results_csv, ResultRow};
use scpkit_bench::plan::{run_plan, summarize, support_agreement, ExperimentPlan, Family};
use scpkit_bench::verify::{run_all, VerifyOptions};

const EXIT_CELL_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "scpkit", version, about = "Full and subsampled cutting-plane benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed of the first repetition; repetition r uses seed + r.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Repetitions per grid cell.
    #[arg(long, global = true, default_value_t = 10)]
    reps: usize,

    /// Termination tolerance of every cutting-plane run.
    #[arg(long, global = true, default_value_t = 1e-4)]
    epsilon: f64,

    /// CSV destination; defaults to <command>.csv in the working directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Path to covtype.data or covtype.data.gz.
    #[arg(long, global = true)]
    covertype: Option<PathBuf>,

    /// Use the large grids instead of the desk-scale ones.
    #[arg(long, global = true)]
    full: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sparse regression, full vs subsampled cutting planes.
    Table1,
    /// SVM on covertype (needs --covertype).
    Table2,
    /// Stochastic knapsack against enumeration and the linear reformulation.
    Table3,
    /// Solution quality against the per-iteration sample size.
    Sweep {
        #[arg(long, value_enum, default_value_t = SweepFamily::Both)]
        family: SweepFamily,
    },
    /// Run the property suites.
    Verify {
        /// Negate every gradient seen by the gradient suites (mutation check).
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SweepFamily {
    Sparsereg,
    Sskp,
    Both,
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn configure_pool() -> Result<(), String> {
    let Ok(raw) = std::env::var("SCPKIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("SCPKIT_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| e.to_string())
}

fn print_summary(rows: &[ResultRow]) {
    println!(
        "{:<8} {:>8} {:>6} {:>3} {:>5} {:<13} {:>7} {:>4} {:<21} {:>10} {:>9} {:>9} {:>6}",
        "exp", "N", "dim", "k", "sigma", "mode", "n", "reps", "metric", "mean", "stderr", "seconds", "iters"
    );
    for s in summarize(rows) {
        println!(
            "{:<8} {:>8} {:>6} {:>3} {:>5} {:<13} {:>7} {:>4} {:<21} {:>10.4} {:>9.4} {:>9.3} {:>6.1}",
            s.experiment,
            s.population,
            s.dim,
            s.sparsity,
            s.sigma,
            s.mode,
            s.sample_size,
            s.count,
            s.metric_name,
            s.metric_mean,
            s.metric_stderr,
            s.seconds_mean,
            s.iterations_mean
        );
    }
    for a in support_agreement(rows) {
        println!(
            "support agreement N={} p={} k={} sigma={}: {}/{}",
            a.population, a.dim, a.sparsity, a.sigma, a.agree, a.total
        );
    }
}

fn run_experiment(plans: Vec<ExperimentPlan>, out: PathBuf) -> ExitCode {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for plan in &plans {
        match run_plan(plan) {
            Ok(o) => {
                rows.extend(o.rows);
                failures.extend(o.failures);
            }
            Err(e) => return usage_error(&e.to_string()),
        }
    }
    print_summary(&rows);
    if let Err(e) = write_results_csv(&rows, &out) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CELL_FAILURE);
    }
    println!("wrote {} rows to {}", rows.len(), out.display());
    for f in &failures {
        eprintln!("cell failed: {f}");
    }
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CELL_FAILURE)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = configure_pool() {
        return usage_error(&msg);
    }
    if cli.reps == 0 {
        return usage_error("--reps must be at least 1");
    }
    if !(cli.epsilon > 0.0 && cli.epsilon.is_finite()) {
        return usage_error("--epsilon must be positive and finite");
    }

    let (name, mut plans) = match cli.command {
        Command::Verify { corrupt_gradient } => {
            let opts = VerifyOptions { seed: cli.seed, corrupt_gradients: corrupt_gradient };
            return match run_all(&opts) {
                Ok(reports) => {
                    for r in &reports {
                        println!("{r}");
                    }
                    if reports.iter().all(|r| r.passed) {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_CELL_FAILURE)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CELL_FAILURE)
                }
            };
        }
        Command::Table1 => ("table1", vec![ExperimentPlan::table1(cli.full)]),
        Command::Table2 => {
            let Some(path) = cli.covertype.clone() else {
                return usage_error("table2 needs --covertype <path>");
            };
            ("table2", vec![ExperimentPlan::table2(cli.full, path)])
        }
        Command::Table3 => ("table3", vec![ExperimentPlan::table3(cli.full)]),
        Command::Sweep { family } => {
            let families: &[Family] = match family {
                SweepFamily::Sparsereg => &[Family::SparseReg],
                SweepFamily::Sskp => &[Family::Sskp],
                SweepFamily::Both => &[Family::SparseReg, Family::Sskp],
            };
            let plans = families
                .iter()
                .map(|&f| ExperimentPlan::sweep(f, cli.full).expect("sweep families are supported"))
                .collect();
            ("sweep", plans)
        }
    };
    for plan in &mut plans {
        plan.repetitions = cli.reps;
        plan.base_seed = cli.seed;
        plan.epsilon = cli.epsilon;
    }
    let out = cli.out.unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    run_experiment(plans, out)
}
