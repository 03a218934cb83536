//! Command-line interface: compute the metric-induced quantities of one
//! operator, run the randomized verification suites, or rank a set of
//! bounds on a concrete operand tuple.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use shkit::bounds::{self, BoundResult};
use shkit::error::Result;
use shkit::harness::{self, TrialConfig};
use shkit::io::{self, MatrixFile};
use shkit::matrix::ComplexMatrix;
use shkit::operator::CompatibleOperator;
use shkit::space::make_space;

#[derive(Parser)]
#[command(
    name = "shkit",
    about = "Operator quantities, inequality checks, and randomized verification over a positive-semidefinite metric",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute one quantity of an operator under a metric.
    Compute(ComputeArgs),
    /// Run the randomized bound and identity suites.
    Verify(VerifyArgs),
    /// Evaluate several bounds on one operand tuple and rank them by
    /// sharpness.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    /// Numerical radius under the metric.
    Wa,
    /// Operator seminorm under the metric.
    Norm,
    /// Spectral radius restricted to the metric's range.
    Sr,
    /// The metric adjoint, printed as a matrix file.
    Sharp,
    /// The equivalent operator on the metric's range, printed as a matrix
    /// file.
    Compress,
}

#[derive(Args)]
struct ComputeArgs {
    /// Quantity to compute.
    #[arg(value_enum)]
    quantity: Quantity,
    /// Metric matrix file (positive semidefinite).
    #[arg(long)]
    metric: PathBuf,
    /// Operator matrix file.
    #[arg(long)]
    op: PathBuf,
    /// Relative tolerance for rank detection and compatibility checks.
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Space dimension of every generated trial.
    #[arg(long)]
    dim: usize,
    /// Metric rank (1..=dim); below dim exercises degenerate metrics.
    #[arg(long)]
    rank: usize,
    /// Number of random trials.
    #[arg(long, default_value_t = 500)]
    trials: u64,
    /// Master seed; each trial derives its own stream from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Verdict tolerance (default 1e-8, or 1e-6 under --stress).
    #[arg(long)]
    tol: Option<f64>,
    /// Bounds to check: `all` or a comma-separated id list.
    #[arg(long, default_value = "all")]
    bounds: String,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Widen the metric's eigenvalue spread from 4 to 8 decades.
    #[arg(long)]
    stress: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated bound ids; they must consume the same operand tuple.
    #[arg(long)]
    bounds: String,
    /// Metric matrix file.
    #[arg(long)]
    metric: PathBuf,
    /// Operand matrix files, as many as the bounds' arity requires.
    #[arg(long, num_args = 1..)]
    ops: Vec<PathBuf>,
    /// Weight for the lambda-parameterized bounds (default 0.5).
    #[arg(long)]
    lambda: Option<f64>,
    /// Write the ranking as CSV to this file instead of printing a table.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Relative tolerance for rank detection and compatibility checks.
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    /// Verdict tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

fn main() {
    init_threads();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    std::process::exit(code);
}

/// Honors SHKIT_THREADS as a cap on the worker pool.
fn init_threads() {
    if let Ok(raw) = std::env::var("SHKIT_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("warning: ignoring SHKIT_THREADS={raw:?} (want a positive integer)");
            }
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Compute(args) => compute(args),
        Cmd::Verify(args) => verify(args),
        Cmd::Compare(args) => compare(args),
    }
}

fn print_matrix(m: &ComplexMatrix) {
    let mut text = serde_json::to_string_pretty(&MatrixFile::from_matrix(m))
        .expect("matrix file serializes");
    text.push('\n');
    print!("{text}");
}

fn compute(args: ComputeArgs) -> Result<i32> {
    let metric = io::read_matrix(&args.metric)?;
    let space = Arc::new(make_space(&metric, args.rtol)?);
    let mat = io::read_matrix(&args.op)?;
    let op = CompatibleOperator::new(&space, mat)?;
    match args.quantity {
        Quantity::Wa => println!("{}", io::format_sig12(op.a_numerical_radius())),
        Quantity::Norm => println!("{}", io::format_sig12(op.a_norm())),
        Quantity::Sr => println!("{}", io::format_sig12(op.a_spectral_radius())),
        Quantity::Sharp => print_matrix(op.sharp().matrix()),
        Quantity::Compress => print_matrix(&space.compress(op.matrix())),
    }
    Ok(0)
}

fn verify(args: VerifyArgs) -> Result<i32> {
    let cfg = TrialConfig {
        dim: args.dim,
        rank: args.rank,
        trials: args.trials,
        master_seed: args.seed,
        tol: args.tol.unwrap_or(if args.stress { 1e-6 } else { 1e-8 }),
        stress: args.stress,
        bound_ids: harness::resolve_bounds(&args.bounds)?,
        identity_ids: harness::all_identity_ids(),
    };
    cfg.validate()?;
    let report = harness::run_suite(&cfg)?;
    let json = report.to_json();
    match &args.out {
        Some(path) => std::fs::write(path, &json)?,
        None => print!("{json}"),
    }
    let evals: u64 = report.bounds.values().map(|b| b.trials).sum();
    let violations: u64 = report.bounds.values().map(|b| b.violations).sum();
    let worst_residual = report
        .identities
        .values()
        .map(|s| s.max_residual)
        .fold(0.0f64, f64::max);
    eprintln!(
        "{} bound evaluations ({} violations), {} identities (max residual {:.3e}), {:.2}s: {}",
        evals,
        violations,
        report.identities.len(),
        worst_residual,
        report.wall_time.as_secs_f64(),
        if report.all_hold { "all hold" } else { "FAILURES" }
    );
    if !report.trial_failures.is_empty() {
        eprintln!("{} trial(s) failed to run; see the report", report.trial_failures.len());
    }
    Ok(if report.all_hold { 0 } else { 1 })
}

fn render_table(rows: &[BoundResult]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<18} {:>18} {:>18} {:>18}  {}\n",
        "bound_id", "lhs", "rhs", "slack", "holds"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<18} {:>18} {:>18} {:>18}  {}\n",
            r.bound_id,
            io::format_sig12(r.lhs),
            io::format_sig12(r.rhs),
            io::format_sig12(r.slack),
            if r.holds { "yes" } else { "NO" }
        ));
    }
    out
}

fn render_csv(rows: &[BoundResult]) -> String {
    let mut out = String::from("bound_id,lhs,rhs,slack\r\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\r\n",
            r.bound_id,
            io::format_sig12(r.lhs),
            io::format_sig12(r.rhs),
            io::format_sig12(r.slack)
        ));
    }
    out
}

fn compare(args: CompareArgs) -> Result<i32> {
    let ids = harness::resolve_bounds(&args.bounds)?;
    let metric = io::read_matrix(&args.metric)?;
    let space = Arc::new(make_space(&metric, args.rtol)?);
    let operands = args.ops.iter().map(|p| io::read_matrix(p)).collect::<Result<Vec<_>>>()?;
    let rows = bounds::compare_bounds(&space, &ids, &operands, args.lambda, args.tol)?;
    match &args.csv {
        Some(path) => std::fs::write(path, render_csv(&rows))?,
        None => print!("{}", render_table(&rows)),
    }
    Ok(0)
}
