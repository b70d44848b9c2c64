//! Command-line front end: `gen`, `solve`, `exact`, `bench`, `verify`.
//!
//! Exit codes: 0 ok, 2 usage, 3 validation, 4 assertion failure, 5 I/O.
//! Failures print a JSON object with a stable `code` to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{run_suite, Suite};
use crate::choice::{ExactOracle, NoiseMode, NoiseSpec};
use crate::error::{Error, Result};
use crate::greedy::GreedyConfig;
use crate::io::{generate_instance, read_instance, write_file, GeneratorSpec, InstanceFile};
use crate::reference::{brute_force_opt, candidate_collection, candidate_set_opt, ExactSolution};
use crate::report::{self, RunReport, SolveOptions, EXACT_RTOL};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "ASSORTMENT_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ASSERTION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "assortment", version, about = "Capacitated assortment optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded random instance.
    Gen(GenArgs),
    /// Run the greedy add-exchange optimizer and write a run report.
    Solve(SolveArgs),
    /// Solve exactly by enumeration and by the candidate collection, and cross-check.
    Exact(ExactArgs),
    /// Sweep seeded instances and summarize gaps, call counts and guarantees.
    Bench(BenchArgs),
    /// Replay a run report and confirm its checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Capacity stored in the instance file.
    #[arg(long = "C")]
    pub capacity: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub w_lo: f64,
    #[arg(long, default_value_t = 10.0)]
    pub w_hi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p_lo: f64,
    #[arg(long, default_value_t = 100.0)]
    pub p_hi: f64,
    /// Output path; `-` writes to stdout.
    #[arg(long, default_value = "instance.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, default_value = "instance.json")]
    pub instance: PathBuf,
    #[arg(long = "S", default_value_t = 0)]
    pub seed_size: usize,
    /// Capacity; defaults to the instance's capacity, else N.
    #[arg(long = "C")]
    pub capacity: Option<usize>,
    /// Exchange-out budget; defaults to C + 1.
    #[arg(long = "b")]
    pub budget: Option<u32>,
    #[arg(long, default_value = "none")]
    pub noise_mode: NoiseMode,
    /// ε for `fixed` noise, ε_max for `seeded-uniform`.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub trace: bool,
    /// Also brute-force the optimum and report gap and bounds.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long, default_value = "instance.json")]
    pub instance: PathBuf,
    #[arg(long = "C")]
    pub capacity: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "grid")]
    pub suite: Suite,
    /// Instances per cell (grid) or in total (theorem suites).
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Base seed for instance and noise derivation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the JSON summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct ExactOutput {
    pub capacity: usize,
    pub brute_force: ExactSolution,
    pub candidate_set: ExactSolution,
    pub collection_size: usize,
    pub agree: bool,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn capacity_for(file: &InstanceFile, requested: Option<usize>) -> usize {
    requested.or(file.capacity).unwrap_or(file.products.len())
}

fn cmd_gen(args: &GenArgs) -> Result<i32> {
    let spec = GeneratorSpec {
        n: args.n,
        w_lo: args.w_lo,
        w_hi: args.w_hi,
        p_lo: args.p_lo,
        p_hi: args.p_hi,
        seed: args.seed,
        capacity: args.capacity,
    };
    let instance = generate_instance(&spec)?;
    let file = InstanceFile::from_instance(&instance, spec.metadata());
    let out = (args.out.as_os_str() != "-").then_some(args.out.as_path());
    emit(out, &file.to_json())?;
    Ok(EXIT_OK)
}

fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let (_, file) = read_instance(&args.instance)?;
    let capacity = capacity_for(&file, args.capacity);
    let budget = args.budget.unwrap_or(capacity as u32 + 1);
    let noise = match args.noise_mode {
        NoiseMode::None => NoiseSpec::none(),
        NoiseMode::Fixed => NoiseSpec::fixed(args.eps),
        NoiseMode::SeededUniform => NoiseSpec::seeded_uniform(args.eps, args.seed),
    };
    let config = GreedyConfig::new(args.seed_size, capacity, budget);
    let options = SolveOptions {
        trace: args.trace,
        exact: args.exact,
    };
    let report = report::solve(&file, config, noise, options)?;
    emit(args.out.as_deref(), &report.to_json())?;
    if report.failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(Error::Assertion(report.failures.join("; ")))
    }
}

fn cmd_exact(args: &ExactArgs) -> Result<i32> {
    let (instance, file) = read_instance(&args.instance)?;
    let capacity = capacity_for(&file, args.capacity);
    let brute_force = brute_force_opt(&ExactOracle::new(&instance), &instance.ids(), capacity)?;
    let candidate_set = candidate_set_opt(&instance, capacity)?;
    let scale = brute_force.revenue.abs().max(1e-300);
    let agree = (brute_force.revenue - candidate_set.revenue).abs() <= EXACT_RTOL * scale;
    let output = ExactOutput {
        capacity,
        collection_size: candidate_collection(&instance, capacity).len(),
        brute_force,
        candidate_set,
        agree,
    };
    emit(args.out.as_deref(), &to_pretty(&output))?;
    if agree {
        Ok(EXIT_OK)
    } else {
        Err(Error::Assertion(format!(
            "brute force revenue {} and candidate-set revenue {} disagree",
            output.brute_force.revenue, output.candidate_set.revenue
        )))
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let summary = run_suite(args.suite, args.seeds, args.seed)?;
    if let Some(path) = &args.out {
        write_file(path, &summary.to_json())?;
    }
    emit(None, &summary.table())?;
    if summary.passed() {
        Ok(EXIT_OK)
    } else {
        Err(Error::Assertion("bench found guarantee or bound violations".into()))
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let bytes = std::fs::read(&args.report).map_err(|source| Error::Io {
        path: args.report.display().to_string(),
        source,
    })?;
    let report = RunReport::from_json(&bytes)?;
    let outcome = report::verify(&report)?;
    emit(None, &to_pretty(&outcome))?;
    if outcome.ok() {
        Ok(EXIT_OK)
    } else {
        Err(Error::Assertion(format!(
            "report replayed as {:?}: {}",
            outcome.replayed_status,
            outcome.problems.join("; ")
        )))
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

pub fn error_json(err: &Error) -> String {
    serde_json::json!({
        "error": {
            "code": err.code(),
            "exit_code": err.exit_code(),
            "message": err.to_string(),
        }
    })
    .to_string()
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            err.exit_code()
        }
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`], if set.
pub fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_ENV}={raw:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}
