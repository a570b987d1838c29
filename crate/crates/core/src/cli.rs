//! The `kaczmarz` command-line experiment runner.
//!
//! Exit codes: 0 success, 1 output/write failure or a control that fails the
//! window check, 2 invalid flags or unreadable input, 3 generation failure,
//! 4 rank-deficient system, 5 assumption violation for `--x0-prop2`,
//! 6 malformed trace or windows.
//!
//! Outputs contain no timestamps, host data or absolute paths, so runs with
//! the same inputs and seed are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::controls::{self, ControlKind, ControlTrace, WindowReport};
use crate::hypothesis::{self, HypothesisError, HypothesisReport};
use crate::linalg::{LinalgError, LinearSystem};
use crate::problems::{self, GeneratorConfig, ProblemError};
use crate::solver::{self, CoverageReport, ResidualMode, RunConfig, RunTrace};

pub const SUMMARY_SCHEMA: u32 = 1;
pub const TRACE_HEADER: &str = "k,index,max_abs_res,res_norm2,dist_to_limit";

#[derive(Debug, Parser)]
#[command(
    name = "kaczmarz",
    version,
    about = "Kaczmarz solver experiments with row-selection controls"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a CT-like nonnegative system and write A.mtx, b.txt, z.txt.
    Generate(GenerateArgs),
    /// Run the Kaczmarz iteration on a system read from files.
    Solve(SolveArgs),
    /// Check a recorded index sequence against window boundaries.
    VerifyControl(VerifyArgs),
    /// Generate many systems and run the maximal-residual coverage experiment.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Clone)]
pub struct ProblemArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.2)]
    pub density: f64,
    /// Box bound on the generated solution components.
    #[arg(long = "C", default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ProblemArgs {
    fn config(&self, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            m: self.m,
            n: self.n,
            density: self.density,
            c: self.c,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Strategy {
    Cyclic,
    Random,
    Mr,
    MrDistance,
}

impl Strategy {
    fn kind(self, seed: u64) -> ControlKind {
        match self {
            Strategy::Cyclic => ControlKind::Cyclic,
            Strategy::Random => ControlKind::Random { seed },
            Strategy::Mr => ControlKind::MaxResidual,
            Strategy::MrDistance => ControlKind::MaxDistance,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Auto,
    Incremental,
    Recompute,
}

impl From<ModeArg> for ResidualMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => ResidualMode::Auto,
            ModeArg::Incremental => ResidualMode::Incremental,
            ModeArg::Recompute => ResidualMode::Recompute,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub rhs: PathBuf,
    /// Starting point file, or `zero`.
    #[arg(long, conflicts_with = "x0_prop2")]
    pub x0: Option<String>,
    /// Use the positive-coefficient initializer built from a norm bound.
    #[arg(long)]
    pub x0_prop2: bool,
    /// Bound on the minimal-norm solution norm.
    #[arg(long = "M", conflicts_with = "c", requires = "x0_prop2")]
    pub bound: Option<f64>,
    /// Box bound on solution components; the norm bound is then sqrt(n)*C.
    #[arg(long = "C", requires = "x0_prop2")]
    pub c: Option<f64>,
    #[arg(long, default_value_t = hypothesis::DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "mr")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub stop_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value = "auto")]
    pub residual_mode: ModeArg,
    #[arg(long, default_value_t = 10_000)]
    pub resync_interval: usize,
    /// Skip the limit computation (allows rank-deficient systems).
    #[arg(long)]
    pub no_limit: bool,
    /// Per-iteration CSV output.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// JSON summary output; printed to stdout when omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Trace CSV from `solve --trace`, or one index per line.
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub m: usize,
    /// Window boundaries file, `auto-cyclic` (τ_k = k·m) or `coverage`
    /// (one window ending right after every index has appeared).
    #[arg(long, default_value = "auto-cyclic")]
    pub windows: String,
    /// Window-length bound for the bounded/expanding classification
    /// (defaults to m).
    #[arg(long)]
    pub bound: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Number of consecutive seeds, starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub repeat: u64,
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    #[arg(long, default_value_t = hypothesis::DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "mr")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 1e-10)]
    pub stop_tol: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    /// JSON-lines output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

fn input_err(e: ProblemError) -> CliError {
    CliError::new(2, e.to_string())
}

fn linalg_err(e: LinalgError) -> CliError {
    match e {
        LinalgError::RankDeficient { .. } => CliError::new(4, e.to_string()),
        _ => CliError::new(2, e.to_string()),
    }
}

fn hypothesis_err(e: HypothesisError) -> CliError {
    match e {
        HypothesisError::Linalg(e) => linalg_err(e),
        other => CliError::new(5, other.to_string()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::new(1, format!("{}: {e}", path.display())))
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::VerifyControl(a) => cmd_verify_control(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<i32, CliError> {
    let config = args.problem.config(args.problem.seed);
    config
        .validate()
        .map_err(|e| CliError::new(2, e.to_string()))?;
    let problem =
        problems::generate_ct_like(&config).map_err(|e| CliError::new(3, e.to_string()))?;
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::new(1, format!("{}: {e}", args.out_dir.display())))?;
    let io = |e: ProblemError| CliError::new(1, e.to_string());
    problems::save_matrix(args.out_dir.join("A.mtx"), problem.system.matrix()).map_err(io)?;
    problems::save_vector(args.out_dir.join("b.txt"), problem.system.rhs()).map_err(io)?;
    problems::save_vector(args.out_dir.join("z.txt"), &problem.z).map_err(io)?;
    println!(
        "{}",
        hypothesis::check_matrix_assumptions(problem.system.matrix())
    );
    Ok(0)
}

#[derive(Debug, Serialize)]
pub struct InitializerSummary {
    pub bound: f64,
    pub delta: f64,
    pub min_norm: f64,
}

#[derive(Debug, Serialize)]
pub struct SolveSummary {
    pub schema: u32,
    pub strategy: String,
    pub seed: Option<u64>,
    pub m: usize,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub stop_tol: f64,
    pub max_iters: usize,
    pub initial_max_abs_res: f64,
    pub final_max_abs_res: f64,
    pub first_hit: Vec<Option<usize>>,
    pub covered: bool,
    pub max_first_hit: Option<usize>,
    pub unhit: Vec<usize>,
    pub dist_to_limit_start: Option<f64>,
    pub dist_to_limit_end: Option<f64>,
    pub initializer: Option<InitializerSummary>,
    pub hypothesis: Option<HypothesisReport>,
}

impl SolveSummary {
    fn new(
        trace: &RunTrace,
        n: usize,
        config: &RunConfig,
        seed: Option<u64>,
        initializer: Option<InitializerSummary>,
        hypothesis: Option<HypothesisReport>,
    ) -> Self {
        let coverage: CoverageReport = solver::coverage_report(trace);
        SolveSummary {
            schema: SUMMARY_SCHEMA,
            strategy: trace.strategy.name().to_string(),
            seed,
            m: trace.m,
            n,
            converged: trace.converged,
            iterations: trace.iterations,
            stop_tol: config.stop_tol,
            max_iters: config.max_iters,
            initial_max_abs_res: trace.initial_max_abs_res,
            final_max_abs_res: trace.final_max_abs_res,
            first_hit: trace.first_hit.clone(),
            covered: coverage.covered,
            max_first_hit: coverage.max_first_hit,
            unhit: coverage.unhit,
            dist_to_limit_start: trace.initial_dist_to_limit,
            dist_to_limit_end: trace.final_dist_to_limit,
            initializer,
            hypothesis,
        }
    }
}

/// CSV text for the per-iteration records of a run.
pub fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::with_capacity(48 * (trace.records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = write!(
            out,
            "{},{},{:e},{:e},",
            r.k, r.index, r.max_abs_res, r.res_norm2
        );
        if let Some(d) = r.dist_to_limit {
            let _ = write!(out, "{d:e}");
        }
        out.push('\n');
    }
    out
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32, CliError> {
    if !(args.stop_tol >= 0.0) {
        return Err(CliError::new(2, "--stop-tol must be nonnegative"));
    }
    let matrix = problems::load_matrix(&args.matrix).map_err(input_err)?;
    let rhs = problems::load_vector(&args.rhs).map_err(input_err)?;
    let system = LinearSystem::new(matrix, rhs).map_err(linalg_err)?;
    let n = system.ncols();

    let mut initializer = None;
    let mut hypothesis_report = None;
    let x0 = if args.x0_prop2 {
        let bound = match (args.bound, args.c) {
            (Some(m), None) => m,
            (None, Some(c)) if c >= 0.0 => hypothesis::bound_from_box(n, c),
            (None, Some(c)) => {
                return Err(CliError::new(
                    2,
                    format!("--C must be nonnegative (got {c})"),
                ))
            }
            _ => {
                return Err(CliError::new(
                    2,
                    "--x0-prop2 needs exactly one of --M or --C",
                ))
            }
        };
        let spec = hypothesis::construct_x0(&system, bound, args.delta).map_err(hypothesis_err)?;
        hypothesis_report =
            Some(hypothesis::check_hypothesis(&system, &spec.x0).map_err(linalg_err)?);
        initializer = Some(InitializerSummary {
            bound: spec.bound,
            delta: spec.delta,
            min_norm: spec.min_norm,
        });
        spec.x0
    } else {
        match args.x0.as_deref() {
            None | Some("zero") => vec![0.0; n],
            Some(path) => {
                let x0 = problems::load_vector(path).map_err(input_err)?;
                if x0.len() != n {
                    return Err(CliError::new(
                        2,
                        format!("x0 has {} entries, matrix has {n} columns", x0.len()),
                    ));
                }
                x0
            }
        }
    };

    let kind = args.strategy.kind(args.seed);
    let config = RunConfig {
        max_iters: args.max_iters,
        stop_tol: args.stop_tol,
        strategy: kind,
        record_trace: args.trace.is_some(),
        residual_mode: args.residual_mode.into(),
        resync_interval: args.resync_interval,
        track_limit: !args.no_limit,
    };
    let trace = solver::run(&system, &x0, &config).map_err(linalg_err)?;

    if let Some(path) = &args.trace {
        write_file(path, &trace_csv(&trace))?;
    }
    let seed = matches!(kind, ControlKind::Random { .. }).then_some(args.seed);
    let summary = SolveSummary::new(&trace, n, &config, seed, initializer, hypothesis_report);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    match &args.summary {
        Some(path) => write_file(path, &json)?,
        None => print!("{json}"),
    }
    Ok(0)
}

/// Reads the `index` column of a trace CSV, or a bare list of indices.
pub fn parse_trace_indices(text: &str) -> Result<Vec<usize>, String> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((first_no, first)) = lines.next() else {
        return Ok(Vec::new());
    };
    let header: Vec<&str> = first.split(',').map(str::trim).collect();
    let (column, mut out) = if header.iter().all(|h| h.parse::<f64>().is_err()) {
        let col = header
            .iter()
            .position(|h| *h == "index")
            .ok_or_else(|| format!("line {}: header has no \"index\" column", first_no + 1))?;
        (col, Vec::new())
    } else {
        let v = first.trim().parse::<usize>().map_err(|_| {
            format!(
                "line {}: cannot parse index {:?}",
                first_no + 1,
                first.trim()
            )
        })?;
        (0, vec![v])
    };
    for (no, line) in lines {
        let field = line
            .split(',')
            .nth(column)
            .ok_or_else(|| format!("line {}: missing column {}", no + 1, column + 1))?
            .trim();
        out.push(
            field
                .parse()
                .map_err(|_| format!("line {}: cannot parse index {field:?}", no + 1))?,
        );
    }
    Ok(out)
}

/// Window boundaries separated by commas or whitespace.
pub fn parse_windows(text: &str) -> Result<Vec<usize>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| format!("cannot parse window boundary {s:?}"))
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct VerifyOutput {
    m: usize,
    trace_len: usize,
    windows: Vec<usize>,
    bound: usize,
    classification: &'static str,
    #[serde(flatten)]
    report: WindowReport,
}

pub fn cmd_verify_control(args: &VerifyArgs) -> Result<i32, CliError> {
    if args.m == 0 {
        return Err(CliError::new(2, "--m must be at least 1"));
    }
    let text = fs::read_to_string(&args.trace)
        .map_err(|e| CliError::new(2, format!("{}: {e}", args.trace.display())))?;
    let indices = parse_trace_indices(&text).map_err(|e| CliError::new(6, e))?;
    let windows = match args.windows.as_str() {
        "auto-cyclic" => controls::cyclic_windows(indices.len(), args.m),
        "coverage" => {
            let hits = controls::first_hit_iterations(&indices, args.m);
            match CoverageReport::from_first_hit(&hits) {
                CoverageReport {
                    covered: true,
                    max_first_hit: Some(last),
                    ..
                } => vec![0, last + 1],
                _ => vec![0, indices.len()],
            }
        }
        path => {
            let text =
                fs::read_to_string(path).map_err(|e| CliError::new(2, format!("{path}: {e}")))?;
            parse_windows(&text).map_err(|e| CliError::new(6, e))?
        }
    };
    let bound = args.bound.unwrap_or(args.m);
    let trace = ControlTrace::new(indices).with_windows(windows.clone());
    let report = controls::verify_windows(&trace, args.m, Some(bound))
        .map_err(|e| CliError::new(6, e.to_string()))?;
    let out = VerifyOutput {
        m: args.m,
        trace_len: trace.indices.len(),
        windows,
        bound,
        classification: if report.bounded == Some(true) {
            "bounded"
        } else {
            "exceeds-bound"
        },
        report,
    };
    let valid = out.report.valid;
    println!(
        "{}",
        serde_json::to_string_pretty(&out).expect("report serializes")
    );
    Ok(if valid { 0 } else { 1 })
}

/// One line of `sweep` output.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub all_positive: bool,
    pub min_gamma: f64,
    pub converged: bool,
    pub iterations: usize,
    pub covered: bool,
    pub max_first_hit: Option<usize>,
    pub unhit: Vec<usize>,
    pub final_max_abs_res: f64,
    /// `‖final_x − limit‖ / (1 + ‖limit‖)`
    pub limit_error: f64,
    pub max_dist_increase: f64,
}

fn sweep_one(args: &SweepArgs, seed: u64) -> Result<SweepRecord, CliError> {
    let problem = problems::generate_ct_like(&args.problem.config(seed))
        .map_err(|e| CliError::new(3, format!("seed {seed}: {e}")))?;
    let system = &problem.system;
    let bound = hypothesis::bound_from_box(system.ncols(), args.problem.c);
    let spec = hypothesis::construct_x0(system, bound, args.delta).map_err(hypothesis_err)?;
    let report = hypothesis::check_hypothesis(system, &spec.x0).map_err(linalg_err)?;
    let mut config = RunConfig::new(args.strategy.kind(seed));
    config.max_iters = args.max_iters;
    config.stop_tol = args.stop_tol;
    config.track_limit = true;
    let trace = solver::run(system, &spec.x0, &config).map_err(linalg_err)?;
    let coverage = solver::coverage_report(&trace);
    let limit = trace.limit.as_deref().expect("limit tracked");
    let limit_error =
        crate::linalg::distance(&trace.final_x, limit) / (1.0 + crate::linalg::norm(limit));
    Ok(SweepRecord {
        seed,
        all_positive: report.all_positive,
        min_gamma: report.min_gamma,
        converged: trace.converged,
        iterations: trace.iterations,
        covered: coverage.covered,
        max_first_hit: coverage.max_first_hit,
        unhit: coverage.unhit,
        final_max_abs_res: trace.final_max_abs_res,
        limit_error,
        max_dist_increase: trace.max_dist_increase.unwrap_or(0.0),
    })
}

/// Runs the sweep over `repeat` seeds on up to `parallel` threads. Results
/// come back in seed order regardless of scheduling.
pub fn run_sweep(args: &SweepArgs) -> Result<Vec<SweepRecord>, CliError> {
    args.problem
        .config(args.problem.seed)
        .validate()
        .map_err(|e| CliError::new(2, e.to_string()))?;
    let count = args.repeat as usize;
    let workers = args.parallel.clamp(1, count.max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<SweepRecord, CliError>>>> =
        Mutex::new((0..count).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= count {
                    break;
                }
                let res = sweep_one(args, args.problem.seed + idx as u64);
                slots.lock().unwrap()[idx] = Some(res);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("every seed processed"))
        .collect()
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32, CliError> {
    let records = run_sweep(args)?;
    let mut out = String::new();
    for r in &records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    match &args.out {
        Some(path) => write_file(path, &out)?,
        None => print!("{out}"),
    }
    let covered = records.iter().filter(|r| r.covered).count();
    let positive = records.iter().filter(|r| r.all_positive).count();
    eprintln!(
        "{} systems: hypothesis holds in {positive}, coverage reached in {covered}",
        records.len()
    );
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_indices_from_csv_and_bare_list() {
        let csv = "k,index,max_abs_res,res_norm2,dist_to_limit\n0,1,1e0,1e0,\n1,0,0e0,0e0,\n";
        assert_eq!(parse_trace_indices(csv).unwrap(), vec![1, 0]);
        assert_eq!(parse_trace_indices("2\n0\n\n1\n").unwrap(), vec![2, 0, 1]);
        assert_eq!(parse_trace_indices("").unwrap(), Vec::<usize>::new());
        assert!(parse_trace_indices("k,idx\n0,1\n").is_err());
        assert!(parse_trace_indices("k,index\n0,x\n").is_err());
    }

    #[test]
    fn window_files() {
        assert_eq!(parse_windows("0,3\n6 9").unwrap(), vec![0, 3, 6, 9]);
        assert!(parse_windows("0,-1").is_err());
    }
}
