//! The `lfl` command-line front end.
//!
//! Exit status: 0 on success, 1 when a verification fails or a run cannot
//! complete, 2 on usage errors (bad flags, out-of-range parameters).
//! Every file a command writes is paired with a `<stem>.config.json` sidecar
//! holding the parsed command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::binsgame::{phase_stats, run_bins, BinsConfig};
use crate::error::{Error, Result};
use crate::lifting::{verify_lifting, LiftingMap, LiftingReport};
use crate::markov::{self, event_rate, stationary, Chain};
use crate::metrics::{
    completion_curve, crash_sweep, curve_dat, estimate_latencies, exact_latency, format_number, sweep, sweep_csv,
    Budget, Source,
};
use crate::models::{self, fai, parallel, scu, ModelFamily};
use crate::simulator::{
    run_fai, run_parallel, run_scu, run_unbounded_lf_trace, simulate, RunLabel, SchedulerSpec, ScuMachine, ScuProgram,
    SimModel, Trace,
};

/// Environment variable naming the directory for outputs written without `--out`.
pub const OUT_DIR_ENV: &str = "LFL_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const DEFAULT_TOLERANCE: f64 = 1e-9;
const SOLVE_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Parser)]
#[command(name = "lfl", version, about = "Exact chains, liftings and simulations of lock-free algorithms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or solve an exact chain.
    #[command(subcommand)]
    Chain(ChainCommand),
    /// Check liftings between individual and system chains.
    #[command(subcommand)]
    Lifting(LiftingCommand),
    /// Step-level simulation.
    #[command(subcommand)]
    Sim(SimCommand),
    /// The iterated balls-into-bins game.
    #[command(subcommand)]
    Bins(BinsCommand),
    /// Latency over a list of process counts.
    Sweep(SweepArgs),
    /// Latency of an SCU system in which only some processes never crash.
    CrashSweep(CrashSweepArgs),
}

#[derive(Debug, Subcommand)]
enum ChainCommand {
    /// Write a chain as JSON, or as DOT when the output ends in `.dot`.
    Build(ChainBuildArgs),
    /// Stationary distribution and event rate.
    Solve(ChainSolveArgs),
}

#[derive(Debug, Subcommand)]
enum LiftingCommand {
    /// Verify the lifting of a model pair; exit 1 if it fails.
    Verify(LiftingVerifyArgs),
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// Run one simulation and write its trace (`.json`) or stats (`.csv`).
    Run(SimRunArgs),
}

#[derive(Debug, Subcommand)]
enum BinsCommand {
    /// Play the game and write one CSV line per phase.
    Run(BinsRunArgs),
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum ChainModel {
    ScuInd,
    ScuSys,
    FaiInd,
    FaiGlob,
    ParInd,
    ParSys,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Family {
    Scu,
    Fai,
    Parallel,
}

impl From<Family> for ModelFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Scu => ModelFamily::Scu,
            Family::Fai => ModelFamily::Fai,
            Family::Parallel => ModelFamily::Parallel,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum SimKind {
    Scu,
    Fai,
    Unbounded,
    Parallel,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Exact,
    Sim,
    Bins,
}

impl From<Mode> for Source {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => Source::Exact,
            Mode::Sim => Source::Sim,
            Mode::Bins => Source::Bins,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct ChainBuildArgs {
    #[arg(long, value_enum)]
    model: ChainModel,
    #[arg(long)]
    n: usize,
    /// Counter range of the parallel chains.
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ChainSolveArgs {
    #[arg(long, value_enum, required_unless_present = "input", conflicts_with = "input")]
    model: Option<ChainModel>,
    #[arg(long, required_unless_present = "input")]
    n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    q: usize,
    /// Solve a chain read from a JSON file instead of a built-in model.
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = SOLVE_TOLERANCE)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct LiftingVerifyArgs {
    #[arg(long, value_enum)]
    model: Family,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    q: usize,
    /// Replace the canonical map with one read from a JSON file.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Move fine states X and Y into each other's fibers (`X,Y`).
    #[arg(long, value_parser = parse_pair::<usize>)]
    swap: Option<(usize, usize)>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SimRunArgs {
    #[arg(long, value_enum)]
    model: SimKind,
    #[arg(long)]
    n: usize,
    /// Preamble steps (scu) or counter range (parallel).
    #[arg(long, default_value_t = 0)]
    q: usize,
    /// Scan steps (scu).
    #[arg(long, default_value_t = 1)]
    s: usize,
    #[arg(long, default_value_t = 1_000_000)]
    steps: u64,
    #[arg(long)]
    seed: u64,
    /// Scheduling probabilities, one per process.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Lower bound on every scheduling probability.
    #[arg(long)]
    theta: Option<f64>,
    /// Crashes as `process:step` pairs.
    #[arg(long, value_delimiter = ',', value_parser = parse_crash)]
    crash: Vec<(usize, u64)>,
    /// Store the scheduled process of every step in the trace.
    #[arg(long)]
    record_schedule: bool,
    /// Print CSV numbers in full precision.
    #[arg(long)]
    full_precision: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct BinsRunArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    phases: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 4.0)]
    alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    c: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[arg(long, value_enum)]
    model: Family,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    q: usize,
    #[arg(long, default_value_t = 1)]
    s: usize,
    /// Required unless the mode is exact.
    #[arg(long)]
    seed: Option<u64>,
    /// Steps (sim) or phases (bins) per point.
    #[arg(long)]
    work: Option<u64>,
    /// Cap on total work; points beyond it are skipped and the result flagged partial.
    #[arg(long)]
    max_total_work: Option<u64>,
    #[arg(long)]
    full_precision: bool,
    /// Write fit diagnostics as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the completion-rate curve with its reference columns.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct CrashSweepArgs {
    #[arg(long)]
    n: usize,
    /// Numbers of correct processes.
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    q: usize,
    #[arg(long, default_value_t = 1)]
    s: usize,
    #[arg(long, default_value_t = 10_000_000)]
    steps: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    full_precision: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> std::result::Result<(T, T), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected X,Y, got {s:?}"))?;
    let parse = |x: &str| x.trim().parse::<T>().map_err(|_| format!("not a number: {x:?}"));
    Ok((parse(a)?, parse(b)?))
}

fn parse_crash(s: &str) -> std::result::Result<(usize, u64), String> {
    let (p, t) = s.split_once(':').ok_or_else(|| format!("expected process:step, got {s:?}"))?;
    Ok((
        p.trim().parse().map_err(|_| format!("bad process index {p:?}"))?,
        t.trim().parse().map_err(|_| format!("bad step {t:?}"))?,
    ))
}

/// Everything a run was invoked with; written next to each output file.
#[derive(Debug, Serialize)]
pub struct RunConfig {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
}

/// Where outputs go when a command gets no `--out`.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub out_dir: Option<PathBuf>,
}

impl Context {
    pub fn from_env() -> Self {
        Self { out_dir: std::env::var_os(OUT_DIR_ENV).map(PathBuf::from) }
    }
}

/// Sidecar path: `dir/name.ext` becomes `dir/name.config.json`.
pub fn config_path(output: &Path) -> PathBuf {
    output.with_extension("config.json")
}

struct Run<'a> {
    ctx: &'a Context,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
    command: &'static str,
    parameters: serde_json::Value,
    seed: Option<u64>,
    outputs: Vec<String>,
}

impl Run<'_> {
    fn target(&self, out: &Option<PathBuf>, default_name: String) -> Option<PathBuf> {
        out.clone().or_else(|| self.ctx.out_dir.as_ref().map(|d| d.join(default_name)))
    }

    /// Writes `content` to `path`, or to stdout when there is no path.
    fn emit(&mut self, path: Option<&Path>, content: &str) -> Result<()> {
        match path {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)?;
                }
                fs::write(p, content)?;
                self.outputs.push(p.display().to_string());
            }
            None => self.stdout.write_all(content.as_bytes())?,
        }
        Ok(())
    }

    /// Writes the sidecar for every file output so far.
    fn finish(&mut self) -> Result<()> {
        if self.outputs.is_empty() {
            return Ok(());
        }
        let config = RunConfig {
            tool: "lfl".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.into(),
            parameters: self.parameters.clone(),
            seed: self.seed,
            outputs: self.outputs.clone(),
        };
        let text = serde_json::to_string_pretty(&config)? + "\n";
        for out in &self.outputs {
            fs::write(config_path(Path::new(out)), &text)?;
        }
        Ok(())
    }
}

/// Parses `argv` (program name first) and runs the command, reading the
/// default output directory from the environment.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    dispatch_in(&Context::from_env(), argv, &mut stdout, &mut stderr)
}

/// [`dispatch`] with explicit context and output streams.
pub fn dispatch_in<I, T>(ctx: &Context, argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{text}");
            return EXIT_OK;
        }
    };
    let (command, parameters, seed) = describe(&cli.command);
    let mut run = Run { ctx, stdout, stderr, command, parameters, seed, outputs: Vec::new() };
    let outcome = execute(&cli.command, &mut run).and_then(|code| run.finish().map(|_| code));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(run.stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Bad input maps to the usage status; everything else is a failed run.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::OutOfRange(_)
        | Error::Scheduler(_)
        | Error::Unsupported(_)
        | Error::StateOutOfRange(_)
        | Error::Json(_) => EXIT_USAGE,
        _ => EXIT_VERIFY,
    }
}

fn describe(command: &Command) -> (&'static str, serde_json::Value, Option<u64>) {
    let value = |v: serde_json::Result<serde_json::Value>| v.unwrap_or(serde_json::Value::Null);
    match command {
        Command::Chain(ChainCommand::Build(a)) => ("chain build", value(serde_json::to_value(a)), None),
        Command::Chain(ChainCommand::Solve(a)) => ("chain solve", value(serde_json::to_value(a)), None),
        Command::Lifting(LiftingCommand::Verify(a)) => ("lifting verify", value(serde_json::to_value(a)), None),
        Command::Sim(SimCommand::Run(a)) => ("sim run", value(serde_json::to_value(a)), Some(a.seed)),
        Command::Bins(BinsCommand::Run(a)) => ("bins run", value(serde_json::to_value(a)), Some(a.seed)),
        Command::Sweep(a) => ("sweep", value(serde_json::to_value(a)), a.seed),
        Command::CrashSweep(a) => ("crash-sweep", value(serde_json::to_value(a)), Some(a.seed)),
    }
}

fn execute(command: &Command, run: &mut Run<'_>) -> Result<i32> {
    match command {
        Command::Chain(ChainCommand::Build(a)) => chain_build(a, run),
        Command::Chain(ChainCommand::Solve(a)) => chain_solve(a, run),
        Command::Lifting(LiftingCommand::Verify(a)) => lifting_verify(a, run),
        Command::Sim(SimCommand::Run(a)) => sim_run(a, run),
        Command::Bins(BinsCommand::Run(a)) => bins_run(a, run),
        Command::Sweep(a) => sweep_cmd(a, run),
        Command::CrashSweep(a) => crash_sweep_cmd(a, run),
    }
}

fn build_chain(model: ChainModel, n: usize, q: usize) -> Result<Chain> {
    match model {
        ChainModel::ScuInd => scu::build_scu_individual(n),
        ChainModel::ScuSys => scu::build_scu_system(n),
        ChainModel::FaiInd => fai::build_fai_individual(n),
        ChainModel::FaiGlob => fai::build_fai_global(n),
        ChainModel::ParInd => parallel::build_parallel_individual(n, q),
        ChainModel::ParSys => parallel::build_parallel_system(n, q),
    }
}

fn model_name(model: ChainModel) -> &'static str {
    match model {
        ChainModel::ScuInd => "scu-ind",
        ChainModel::ScuSys => "scu-sys",
        ChainModel::FaiInd => "fai-ind",
        ChainModel::FaiGlob => "fai-glob",
        ChainModel::ParInd => "par-ind",
        ChainModel::ParSys => "par-sys",
    }
}

fn is_dot(path: Option<&Path>) -> bool {
    path.and_then(Path::extension).is_some_and(|e| e == "dot")
}

fn chain_build(a: &ChainBuildArgs, run: &mut Run<'_>) -> Result<i32> {
    let chain = build_chain(a.model, a.n, a.q)?;
    let path = run.target(&a.out, format!("chain-{}-n{}-q{}.json", model_name(a.model), a.n, a.q));
    let text = if is_dot(path.as_deref()) { markov::io::to_dot(&chain)? } else { markov::io::to_json(&chain)? + "\n" };
    run.emit(path.as_deref(), &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Solution<'a> {
    num_states: usize,
    labels: &'a [String],
    stationary: &'a [f64],
    residual: f64,
    irreducible: bool,
    period: Option<u64>,
    mu: Option<f64>,
    latency: Option<f64>,
}

fn chain_solve(a: &ChainSolveArgs, run: &mut Run<'_>) -> Result<i32> {
    let (chain, default_name) = match (&a.input, a.model, a.n) {
        (Some(file), _, _) => {
            let stem = file.file_stem().map_or("chain".into(), |s| s.to_string_lossy().into_owned());
            (markov::io::from_json(&fs::read_to_string(file)?)?, format!("{stem}.solution.json"))
        }
        (None, Some(model), Some(n)) => {
            (build_chain(model, n, a.q)?, format!("solve-{}-n{}-q{}.json", model_name(model), n, a.q))
        }
        _ => return Err(Error::OutOfRange("give --model and --n, or --in".into())),
    };
    let pi = stationary(&chain, a.tol)?;
    let rate = if chain.has_events() { Some(event_rate(&chain, &pi)?) } else { None };
    let solution = Solution {
        num_states: chain.num_states(),
        labels: chain.labels(),
        stationary: &pi.probabilities,
        residual: pi.residual(&chain),
        irreducible: chain.is_irreducible(),
        period: chain.period(),
        mu: rate.map(|r| r.mu),
        latency: rate.map(|r| r.latency),
    };
    let path = run.target(&a.out, default_name);
    run.emit(path.as_deref(), &(serde_json::to_string_pretty(&solution)? + "\n"))?;
    Ok(EXIT_OK)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn report_table(r: &LiftingReport) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "{:<20} {:>12} {:>10}  result", "check", "residual", "tolerance");
    for (name, residual, ok) in [
        ("flow homomorphism", r.max_flow_residual, r.flow_homomorphism_ok),
        ("aggregation", r.max_aggregation_residual, r.aggregation_ok),
        ("fiber symmetry", r.max_fiber_spread, r.fiber_symmetry_ok),
    ] {
        let _ = writeln!(t, "{name:<20} {residual:>12.3e} {:>10.1e}  {}", r.tolerance, verdict(ok));
    }
    let _ = writeln!(t, "lifting: {}", verdict(r.is_lifting()));
    t
}

fn lifting_verify(a: &LiftingVerifyArgs, run: &mut Run<'_>) -> Result<i32> {
    let pair = models::model_pair(a.model.into(), a.n, a.q)?;
    let map = match &a.map {
        Some(file) => serde_json::from_str::<LiftingMap>(&fs::read_to_string(file)?),
        None => Ok(pair.map),
    };
    let checked = map.map_err(|e| Error::InvalidMap(e.to_string())).and_then(|map| match a.swap {
        Some((x, y)) => map.swapped(x, y),
        None => Ok(map),
    });
    let report = match checked.and_then(|map| verify_lifting(&pair.individual, &pair.system, &map, a.tol)) {
        Ok(report) => report,
        Err(e @ (Error::InvalidMap(_) | Error::DimensionMismatch { .. })) => {
            writeln!(run.stdout, "lifting: FAIL ({e})")?;
            return Ok(EXIT_VERIFY);
        }
        Err(e) => return Err(e),
    };
    write!(run.stdout, "{}", report_table(&report))?;
    if let Some(out) = &a.out {
        run.emit(Some(out), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    Ok(if report.is_lifting() { EXIT_OK } else { EXIT_VERIFY })
}

fn scheduler_spec(a: &SimRunArgs) -> SchedulerSpec {
    let crashes: BTreeMap<usize, u64> = a.crash.iter().copied().collect();
    let mut spec = match &a.weights {
        Some(w) => SchedulerSpec::weighted(w.clone(), a.theta.unwrap_or(f64::MIN_POSITIVE)),
        None if crashes.is_empty() => SchedulerSpec::uniform(),
        None => SchedulerSpec::uniform_with_crashes(BTreeMap::new()),
    };
    if a.weights.is_none() {
        spec.theta = a.theta;
    }
    spec.crash_times = crashes;
    spec
}

pub const STATS_HEADER: &str = "model,n,q,s,steps,seed,W_emp,Wi_emp_min,Wi_emp_max,completion_rate";

fn stats_csv(trace: &Trace, full: bool) -> String {
    let (w, lo, hi, rate) = match estimate_latencies(trace) {
        Ok(r) => (
            r.w,
            r.min_individual().unwrap_or(f64::NAN),
            r.max_individual().unwrap_or(f64::NAN),
            r.completion_rate,
        ),
        Err(_) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
    };
    let f = |x| format_number(x, full);
    format!(
        "{STATS_HEADER}\n{},{},{},{},{},{},{},{},{},{}\n",
        trace.model.name(),
        trace.n,
        trace.q,
        trace.s,
        trace.total_steps,
        trace.seed,
        f(w),
        f(lo),
        f(hi),
        f(rate)
    )
}

fn sim_run(a: &SimRunArgs, run: &mut Run<'_>) -> Result<i32> {
    let spec = scheduler_spec(a);
    let trace = match a.model {
        SimKind::Scu => {
            let program = ScuProgram::new(a.q, a.s)?;
            if a.record_schedule {
                let label = RunLabel { model: SimModel::Scu, q: a.q, s: a.s, cycle: program.solo_steps() };
                simulate(&mut ScuMachine::new(program, a.n), label, a.steps, a.seed, &spec, true)?
            } else {
                run_scu(program, a.n, a.steps, a.seed, &spec)?
            }
        }
        SimKind::Fai => run_fai(a.n, a.steps, a.seed, &spec)?,
        SimKind::Parallel => run_parallel(a.n, a.q, a.steps, a.seed, &spec)?,
        SimKind::Unbounded => {
            let (trace, stats) = run_unbounded_lf_trace(a.n, a.steps, a.seed, &spec)?;
            writeln!(
                run.stderr,
                "first winner {:?} took {} of {} successes",
                stats.first_winner, stats.first_winner_successes, stats.total_successes
            )?;
            trace
        }
    };
    let model = trace.model.name();
    let path = run.target(&a.out, format!("sim-{model}-n{}-q{}-s{}-seed{}.csv", a.n, a.q, a.s, a.seed));
    let csv = path.as_deref().and_then(Path::extension).is_none_or(|e| e == "csv");
    let text = if csv { stats_csv(&trace, a.full_precision) } else { serde_json::to_string(&trace)? + "\n" };
    run.emit(path.as_deref(), &text)?;
    Ok(EXIT_OK)
}

pub const PHASES_HEADER: &str = "phase_index,a_start,b_start,length,range";

fn bins_run(a: &BinsRunArgs, run: &mut Run<'_>) -> Result<i32> {
    let config = BinsConfig { n: a.n, phases: a.phases, seed: a.seed, alpha: a.alpha, c: a.c };
    let records = run_bins(&config)?;
    let mut csv = String::from(PHASES_HEADER);
    csv.push('\n');
    for (i, r) in records.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{},{},{}", r.a_start, r.b_start, r.length, r.range);
    }
    let stats = phase_stats(&records, a.n, a.alpha, a.c)?;
    writeln!(
        run.stderr,
        "mean phase length {} over {} phases; bound violations {}",
        format_number(stats.mean_length, false),
        stats.phases,
        format_number(stats.bound_violation_fraction, false)
    )?;
    let path = run.target(&a.out, format!("bins-n{}-seed{}.csv", a.n, a.seed));
    run.emit(path.as_deref(), &csv)?;
    Ok(EXIT_OK)
}

fn sweep_cmd(a: &SweepArgs, run: &mut Run<'_>) -> Result<i32> {
    let mode = Source::from(a.mode);
    let seed = match (mode, a.seed) {
        (Source::Exact, s) => s.unwrap_or(0),
        (_, Some(s)) => s,
        (_, None) => return Err(Error::OutOfRange(format!("--seed is required in {} mode", mode.name()))),
    };
    let work = a.work.unwrap_or(match mode {
        Source::Exact => 0,
        Source::Sim => 1_000_000,
        Source::Bins => 10_000,
    });
    let budget = Budget { work_per_point: work, max_total_work: a.max_total_work };
    let result = sweep(a.model.into(), &a.n, a.q, a.s, mode, budget, seed)?;
    match &result.fit {
        Some(fit) => writeln!(
            run.stderr,
            "fit over {} points: gamma = {}, C = {}{}",
            fit.points_used,
            format_number(fit.gamma, false),
            format_number(fit.coefficient, false),
            if fit.flat { " (flat)" } else { "" }
        )?,
        None => writeln!(run.stderr, "fit: not enough points")?,
    }
    if result.partial {
        writeln!(run.stderr, "budget exhausted; skipped n = {:?}", result.skipped_n)?;
    }
    let family = match a.model {
        Family::Scu => "scu",
        Family::Fai => "fai",
        Family::Parallel => "parallel",
    };
    let path = run.target(&a.out, format!("sweep-{family}-{}-q{}-s{}.csv", mode.name(), a.q, a.s));
    run.emit(path.as_deref(), &sweep_csv(&result.rows, a.full_precision))?;
    if let Some(json) = &a.json {
        run.emit(Some(json), &(serde_json::to_string_pretty(&result)? + "\n"))?;
    }
    if let Some(curve) = &a.curve {
        run.emit(Some(curve), &curve_dat(&completion_curve(&result.rows), a.full_precision))?;
    }
    Ok(EXIT_OK)
}

pub const CRASH_HEADER: &str = "n,k_correct,q,s,steps,seed,W,completion_rate,exact_W_k";

fn crash_sweep_cmd(a: &CrashSweepArgs, run: &mut Run<'_>) -> Result<i32> {
    let f = |x| format_number(x, a.full_precision);
    let mut csv = String::from(CRASH_HEADER);
    csv.push('\n');
    for &k in &a.k {
        let row = crash_sweep(a.n, k, a.q, a.s, a.steps, a.seed)?;
        let exact = if a.q == 0 && a.s == 1 {
            f(exact_latency(ModelFamily::Scu, k, 0, 1)?.0)
        } else {
            String::new()
        };
        let _ =
            writeln!(csv, "{},{k},{},{},{},{},{},{},{exact}", a.n, a.q, a.s, a.steps, a.seed, f(row.w), f(row.completion_rate));
    }
    let path = run.target(&a.out, format!("crash-n{}-q{}-s{}-seed{}.csv", a.n, a.q, a.s, a.seed));
    run.emit(path.as_deref(), &csv)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = dispatch_in(&Context::default(), std::iter::once("lfl").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn crash_pairs_parse() {
        assert_eq!(parse_crash("3:100"), Ok((3, 100)));
        assert!(parse_crash("3-100").is_err());
        assert_eq!(parse_pair::<usize>("1,2"), Ok((1, 2)));
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(config_path(Path::new("out/trace.json")), PathBuf::from("out/trace.config.json"));
        assert_eq!(config_path(Path::new("stats.csv")), PathBuf::from("stats.config.json"));
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = run(&["chain", "build", "--bogus"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("Usage"));
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run(&["sim", "run", "--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("--seed"));
    }

    #[test]
    fn chain_build_to_stdout() {
        let (code, out, _) = run(&["chain", "build", "--model", "scu-sys", "--n", "2"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(markov::io::from_json(&out).unwrap().num_states(), 5);
    }

    #[test]
    fn out_of_range_parameter_is_usage_error() {
        let (code, _, err) = run(&["chain", "build", "--model", "scu-ind", "--n", "11"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.starts_with("error:"));
    }
}
