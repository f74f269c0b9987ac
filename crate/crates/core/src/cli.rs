//! Command-line front end. [`run`] parses arguments, writes to the given
//! streams and returns the process exit code:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success                                   |
//! | 1    | a validation check failed                 |
//! | 2    | bad flags, bad input file or bad rates    |
//! | 3    | numerical failure (convergence, cap, ...) |

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::analytic;
use crate::engine::{self, run_trace, DEFAULT_WARMUP};
use crate::error::Error;
use crate::markov::{
    self, build_aoa_chain, build_aoai_chain, choose_cap, mean_age, mean_information_age, TruncatedChain,
};
use crate::model::{Metric, Params};
use crate::output::{self, fmt_g9, OutputRow};
use crate::validation::{self, CheckConfig, Grid, Method, SweepReport, MIN_RATE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "AOA_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "aoa-lab",
    version,
    about = "Age of information, actuation and actuated information of a caching energy-harvesting actuator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form averages at one point
    Analytic(AnalyticArgs),
    /// Monte Carlo estimate at one point
    Simulate(SimulateArgs),
    /// Truncated Markov chain solve at one point
    Chain(ChainArgs),
    /// Evaluate a grid of points and write CSV
    Sweep(SweepArgs),
    /// Cross-check all routes over a grid
    Validate(ValidateArgs),
    /// Replay an event trace slot by slot
    Trace(TraceArgs),
}

#[derive(Args, Debug)]
struct Rates {
    /// Data arrival probability per slot, in [0.01, 1]
    #[arg(long, value_parser = parse_rate)]
    lambda1: f64,

    /// Energy arrival probability per slot, in [0.01, 1]
    #[arg(long, value_parser = parse_rate)]
    lambda2: f64,
}

impl Rates {
    fn params(&self) -> crate::Result<Params> {
        Params::new(self.lambda1, self.lambda2)
    }
}

#[derive(Args, Debug)]
struct AnalyticArgs {
    #[command(flatten)]
    rates: Rates,

    #[arg(long, value_delimiter = ',', default_value = "aoi,aoa,aoai")]
    metrics: Vec<Metric>,

    /// One JSON object per line instead of CSV
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    rates: Rates,

    /// Total slots, warmup included
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Slots discarded before averaging
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: u64,

    #[arg(long, value_delimiter = ',', default_value = "aoi,aoa,aoai")]
    metrics: Vec<Metric>,

    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("truncation").required(true).args(["cap", "tail_eps"])))]
struct ChainArgs {
    #[command(flatten)]
    rates: Rates,

    #[arg(long, default_value = "aoa")]
    metric: Metric,

    /// Highest age level kept
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..=markov::MAX_CAP as u64))]
    cap: Option<u64>,

    /// Pick the cap so the neglected stationary mass is about this small
    #[arg(long, value_parser = parse_positive)]
    tail_eps: Option<f64>,

    /// Power-iteration convergence threshold
    #[arg(long, default_value_t = markov::DEFAULT_TOL, value_parser = parse_positive)]
    tol: f64,

    /// Also write the transition rows to FILE
    #[arg(long, value_name = "FILE")]
    dump: Option<PathBuf>,

    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// A:B:STEP for both rates, or A:B:STEP,A:B:STEP for lambda1 then lambda2
    #[arg(long, value_parser = parse_grid)]
    grid: Grid,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: u64,

    /// Tail mass budget for the chain and series routes
    #[arg(long, default_value_t = 1e-10, value_parser = parse_positive)]
    tail_eps: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    grid: GridArgs,

    #[arg(long, value_delimiter = ',', default_value = "analytic")]
    methods: Vec<Method>,

    /// Simulated slots per point
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,

    /// Output file (stdout when absent)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    grid: GridArgs,

    /// Simulated slots per point
    #[arg(long, default_value_t = 10_000_000)]
    slots: u64,

    /// Relative tolerance of simulation against the closed forms
    #[arg(long, default_value_t = 0.01, value_parser = parse_positive)]
    tol_rel: f64,
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// CSV with header t,data,energy
    #[arg(long, value_name = "FILE")]
    events: PathBuf,

    #[arg(long)]
    json: bool,
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (MIN_RATE..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [{MIN_RATE}, 1]"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    Grid::parse(s).map_err(|e| e.to_string())
}

/// Failure of a subcommand, already mapped to an exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_USAGE },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

/// Runs the tool on `args` (program name first).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Analytic(a) => cmd_analytic(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Chain(a) => cmd_chain(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Validate(a) => cmd_validate(a, out, err),
        Command::Trace(a) => cmd_trace(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn cmd_analytic(a: AnalyticArgs, out: &mut dyn Write) -> CmdResult {
    let p = a.rates.params()?;
    let avg = analytic::averages(&p)?;
    let rows: Vec<OutputRow> = a
        .metrics
        .iter()
        .map(|&m| {
            let v = match m {
                Metric::Aoi => avg.aoi_bar,
                Metric::Aoa => avg.aoa_bar,
                Metric::Aoai => avg.aoai_bar,
            };
            OutputRow::new(&p, Method::Analytic, m, v, 0.0)
        })
        .collect();
    output::write_rows(out, &rows, a.json)?;
    Ok(EXIT_OK)
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let p = a.rates.params()?;
    let run = engine::run(&p, a.slots, a.seed, a.warmup)?;
    output::write_rows(out, &output::sim_rows(&p, &run, &a.metrics), a.json)?;
    Ok(EXIT_OK)
}

fn cmd_chain(a: ChainArgs, out: &mut dyn Write) -> CmdResult {
    let p = a.rates.params()?;
    let cap = match (a.cap, a.tail_eps) {
        (Some(cap), _) => cap,
        (None, Some(eps)) => choose_cap(&p, eps)?,
        (None, None) => unreachable!("clap requires one of --cap, --tail-eps"),
    };
    let chain: TruncatedChain = match a.metric {
        Metric::Aoa => build_aoa_chain(&p, cap)?,
        Metric::Aoi | Metric::Aoai => build_aoai_chain(&p, cap)?,
    };
    if let Some(path) = &a.dump {
        let mut buf = Vec::new();
        chain.dump(&mut buf)?;
        fs::write(path, buf)?;
    }
    let dist = markov::stationary(&chain, a.tol)?;
    let mean = match a.metric {
        Metric::Aoi => mean_information_age(&dist, &chain)?,
        _ => mean_age(&dist, &chain)?,
    };
    let row = OutputRow {
        cap: Some(cap),
        ..OutputRow::new(&p, Method::Chain, a.metric, mean.mean, mean.truncation_bound)
    };
    output::write_rows(out, &[row], a.json)?;
    Ok(EXIT_OK)
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => builder = builder.num_threads(n),
            _ => {
                return Err(Failure {
                    code: EXIT_USAGE,
                    message: format!("{THREADS_ENV} must be a positive integer, found `{v}`"),
                })
            }
        }
    }
    builder.build().map_err(|e| Failure {
        code: EXIT_NUMERICAL,
        message: format!("thread pool: {e}"),
    })
}

fn run_sweep(g: &GridArgs, cfg: &CheckConfig) -> Result<SweepReport, Failure> {
    let pool = thread_pool()?;
    Ok(pool.install(|| validation::sweep(&g.grid, cfg))?)
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write) -> CmdResult {
    let mut methods = a.methods.clone();
    methods.sort();
    methods.dedup();
    let cfg = CheckConfig {
        methods,
        slots: a.slots,
        seed: a.grid.seed,
        warmup: a.grid.warmup,
        tail_eps: a.grid.tail_eps,
        ..CheckConfig::default()
    };
    let report = run_sweep(&a.grid, &cfg)?;
    let rows: Vec<OutputRow> = report.points.iter().flat_map(output::point_rows).collect();
    let mut buf = Vec::new();
    output::write_rows(&mut buf, &rows, a.json)?;
    match &a.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &buf) {
                let _ = fs::remove_file(path);
                return Err(e.into());
            }
        }
        None => out.write_all(&buf)?,
    }
    Ok(EXIT_OK)
}

fn cmd_validate(a: ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let cfg = CheckConfig {
        slots: a.slots,
        seed: a.grid.seed,
        warmup: a.grid.warmup,
        tol_rel: a.tol_rel,
        tail_eps: a.grid.tail_eps,
        ..CheckConfig::default()
    };
    let report = run_sweep(&a.grid, &cfg)?;
    let est = |e: Option<validation::Estimate>| match e {
        Some(e) => format!("{}+-{}", fmt_g9(e.value), fmt_g9(e.uncertainty)),
        None => "-".into(),
    };
    for r in &report.rows {
        writeln!(
            out,
            "{} lambda1={} lambda2={} metric={} analytic={} sim={} chain={} series={} max_rel_disagreement={}",
            if r.pass { "PASS" } else { "FAIL" },
            fmt_g9(r.params.lambda1()),
            fmt_g9(r.params.lambda2()),
            r.metric,
            fmt_g9(r.analytic),
            est(r.simulated),
            est(r.chain),
            est(r.series),
            fmt_g9(r.max_rel_disagreement),
        )?;
    }
    let failed = report.failures().count();
    writeln!(
        out,
        "points={} checks={} failed={}",
        report.grid.len(),
        report.rows.len(),
        failed
    )?;
    writeln!(out, "ordering_holds={}", report.ordering_violations.is_empty())?;
    for v in &report.ordering_violations {
        writeln!(
            out,
            "ordering_violation lambda1={} lambda2={} aoi={} aoa={} aoai={}",
            fmt_g9(v.params.lambda1()),
            fmt_g9(v.params.lambda2()),
            fmt_g9(v.averages.aoi_bar),
            fmt_g9(v.averages.aoa_bar),
            fmt_g9(v.averages.aoai_bar),
        )?;
    }
    writeln!(
        out,
        "aoa_nonmonotone_witnesses={}",
        report.aoa_nonmonotone_witnesses.len()
    )?;
    for (l2, lo, hi) in &report.aoa_nonmonotone_witnesses {
        writeln!(
            out,
            "aoa_nonmonotone lambda2={} lambda1_low={} lambda1_high={}",
            fmt_g9(*l2),
            fmt_g9(*lo),
            fmt_g9(*hi)
        )?;
    }
    writeln!(out, "aoai_monotone={}", report.aoai_monotone)?;
    writeln!(out, "symmetry_max_rel_dev={}", fmt_g9(report.symmetry_max_rel_dev))?;
    if failed > 0 {
        writeln!(err, "{failed} of {} checks failed", report.rows.len())?;
        return Ok(EXIT_VALIDATION);
    }
    Ok(EXIT_OK)
}

fn cmd_trace(a: TraceArgs, out: &mut dyn Write) -> CmdResult {
    let file = fs::File::open(&a.events).map_err(|e| Failure {
        code: EXIT_USAGE,
        message: format!("{}: {e}", a.events.display()),
    })?;
    let events = engine::read_events(std::io::BufReader::new(file))?;
    let trace = run_trace(&events);
    output::write_trace(out, &events, &trace, a.json)?;
    Ok(EXIT_OK)
}
