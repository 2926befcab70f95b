//! The `mbridge` command line: bridge sampling, forward simulation,
//! generator estimation, benchmarks and stationary times.
//!
//! States are 1-indexed on the command line and in every file.

pub mod config;
pub mod table;


use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use mbridge::bench::{
    accuracy_experiment, builtin_generator, plot_script, records_to_csv, run_study,
    speed_experiment, ExperimentConfig, GeneratorSpec, StudyConfig,
};
use mbridge::inference::{
    gibbs_estimate, mcem_estimate, summarize_trace, GammaPrior, GibbsConfig, McemConfig,
    ObservationSeries, SamplingConfig,
};
use mbridge::{
    sample_bridge, simulate_forward, stationary_time, BridgeProblem, Execution, Generator, Method,
    Path, SeedTree, StationaryTimeOptions, SufficientStats, TirMode,
};
use nalgebra::DMatrix;
use thiserror::Error;

pub use config::ConfigFile;
pub use table::{emit_table1, Table1};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] mbridge::Error),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) | CliError::Io(_) => 1,
        }
    }
}

fn missing(flag: &str) -> CliError {
    CliError::Usage(format!("MissingRequired: --{flag} is required"))
}

#[derive(Debug, Parser)]
#[command(
    name = "mbridge",
    version,
    about = "Markov bridge sampling and generator estimation"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Common {
    /// Flat key = value file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in generator: uniform, model2 or study4.
    #[arg(
        long,
        global = true,
        visible_alias = "model",
        conflicts_with = "generator_file"
    )]
    pub generator: Option<String>,
    /// Generator file: the state count, then the matrix rows.
    #[arg(long, global = true)]
    pub generator_file: Option<PathBuf>,
    /// State count of the uniform family.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Root seed; 42 when absent
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Time-reversal sampler variant: paper or reversed (default)
    #[arg(long, global = true)]
    pub tir_mode: Option<TirMode>,
    /// Run without the thread pool.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Sample one endpoint-conditioned path.
    Bridge(BridgeArgs),
    /// Simulate the unconditioned process.
    Simulate(SimulateArgs),
    /// Estimate a generator from discrete observations.
    Estimate(EstimateArgs),
    /// Run an experiment from the benchmark harness.
    Bench(BenchArgs),
    /// Time until the transition matrix is within eps of stationarity.
    Stationary(StationaryArgs),
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct BridgeArgs {
    #[arg(long)]
    pub a: Option<usize>,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub max_attempts: Option<u64>,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub start: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// Emit observations on a grid with this spacing instead of the path.
    #[arg(long)]
    pub observe: Option<f64>,
    /// Also write the path's sufficient statistics here.
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Mcem,
    Gibbs,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub algo: Option<Algo>,
    /// Observations as `time,state` CSV.
    #[arg(long)]
    pub obs: Option<PathBuf>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Bridges per gap in each MCEM E-step.
    #[arg(long)]
    pub bridges: Option<usize>,
    /// Initial value of every off-diagonal rate.
    #[arg(long)]
    pub init: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub prior_shape: Option<f64>,
    #[arg(long)]
    pub prior_rate: Option<f64>,
    #[arg(long)]
    pub method: Option<Method>,
    /// Iterates summarized at the end of the trace.
    #[arg(long)]
    pub tail: Option<usize>,
    /// Write `i,j,mean,q025,q975` here.
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Accuracy,
    Speed,
    Stationary,
    Table1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum TableFormat {
    #[default]
    Csv,
    Text,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub experiment: Option<Experiment>,
    /// Horizons: `1:6`, `1:6:0.5` or `1,2,4`.
    #[arg(long = "T")]
    pub t: Option<String>,
    /// State counts of the uniform family, same syntax as `--T`.
    #[arg(long)]
    pub ns: Option<String>,
    /// Bridges per cell.
    #[arg(long)]
    pub m: Option<usize>,
    /// Repetitions of each cell
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Random endpoint pairs per cell
    #[arg(long)]
    pub endpoint_pairs: Option<usize>,
    /// Comma-separated method names.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Also write a plotting script for the CSV here.
    #[arg(long)]
    pub plot_script: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<TableFormat>,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct StationaryArgs {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub ns: Option<String>,
}

macro_rules! value_enum_from_str {
    ($($t:ty),*) => {$(
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                <$t as ValueEnum>::from_str(s, false)
            }
        }
    )*};
}
value_enum_from_str!(Algo, Experiment, TableFormat);

/// A parsed command line with the config file merged in.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub common: Common,
    pub seed: u64,
    pub seed_defaulted: bool,
}

impl Invocation {
    fn exec(&self) -> Execution {
        if self.common.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn tir_mode(&self) -> TirMode {
        self.common.tir_mode.unwrap_or_default()
    }

    fn generator_spec(&self, default: &str) -> GeneratorSpec {
        match (&self.common.generator_file, &self.common.generator) {
            (Some(path), _) => GeneratorSpec::File(path.clone()),
            (None, name) => GeneratorSpec::Builtin {
                name: name.clone().unwrap_or_else(|| default.to_string()),
                n: self.common.n,
            },
        }
    }

    fn generator(&self) -> Result<Generator, CliError> {
        if self.common.generator.is_none() && self.common.generator_file.is_none() {
            return Err(missing("generator"));
        }
        Ok(self.generator_spec("").load()?)
    }

    fn is_randomized(&self) -> bool {
        match &self.command {
            Command::Stationary(_) => false,
            Command::Bench(b) => b.experiment != Some(Experiment::Stationary),
            _ => true,
        }
    }
}

fn merge_config(
    common: &mut Common,
    command: &mut Command,
    mut cfg: ConfigFile,
) -> Result<(), CliError> {
    cfg.fill(&mut common.generator, "generator")?;
    cfg.fill(&mut common.generator_file, "generator-file")?;
    cfg.fill(&mut common.n, "n")?;
    cfg.fill(&mut common.seed, "seed")?;
    cfg.fill(&mut common.out, "out")?;
    cfg.fill(&mut common.tir_mode, "tir-mode")?;
    cfg.fill_flag(&mut common.sequential, "sequential")?;
    match command {
        Command::Bridge(a) => {
            cfg.fill(&mut a.a, "a")?;
            cfg.fill(&mut a.b, "b")?;
            cfg.fill(&mut a.t, "T")?;
            cfg.fill(&mut a.method, "method")?;
            cfg.fill(&mut a.max_attempts, "max-attempts")?;
        }
        Command::Simulate(a) => {
            cfg.fill(&mut a.start, "start")?;
            cfg.fill(&mut a.t, "T")?;
            cfg.fill(&mut a.observe, "observe")?;
            cfg.fill(&mut a.stats_out, "stats-out")?;
        }
        Command::Estimate(a) => {
            cfg.fill(&mut a.algo, "algo")?;
            cfg.fill(&mut a.obs, "obs")?;
            cfg.fill(&mut a.iters, "iters")?;
            cfg.fill(&mut a.bridges, "bridges")?;
            cfg.fill(&mut a.init, "init")?;
            cfg.fill(&mut a.burn_in, "burn-in")?;
            cfg.fill(&mut a.prior_shape, "prior-shape")?;
            cfg.fill(&mut a.prior_rate, "prior-rate")?;
            cfg.fill(&mut a.method, "method")?;
            cfg.fill(&mut a.tail, "tail")?;
            cfg.fill(&mut a.summary_out, "summary-out")?;
        }
        Command::Bench(a) => {
            cfg.fill(&mut a.experiment, "experiment")?;
            cfg.fill(&mut a.t, "T")?;
            cfg.fill(&mut a.ns, "ns")?;
            cfg.fill(&mut a.m, "m")?;
            cfg.fill(&mut a.replicates, "replicates")?;
            cfg.fill(&mut a.endpoint_pairs, "endpoint-pairs")?;
            cfg.fill(&mut a.methods, "methods")?;
            cfg.fill(&mut a.eps, "eps")?;
            cfg.fill(&mut a.plot_script, "plot-script")?;
            cfg.fill(&mut a.format, "format")?;
        }
        Command::Stationary(a) => {
            cfg.fill(&mut a.eps, "eps")?;
            cfg.fill(&mut a.ns, "ns")?;
        }
    }
    cfg.finish()?;
    if common.generator.is_some() && common.generator_file.is_some() {
        return Err(CliError::Usage(
            "ConflictingFlags: --generator and --generator-file are mutually exclusive".into(),
        ));
    }
    Ok(())
}

fn usage_from_clap(e: &clap::Error) -> CliError {
    let tag = match e.kind() {
        ErrorKind::UnknownArgument | ErrorKind::InvalidSubcommand => "UnknownFlag",
        ErrorKind::MissingRequiredArgument | ErrorKind::MissingSubcommand => "MissingRequired",
        ErrorKind::ArgumentConflict => "ConflictingFlags",
        _ => "usage",
    };
    let first = e.to_string();
    let first = first
        .lines()
        .next()
        .unwrap_or("")
        .trim_start_matches("error: ")
        .to_string();
    CliError::Usage(format!("{tag}: {first}"))
}

/// Parses `argv` (program name first) and merges the config file.
///
/// Help and version requests come back as `Err(Ok(text))`.
pub fn parse_invocation<I, T>(argv: I) -> Result<Invocation, Result<String, CliError>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Err(Ok(e.to_string()));
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            return Err(Err(CliError::Usage(
                "MissingRequired: a subcommand is required".into(),
            )));
        }
        Err(e) => return Err(Err(usage_from_clap(&e))),
    };
    let Args {
        mut command,
        mut common,
    } = args;
    if let Some(path) = common.config.clone() {
        let cfg = ConfigFile::load(&path).map_err(Err)?;
        merge_config(&mut common, &mut command, cfg).map_err(Err)?;
    }
    let seed_defaulted = common.seed.is_none();
    Ok(Invocation {
        seed: common.seed.unwrap_or(DEFAULT_SEED),
        command,
        common,
        seed_defaulted,
    })
}

/// Runs an invocation, writing to `--out` or `stdout`.
pub fn run(
    inv: &Invocation,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    if inv.seed_defaulted && inv.is_randomized() {
        let _ = writeln!(
            stderr,
            "note: no --seed given, using default seed {DEFAULT_SEED}"
        );
    }
    let text = match &inv.command {
        Command::Bridge(a) => run_bridge(inv, a)?,
        Command::Simulate(a) => run_simulate(inv, a)?,
        Command::Estimate(a) => run_estimate(inv, a)?,
        Command::Bench(a) => run_bench(inv, a)?,
        Command::Stationary(a) => run_stationary(inv, a)?,
    };
    match &inv.common.out {
        Some(path) => write_file(path, &text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

/// Parses, runs and reports. Returns the process exit code.
pub fn execute<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = match parse_invocation(argv) {
        Ok(inv) => run(&inv, stdout, stderr),
        Err(Ok(text)) => {
            return if stdout.write_all(text.as_bytes()).is_ok() {
                0
            } else {
                1
            }
        }
        Err(Err(e)) => Err(e),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// The whole binary.
pub fn main_with_args<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    ExitCode::from(execute(
        argv,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    ))
}

fn write_file(path: &FsPath, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn state_index(value: Option<usize>, flag: &str) -> Result<usize, CliError> {
    match value {
        None => Err(missing(flag)),
        Some(0) => Err(CliError::Usage(format!(
            "--{flag}: states are numbered from 1"
        ))),
        Some(s) => Ok(s - 1),
    }
}

/// `time,state` rows: the start, every jump, then the horizon.
pub fn path_csv(p: &Path) -> String {
    let mut out = String::from("time,state\n");
    let _ = writeln!(out, "0,{}", p.initial_state() + 1);
    for &(t, s) in p.jumps() {
        let _ = writeln!(out, "{t},{}", s + 1);
    }
    let _ = writeln!(out, "{},{}", p.horizon(), p.end_state() + 1);
    out
}

/// Expands `lo:hi`, `lo:hi:step` or a comma list.
pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse list {text:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let (lo, hi, step) = match parts[..] {
            [lo, hi] => (num(lo)?, num(hi)?, 1.0),
            [lo, hi, step] => (num(lo)?, num(hi)?, num(step)?),
            _ => return Err(bad()),
        };
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|k| lo + k as f64 * step).collect());
    }
    text.split(',').map(num).collect()
}

fn parse_counts(text: &str) -> Result<Vec<usize>, CliError> {
    parse_list(text)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Usage(format!(
                    "expected whole numbers in {text:?}"
                )))
            }
        })
        .collect()
}

fn run_bridge(inv: &Invocation, a: &BridgeArgs) -> Result<String, CliError> {
    let g = inv.generator()?;
    let from = state_index(a.a, "a")?;
    let to = state_index(a.b, "b")?;
    let t = a.t.ok_or_else(|| missing("T"))?;
    let mut prob = BridgeProblem::new(from, to, t, a.method.unwrap_or(Method::TimeReverse))
        .with_tir_mode(inv.tir_mode());
    if let Some(m) = a.max_attempts {
        prob = prob.with_max_attempts(m);
    }
    let sample = sample_bridge(&g, &prob, &mut SeedTree::new(inv.seed).rng())?;
    Ok(path_csv(&sample.path))
}

fn run_simulate(inv: &Invocation, a: &SimulateArgs) -> Result<String, CliError> {
    let g = inv.generator()?;
    let start = state_index(a.start.or(Some(1)), "start")?;
    let t = a.t.ok_or_else(|| missing("T"))?;
    let path = simulate_forward(&g, start, t, &mut SeedTree::new(inv.seed).rng())?;
    if let Some(stats_path) = &a.stats_out {
        write_file(
            stats_path,
            &SufficientStats::accumulate(&path, g.n_states())?.to_csv(),
        )?;
    }
    match a.observe {
        None => Ok(path_csv(&path)),
        Some(dt) if dt > 0.0 => {
            let steps = (t / dt + 1e-9).floor() as usize;
            let times = (0..=steps).map(|k| k as f64 * dt).collect();
            Ok(ObservationSeries::from_path(&path, times)?.to_csv())
        }
        Some(dt) => Err(CliError::Usage(format!(
            "--observe must be positive, got {dt}"
        ))),
    }
}

fn run_estimate(inv: &Invocation, a: &EstimateArgs) -> Result<String, CliError> {
    let algo = a.algo.ok_or_else(|| missing("algo"))?;
    let obs_path = a.obs.as_ref().ok_or_else(|| missing("obs"))?;
    let text = std::fs::read_to_string(obs_path)
        .map_err(|e| CliError::Io(format!("{}: {e}", obs_path.display())))?;
    let obs = ObservationSeries::from_csv(&text)?;
    let start = if inv.common.generator.is_some() || inv.common.generator_file.is_some() {
        inv.generator()?
    } else {
        let n = inv.common.n.unwrap_or(obs.max_state() + 1).max(2);
        let init = a.init.unwrap_or(0.5);
        Generator::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                -(n as f64 - 1.0) * init
            } else {
                init
            }
        }))?
    };
    let sampling = SamplingConfig {
        method: a.method.unwrap_or(Method::TimeReverse),
        tir_mode: inv.tir_mode(),
        exec: inv.exec(),
        ..SamplingConfig::default()
    };
    let seeds = SeedTree::new(inv.seed);
    let (trace, tail) = match algo {
        Algo::Mcem => {
            let iters = a.iters.unwrap_or(150);
            let cfg = McemConfig {
                iters,
                bridges_per_gap: a.bridges.unwrap_or(100),
                sampling,
            };
            (
                mcem_estimate(&start, &obs, &cfg, &seeds)?,
                a.tail.unwrap_or(iters.min(100)),
            )
        }
        Algo::Gibbs => {
            let iters = a.iters.unwrap_or(500);
            let burn_in = a.burn_in.unwrap_or(iters * 3 / 5);
            let prior = GammaPrior::constant(
                start.n_states(),
                a.prior_shape.unwrap_or(1.0),
                a.prior_rate.unwrap_or(1.0),
            )?;
            let cfg = GibbsConfig {
                iters,
                burn_in,
                sampling,
            };
            let trace = gibbs_estimate(&start, &obs, &prior, &cfg, &seeds)?;
            (trace, a.tail.unwrap_or(iters.saturating_sub(burn_in)))
        }
    };
    if let Some(path) = &a.summary_out {
        let mut out = String::from("i,j,mean,q025,q975\n");
        for s in summarize_trace(&trace, tail)? {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.i + 1,
                s.j + 1,
                s.mean,
                s.q025,
                s.q975
            );
        }
        write_file(path, &out)?;
    }
    Ok(trace.to_csv())
}

fn parse_methods(text: &str) -> Result<Vec<Method>, CliError> {
    text.split(',')
        .map(|m| {
            m.trim()
                .parse::<Method>()
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect()
}

fn run_bench(inv: &Invocation, a: &BenchArgs) -> Result<String, CliError> {
    let experiment = a.experiment.ok_or_else(|| missing("experiment"))?;
    if experiment == Experiment::Table1 {
        return run_table1(inv, a);
    }
    let spec = inv.generator_spec("uniform");
    let ns = match (&a.ns, inv.common.n) {
        (Some(text), _) => parse_counts(text)?,
        (None, Some(n)) => vec![n],
        (None, None) => vec![3],
    };
    let mut cfg = ExperimentConfig {
        generator: spec,
        tir_mode: inv.tir_mode(),
        ns,
        seed: inv.seed,
        exec: inv.exec(),
        ..ExperimentConfig::default()
    };
    if let Some(t) = &a.t {
        cfg.times = parse_list(t)?;
    }
    if let Some(m) = a.m {
        cfg.samples = m;
    }
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    if let Some(p) = a.endpoint_pairs {
        cfg.endpoint_pairs = p;
    }
    if let Some(methods) = &a.methods {
        cfg.methods = parse_methods(methods)?;
    }
    if let Some(eps) = a.eps {
        cfg.eps = eps;
    }
    let records = match experiment {
        Experiment::Accuracy => accuracy_experiment(&cfg)?,
        Experiment::Speed => speed_experiment(&cfg)?,
        Experiment::Stationary => mbridge::bench::stationary_time_table(&cfg)?,
        Experiment::Table1 => unreachable!(),
    };
    if let Some(script) = &a.plot_script {
        let csv = inv
            .common
            .out
            .as_deref()
            .map_or("results.csv".into(), |p| p.display().to_string());
        write_file(script, &plot_script(&csv))?;
    }
    Ok(records_to_csv(&records))
}

fn run_table1(inv: &Invocation, a: &BenchArgs) -> Result<String, CliError> {
    let g = match (&inv.common.generator, &inv.common.generator_file) {
        (None, None) => builtin_generator("study4", None)?,
        _ => inv.generator()?,
    };
    let mut cfg = StudyConfig::default();
    cfg.sampling.tir_mode = inv.tir_mode();
    cfg.sampling.exec = inv.exec();
    if let Some(methods) = &a.methods {
        match parse_methods(methods)?[..] {
            [m] => cfg.sampling.method = m,
            _ => return Err(CliError::Usage("table1 takes a single method".into())),
        }
    }
    let result = run_study(&g, &cfg, inv.seed)?;
    let table = emit_table1(&result.rows);
    Ok(match a.format.unwrap_or_default() {
        TableFormat::Csv => table.to_csv(),
        TableFormat::Text => table.to_text(),
    })
}

fn run_stationary(inv: &Invocation, a: &StationaryArgs) -> Result<String, CliError> {
    let opts = StationaryTimeOptions {
        eps: a.eps.unwrap_or(0.005),
        ..StationaryTimeOptions::default()
    };
    let mut out = String::from("n,eps,rho\n");
    let uniform_family =
        inv.common.generator.as_deref() == Some("uniform") && inv.common.generator_file.is_none();
    let generators: Vec<Generator> = match &a.ns {
        Some(text) if uniform_family => parse_counts(text)?
            .into_iter()
            .map(|n| builtin_generator("uniform", Some(n)))
            .collect::<Result<_, _>>()?,
        Some(_) => {
            return Err(CliError::Usage(
                "--ns applies to the uniform family only".into(),
            ))
        }
        None => vec![inv.generator()?],
    };
    for g in &generators {
        let rho = stationary_time(g, opts)?;
        let _ = writeln!(out, "{},{},{rho}", g.n_states(), opts.eps);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_expand() {
        assert_eq!(
            parse_list("1:6").unwrap(),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        );
        assert_eq!(parse_list("0.5:1.5:0.5").unwrap(), vec![0.5, 1.0, 1.5]);
        assert_eq!(parse_list("2,4").unwrap(), vec![2.0, 4.0]);
        assert!(parse_list("3:1").is_err());
        assert!(parse_counts("1.5").is_err());
    }

    #[test]
    fn constant_path_has_two_rows() {
        assert_eq!(path_csv(&Path::constant(1, 2.0)), "time,state\n0,2\n2,2\n");
    }

    #[test]
    fn conflicting_generators_are_rejected() {
        let err = parse_invocation([
            "mbridge",
            "stationary",
            "--generator",
            "model2",
            "--generator-file",
            "g.txt",
        ])
        .unwrap_err()
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().starts_with("ConflictingFlags"));
    }
}
