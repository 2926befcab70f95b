//! Experiment drivers: stationary times, accuracy against the analytic
//! expectations, per-bridge timings and the four-state estimation study.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;

use crate::bridge::{sample_bridge, BridgeProblem, Method, TirMode};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::generator::{stationary_time, Generator, StationaryTimeOptions};
use crate::inference::{
    gibbs_estimate, mcem_estimate, sample_posterior_generator, summarize_trace, GammaPrior,
    GibbsConfig, McemConfig, ObservationSeries, ParameterSummary, SamplingConfig,
};
use crate::path::simulate_forward;
use crate::rng::{label_key, SeedTree};
use crate::stats::{expected_stats_uniform_closed_form, SufficientStats};

/// Names accepted by [`builtin_generator`].
pub const BUILTIN_NAMES: [&str; 3] = ["uniform", "model2", "study4"];

/// Built-in generators: the symmetric family (`uniform`, 3 to 20 states,
/// diagonal `-1`, off-diagonal `1/(n-1)`), the three-state `model2` and the
/// four-state `study4`.
pub fn builtin_generator(name: &str, n: Option<usize>) -> Result<Generator> {
    match name {
        "uniform" => {
            let n = n.ok_or_else(|| Error::BadDimension("uniform needs a state count".into()))?;
            if !(3..=20).contains(&n) {
                return Err(Error::BadDimension(format!(
                    "uniform needs 3..=20 states, got {n}"
                )));
            }
            let off = 1.0 / (n as f64 - 1.0);
            Generator::new(DMatrix::from_fn(
                n,
                n,
                |i, j| if i == j { -1.0 } else { off },
            ))
        }
        "model2" => {
            Generator::from_rows(&[&[-2.0, 1.0, 1.0], &[0.0, -10.0, 10.0], &[4.0, 1.0, -5.0]])
        }
        "study4" => Generator::from_rows(&[
            &[-4.0, 2.0, 1.0, 1.0],
            &[0.0, -3.0, 2.0, 1.0],
            &[1.0, 0.0, -3.0, 2.0],
            &[2.0, 1.0, 1.0, -4.0],
        ]),
        other => Err(Error::UnknownName(format!("generator {other:?}"))),
    }
}

/// Where an experiment's generator comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Builtin { name: String, n: Option<usize> },
    File(PathBuf),
}

impl GeneratorSpec {
    pub fn load(&self) -> Result<Generator> {
        match self {
            GeneratorSpec::Builtin { name, n } => builtin_generator(name, *n),
            GeneratorSpec::File(path) => Generator::from_file(path),
        }
    }

    /// Generator for a given state count; only the symmetric family varies.
    fn load_with(&self, n: usize) -> Result<Generator> {
        match self {
            GeneratorSpec::Builtin { name, .. } if name == "uniform" => {
                builtin_generator(name, Some(n))
            }
            other => other.load(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    pub methods: Vec<Method>,
    pub tir_mode: TirMode,
    /// Horizons for the speed experiment.
    pub times: Vec<f64>,
    /// State counts for the symmetric family.
    pub ns: Vec<usize>,
    /// Bridges per cell.
    pub samples: usize,
    /// Timing replicates per speed cell.
    pub replicates: usize,
    /// Endpoint pairs per accuracy cell.
    pub endpoint_pairs: usize,
    pub seed: u64,
    pub eps: f64,
    pub exec: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorSpec::Builtin {
                name: "uniform".into(),
                n: Some(3),
            },
            methods: Method::ALL.to_vec(),
            tir_mode: TirMode::default(),
            times: vec![1.0],
            ns: vec![3],
            samples: 1000,
            replicates: 3,
            endpoint_pairs: 5,
            seed: 42,
            eps: 0.005,
            exec: Execution::default(),
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidArgument(
                "samples per cell must be at least 1".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        Ok(())
    }

    fn problem(&self, a: usize, b: usize, horizon: f64, method: Method) -> BridgeProblem {
        BridgeProblem::new(a, b, horizon, method).with_tir_mode(self.tir_mode)
    }
}

/// One row of experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub experiment: String,
    pub method: String,
    pub n: usize,
    pub t: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub seconds: f64,
    pub seed: u64,
}

pub const RECORD_HEADER: &str = "experiment,method,n,T,metric,value,stderr,seconds,seed";

/// Sorts records by every column but the timing and renders them as CSV.
pub fn records_to_csv(records: &[BenchRecord]) -> String {
    let mut sorted = records.to_vec();
    sorted.sort_by(|x, y| {
        (&x.experiment, &x.method, x.n, &x.metric)
            .cmp(&(&y.experiment, &y.method, y.n, &y.metric))
            .then(x.t.total_cmp(&y.t))
    });
    let mut out = format!("{RECORD_HEADER}\n");
    for r in &sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.experiment, r.method, r.n, r.t, r.metric, r.value, r.stderr, r.seconds, r.seed
        );
    }
    out
}

fn failure(
    experiment: &str,
    method: &str,
    n: usize,
    t: f64,
    seed: u64,
    seconds: f64,
) -> BenchRecord {
    BenchRecord {
        experiment: experiment.into(),
        method: method.into(),
        n,
        t,
        metric: "failed".into(),
        value: 1.0,
        stderr: 0.0,
        seconds,
        seed,
    }
}

/// Stationary time of the symmetric family for each configured `n`.
pub fn stationary_time_table(cfg: &ExperimentConfig) -> Result<Vec<BenchRecord>> {
    let opts = StationaryTimeOptions {
        eps: cfg.eps,
        ..Default::default()
    };
    let mut out = Vec::with_capacity(cfg.ns.len());
    for &n in &cfg.ns {
        let start = Instant::now();
        let g = builtin_generator("uniform", Some(n))?;
        let record = match stationary_time(&g, opts) {
            Ok(rho) => BenchRecord {
                experiment: "stationary".into(),
                method: "-".into(),
                n,
                t: rho,
                metric: "rho".into(),
                value: rho,
                stderr: 0.0,
                seconds: start.elapsed().as_secs_f64(),
                seed: cfg.seed,
            },
            Err(Error::NotConverged { .. }) => {
                failure("stationary", "-", n, f64::NAN, cfg.seed, 0.0)
            }
            Err(e) => return Err(e),
        };
        out.push(record);
    }
    Ok(out)
}

/// Uniformly random endpoint pair on `n` states.
fn endpoints<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (usize, usize) {
    (rng.random_range(0..n), rng.random_range(0..n))
}

/// Monte Carlo error of one accuracy cell: 1-norm distances between the
/// averaged bridge statistics and the closed-form expectations, with the
/// summed per-entry standard errors.
struct AccuracyCell {
    n_error: f64,
    n_stderr: f64,
    r_error: f64,
    r_stderr: f64,
}

fn accuracy_cell(
    g: &Generator,
    n: usize,
    horizon: f64,
    (a, b): (usize, usize),
    prob: BridgeProblem,
    samples: usize,
    seeds: SeedTree,
) -> Result<AccuracyCell> {
    let expected = expected_stats_uniform_closed_form(n, horizon, a, b)?;
    let mut rng = seeds.rng();
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut sum_sq = DMatrix::<f64>::zeros(n, n);
    let mut rsum = vec![0.0; n];
    let mut rsum_sq = vec![0.0; n];
    for _ in 0..samples {
        let path = sample_bridge(g, &prob, &mut rng)?.path;
        let s = SufficientStats::accumulate(&path, n)?;
        for i in 0..n {
            for j in 0..n {
                let v = s.count(i, j);
                sum[(i, j)] += v;
                sum_sq[(i, j)] += v * v;
            }
            rsum[i] += s.holding_time(i);
            rsum_sq[i] += s.holding_time(i).powi(2);
        }
    }
    let m = samples as f64;
    let se = |s: f64, s2: f64| {
        if samples < 2 {
            return 0.0;
        }
        let mean = s / m;
        ((s2 / m - mean * mean).max(0.0) * m / (m - 1.0)).sqrt() / m.sqrt()
    };
    let mut cell = AccuracyCell {
        n_error: 0.0,
        n_stderr: 0.0,
        r_error: 0.0,
        r_stderr: 0.0,
    };
    for i in 0..n {
        for j in 0..n {
            if i != j {
                cell.n_error += (sum[(i, j)] / m - expected.counts[(i, j)]).abs();
                cell.n_stderr += se(sum[(i, j)], sum_sq[(i, j)]);
            }
        }
        cell.r_error += (rsum[i] / m - expected.holding[i]).abs();
        cell.r_stderr += se(rsum[i], rsum_sq[i]);
    }
    Ok(cell)
}

/// Accuracy of every method on the symmetric family at `T = rho(n)`.
///
/// Endpoint pairs depend only on `(seed, n, pair)` so every method faces
/// the same workload. Emits `N_l1` and `R_l1` records: the 1-norm errors
/// averaged over endpoint pairs, with standard errors averaged likewise.
pub fn accuracy_experiment(cfg: &ExperimentConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let root = SeedTree::new(cfg.seed).child(label_key("accuracy"));
    let opts = StationaryTimeOptions {
        eps: cfg.eps,
        ..Default::default()
    };
    let pairs = cfg.endpoint_pairs.max(1);
    let mut records = Vec::new();
    for &n in &cfg.ns {
        let g = builtin_generator("uniform", Some(n))?;
        let horizon = stationary_time(&g, opts)?;
        let ends: Vec<(usize, usize)> = (0..pairs)
            .map(|c| endpoints(&mut root.stream(&[n as u64, u64::MAX, c as u64]), n))
            .collect();
        let jobs: Vec<(Method, usize)> = cfg
            .methods
            .iter()
            .flat_map(|&m| (0..pairs).map(move |c| (m, c)))
            .collect();
        let results = map_indexed(cfg.exec, jobs.len(), |k| {
            let (method, c) = jobs[k];
            let start = Instant::now();
            let seeds = root.descend(&[n as u64, label_key(method.name()), c as u64]);
            let cell = accuracy_cell(
                &g,
                n,
                horizon,
                ends[c],
                cfg.problem(ends[c].0, ends[c].1, horizon, method),
                cfg.samples,
                seeds,
            );
            (cell, start.elapsed().as_secs_f64())
        });
        for &method in &cfg.methods {
            let mut acc = [0.0; 4];
            let mut seconds = 0.0;
            let mut failed = false;
            for (k, (cell, secs)) in results.iter().enumerate() {
                if jobs[k].0 != method {
                    continue;
                }
                seconds += secs;
                match cell {
                    Ok(c) => {
                        acc[0] += c.n_error;
                        acc[1] += c.n_stderr;
                        acc[2] += c.r_error;
                        acc[3] += c.r_stderr;
                    }
                    Err(_) => failed = true,
                }
            }
            if failed {
                records.push(failure(
                    "accuracy",
                    method.name(),
                    n,
                    horizon,
                    cfg.seed,
                    seconds,
                ));
                continue;
            }
            let p = pairs as f64;
            for (metric, value, stderr) in [
                ("N_l1", acc[0] / p, acc[1] / p),
                ("R_l1", acc[2] / p, acc[3] / p),
            ] {
                records.push(BenchRecord {
                    experiment: "accuracy".into(),
                    method: method.name().into(),
                    n,
                    t: horizon,
                    metric: metric.into(),
                    value,
                    stderr,
                    seconds,
                    seed: cfg.seed,
                });
            }
        }
    }
    Ok(records)
}

/// Number of untimed bridges run before each timed cell.
const WARM_UP: usize = 50;

/// Per-bridge wall-clock time of every method at every configured horizon.
///
/// Each cell times `samples` bridges with uniformly random endpoints
/// (shared across methods), `replicates` times, sequentially, after an
/// untimed warm-up. Emits `time_per_bridge` (median over replicates, with
/// the standard error of the replicate mean), `attempts_per_bridge`, and a
/// `failure_rate` record when some bridges fail.
pub fn speed_experiment(cfg: &ExperimentConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let replicates = cfg.replicates.max(1);
    let root = SeedTree::new(cfg.seed).child(label_key("speed"));
    let mut records = Vec::new();
    let ns: Vec<usize> = match &cfg.generator {
        GeneratorSpec::Builtin { name, n } if name == "uniform" => {
            if cfg.ns.is_empty() {
                vec![n.unwrap_or(3)]
            } else {
                cfg.ns.clone()
            }
        }
        _ => vec![0],
    };
    for n_cfg in ns {
        let g = cfg.generator.load_with(n_cfg)?;
        let n = g.n_states();
        for &horizon in &cfg.times {
            let ends: Vec<(usize, usize)> = {
                let mut rng = root.stream(&[n as u64, horizon.to_bits()]);
                (0..cfg.samples).map(|_| endpoints(&mut rng, n)).collect()
            };
            for &method in &cfg.methods {
                let seeds = root.descend(&[n as u64, horizon.to_bits(), label_key(method.name())]);
                let mut warm = seeds.stream(&[u64::MAX]);
                for &(a, b) in ends.iter().cycle().take(WARM_UP) {
                    let _ = sample_bridge(&g, &cfg.problem(a, b, horizon, method), &mut warm);
                }
                let mut times = Vec::with_capacity(replicates);
                let mut attempts = 0u64;
                let mut failures = 0usize;
                let mut total_seconds = 0.0;
                for rep in 0..replicates {
                    let mut rng = seeds.stream(&[rep as u64]);
                    let start = Instant::now();
                    for &(a, b) in &ends {
                        match sample_bridge(&g, &cfg.problem(a, b, horizon, method), &mut rng) {
                            Ok(s) => attempts += s.attempts,
                            Err(_) => failures += 1,
                        }
                    }
                    let secs = start.elapsed().as_secs_f64();
                    total_seconds += secs;
                    times.push(secs / cfg.samples as f64);
                }
                let mean = times.iter().sum::<f64>() / replicates as f64;
                let spread = if replicates > 1 {
                    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>()
                        / (replicates - 1) as f64;
                    (var / replicates as f64).sqrt()
                } else {
                    0.0
                };
                times.sort_by(f64::total_cmp);
                let median = if replicates % 2 == 1 {
                    times[replicates / 2]
                } else {
                    0.5 * (times[replicates / 2 - 1] + times[replicates / 2])
                };
                let done = (cfg.samples * replicates - failures).max(1) as f64;
                let base = |metric: &str, value: f64, stderr: f64| BenchRecord {
                    experiment: "speed".into(),
                    method: method.name().into(),
                    n,
                    t: horizon,
                    metric: metric.into(),
                    value,
                    stderr,
                    seconds: total_seconds,
                    seed: cfg.seed,
                };
                records.push(base("time_per_bridge", median, spread));
                records.push(base("attempts_per_bridge", attempts as f64 / done, 0.0));
                if failures > 0 {
                    records.push(base(
                        "failure_rate",
                        failures as f64 / (cfg.samples * replicates) as f64,
                        0.0,
                    ));
                }
            }
        }
    }
    Ok(records)
}

/// Settings of the four-state estimation study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub horizon: f64,
    /// Observations at `k / steps_per_unit` for `k = 0..=horizon*steps_per_unit`.
    pub steps_per_unit: usize,
    pub mcem_iters: usize,
    pub mcem_bridges: usize,
    pub mcem_init: f64,
    pub mcem_tail: usize,
    pub gibbs_iters: usize,
    pub gibbs_burn_in: usize,
    pub prior_shape: f64,
    pub prior_rate: f64,
    pub sampling: SamplingConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            horizon: 10.0,
            steps_per_unit: 10,
            mcem_iters: 150,
            mcem_bridges: 100,
            mcem_init: 0.5,
            mcem_tail: 100,
            gibbs_iters: 500,
            gibbs_burn_in: 300,
            prior_shape: 1.0,
            prior_rate: 1.0,
            sampling: SamplingConfig::default(),
        }
    }
}

/// Simulates the study path (uniform initial state) and observes it on
/// the regular grid.
pub fn study_observations(
    g: &Generator,
    cfg: &StudyConfig,
    seeds: &SeedTree,
) -> Result<ObservationSeries> {
    let mut rng = seeds.stream(&[label_key("data")]);
    let start = rng.random_range(0..g.n_states());
    let path = simulate_forward(g, start, cfg.horizon, &mut rng)?;
    let steps = (cfg.horizon * cfg.steps_per_unit as f64).round() as usize;
    let times = (0..=steps)
        .map(|k| k as f64 / cfg.steps_per_unit as f64)
        .collect();
    ObservationSeries::from_path(&path, times)
}

/// One parameter of the study: truth and both estimators' summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub i: usize,
    pub j: usize,
    pub truth: f64,
    pub mcem: ParameterSummary,
    pub gibbs: ParameterSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub observations: ObservationSeries,
    pub rows: Vec<StudyRow>,
    pub mcem_seconds: f64,
    pub gibbs_seconds: f64,
}

/// Runs both estimators on data simulated from `g` and summarizes them.
pub fn run_study(g: &Generator, cfg: &StudyConfig, seed: u64) -> Result<StudyResult> {
    let root = SeedTree::new(seed);
    let obs = study_observations(g, cfg, &root)?;
    let n = g.n_states();

    let init = Generator::new(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -(n as f64 - 1.0) * cfg.mcem_init
        } else {
            cfg.mcem_init
        }
    }))?;
    let mcem = mcem_estimate(
        &init,
        &obs,
        &McemConfig {
            iters: cfg.mcem_iters,
            bridges_per_gap: cfg.mcem_bridges,
            sampling: cfg.sampling,
        },
        &root.child(label_key("mcem")),
    )?;

    let prior = GammaPrior::constant(n, cfg.prior_shape, cfg.prior_rate)?;
    let gibbs_seeds = root.child(label_key("gibbs"));
    let g0 = Generator::new(sample_posterior_generator(
        &SufficientStats::zeros(n),
        &prior,
        &mut gibbs_seeds.stream(&[label_key("prior")]),
    )?)?;
    let gibbs = gibbs_estimate(
        &g0,
        &obs,
        &prior,
        &GibbsConfig {
            iters: cfg.gibbs_iters,
            burn_in: cfg.gibbs_burn_in,
            sampling: cfg.sampling,
        },
        &gibbs_seeds,
    )?;

    let m = summarize_trace(&mcem, cfg.mcem_tail.min(mcem.len()))?;
    let s = summarize_trace(&gibbs, gibbs.len() - gibbs.burn_in)?;
    let rows = m
        .into_iter()
        .zip(s)
        .map(|(mcem, gibbs)| StudyRow {
            i: mcem.i,
            j: mcem.j,
            truth: g.rate(mcem.i, mcem.j),
            mcem,
            gibbs,
        })
        .collect();
    Ok(StudyResult {
        observations: obs,
        rows,
        mcem_seconds: mcem.meta.seconds,
        gibbs_seconds: gibbs.meta.seconds,
    })
}

/// A matplotlib script that plots the experiment CSV at `csv_path`.
pub fn plot_script(csv_path: &str) -> String {
    format!(
        r#"import sys
import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv(sys.argv[1] if len(sys.argv) > 1 else {csv_path:?})
for (experiment, metric), part in df.groupby(["experiment", "metric"]):
    fig, ax = plt.subplots()
    x = "n" if experiment in ("accuracy", "stationary") else "T"
    for method, rows in part.groupby("method"):
        rows = rows.sort_values(x)
        ax.errorbar(rows[x], rows["value"], yerr=rows["stderr"], marker="o", label=method)
    ax.set_xlabel(x)
    ax.set_ylabel(metric)
    ax.set_title(f"{{experiment}}: {{metric}}")
    ax.legend()
    fig.savefig(f"{{experiment}}_{{metric}}.png", dpi=120)
"#
    )
}
