//! Generator estimation from discretely observed paths: Monte Carlo EM and
//! a Gibbs sampler over latent bridges.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::bridge::{sample_bridge, BridgeProblem, Method, TirMode};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::generator::{transition_matrix, Generator};
use crate::path::Path;
use crate::rng::SeedTree;
use crate::stats::{mle_from_stats, SufficientStats};

/// Rates are kept at or above this value so every iterate stays irreducible.
pub const MIN_RATE: f64 = 1e-12;

/// Tolerance for detecting equally spaced observation times.
pub const SPACING_TOL: f64 = 1e-9;

/// States `x_0, ..., x_m` observed at increasing times `t_0 < ... < t_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    times: Vec<f64>,
    states: Vec<usize>,
    delta: Option<f64>,
}

impl ObservationSeries {
    /// States are 0-indexed.
    pub fn new(times: Vec<f64>, states: Vec<usize>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::InvalidArgument(format!(
                "{} times but {} states",
                times.len(),
                states.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least two observations".into(),
            ));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(
                "observation times must be finite".into(),
            ));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!(
                "observation times must increase strictly, got {} then {}",
                w[0], w[1]
            )));
        }
        let first = times[1] - times[0];
        let delta = times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - first).abs() <= SPACING_TOL)
            .then_some(first);
        Ok(Self {
            times,
            states,
            delta,
        })
    }

    /// Samples `path` at the given times, shifted so that `times[0]` maps to
    /// the path's start.
    pub fn from_path(path: &Path, times: Vec<f64>) -> Result<Self> {
        let t0 = times.first().copied().unwrap_or(0.0);
        let states = times.iter().map(|&t| path.state_at(t - t0)).collect();
        Self::new(times, states)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    /// Common spacing, when the times are equally spaced.
    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn n_gaps(&self) -> usize {
        self.times.len() - 1
    }

    /// `(length, from, to)` of gap `k` (0-indexed).
    pub fn gap(&self, k: usize) -> (f64, usize, usize) {
        (
            self.times[k + 1] - self.times[k],
            self.states[k],
            self.states[k + 1],
        )
    }

    pub fn max_state(&self) -> usize {
        self.states.iter().copied().max().unwrap_or(0)
    }

    /// CSV with header `time,state` and 1-indexed states.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,state\n");
        for (t, s) in self.times.iter().zip(&self.states) {
            let _ = writeln!(out, "{t},{}", s + 1);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some("time,state") => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header 'time,state', got {other:?}"
                )))
            }
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        for line in lines {
            let (t, s) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad observation row {line:?}")))?;
            times.push(
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad time {t:?}")))?,
            );
            match s.trim().parse::<usize>() {
                Ok(k) if k >= 1 => states.push(k - 1),
                _ => return Err(Error::Parse(format!("bad state {s:?}"))),
            }
        }
        Self::new(times, states)
    }
}

/// Independent Gamma priors: shape `a_ij` on each off-diagonal rate and a
/// common rate `b_i` per row.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaPrior {
    pub shape: DMatrix<f64>,
    pub rate: DVector<f64>,
}

impl GammaPrior {
    pub fn new(shape: DMatrix<f64>, rate: DVector<f64>) -> Result<Self> {
        let n = rate.len();
        if shape.nrows() != n || shape.ncols() != n {
            return Err(Error::BadShape {
                rows: shape.nrows(),
                cols: shape.ncols(),
            });
        }
        let off_ok = (0..n)
            .all(|i| (0..n).all(|j| i == j || (shape[(i, j)] > 0.0 && shape[(i, j)].is_finite())));
        if !off_ok || rate.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidArgument(
                "prior hyperparameters must be positive".into(),
            ));
        }
        Ok(Self { shape, rate })
    }

    /// Same `a` for every off-diagonal and `b` for every row.
    pub fn constant(n: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(n, n, a), DVector::from_element(n, b))
    }

    pub fn n_states(&self) -> usize {
        self.rate.len()
    }
}

/// Draws `l_ij ~ Gamma(N_ij + a_ij, R_i + b_i)` independently and sets the
/// diagonal to minus the row sums.
pub fn sample_posterior_generator<R: Rng + ?Sized>(
    s: &SufficientStats,
    prior: &GammaPrior,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let n = s.n_states();
    if prior.n_states() != n {
        return Err(Error::BadDimension(format!(
            "prior on {} states, stats on {n}",
            prior.n_states()
        )));
    }
    let mut rates = DMatrix::zeros(n, n);
    for i in 0..n {
        let rate = s.holding_time(i) + prior.rate[i];
        for j in 0..n {
            if i == j {
                continue;
            }
            let shape = s.count(i, j) + prior.shape[(i, j)];
            let gamma = Gamma::new(shape, 1.0 / rate)
                .map_err(|e| Error::InvalidArgument(format!("gamma({shape}, {rate}): {e}")))?;
            rates[(i, j)] = gamma.sample(rng);
        }
        rates[(i, i)] = -rates.row(i).sum();
    }
    Ok(rates)
}

/// Which estimator produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Mcem,
    Gibbs,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mcem => "mcem",
            Algorithm::Gibbs => "gibbs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub algorithm: Algorithm,
    pub method: Method,
    pub seed: u64,
    pub seconds: f64,
}

/// Successive rate-matrix iterates of an estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationTrace {
    pub iterates: Vec<DMatrix<f64>>,
    pub burn_in: usize,
    pub meta: TraceMeta,
}

impl EstimationTrace {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn last(&self) -> Option<&DMatrix<f64>> {
        self.iterates.last()
    }

    /// CSV with header `iter,i,j,value`; iterations and states 1-indexed,
    /// off-diagonal entries only.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,i,j,value\n");
        for (k, m) in self.iterates.iter().enumerate() {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if i != j {
                        let _ = writeln!(out, "{},{},{},{}", k + 1, i + 1, j + 1, m[(i, j)]);
                    }
                }
            }
        }
        out
    }
}

/// Mean and nearest-rank 2.5% / 97.5% quantiles of one rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSummary {
    pub i: usize,
    pub j: usize,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

impl ParameterSummary {
    pub fn contains(&self, value: f64) -> bool {
        self.q025 <= value && value <= self.q975
    }
}

/// Nearest-rank quantile of sorted data: the `ceil(p m)`-th smallest value.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    let rank = ((p * m as f64).ceil() as usize).clamp(1, m);
    sorted[rank - 1]
}

/// Summaries over the last `tail` iterates, ordered column-major
/// (`l_21, l_31, ..., l_12, ...`).
pub fn summarize_trace(tr: &EstimationTrace, tail: usize) -> Result<Vec<ParameterSummary>> {
    let available = tr.len().saturating_sub(tr.burn_in);
    if tail == 0 || tail > available {
        return Err(Error::InvalidArgument(format!(
            "tail {tail} outside 1..={available} post-burn-in iterates"
        )));
    }
    let window = &tr.iterates[tr.len() - tail..];
    let n = window[0].nrows();
    let mut out = Vec::with_capacity(n * (n - 1));
    for j in 0..n {
        for i in 0..n {
            if i == j {
                continue;
            }
            let mut values: Vec<f64> = window.iter().map(|m| m[(i, j)]).collect();
            // Shifted by the first value so a constant trace averages exactly.
            let base = values[0];
            let mean = base + values.iter().map(|v| v - base).sum::<f64>() / tail as f64;
            values.sort_by(f64::total_cmp);
            out.push(ParameterSummary {
                i,
                j,
                mean,
                q025: nearest_rank(&values, 0.025),
                q975: nearest_rank(&values, 0.975),
            });
        }
    }
    Ok(out)
}

/// `sum_k log p_{x_{k-1} x_k}(t_k - t_{k-1})`.
pub fn observed_log_likelihood(g: &Generator, obs: &ObservationSeries) -> Result<f64> {
    check_states(g, obs)?;
    let mut cache: Option<(f64, crate::generator::TransitionMatrix)> = None;
    let mut total = 0.0;
    for k in 0..obs.n_gaps() {
        let (dt, x, y) = obs.gap(k);
        let p = match &cache {
            Some((t, p)) if (*t - dt).abs() <= SPACING_TOL => p.get(x, y),
            _ => {
                let p = transition_matrix(g, dt)?;
                let v = p.get(x, y);
                cache = Some((dt, p));
                v
            }
        };
        total += p.ln();
    }
    Ok(total)
}

fn check_states(g: &Generator, obs: &ObservationSeries) -> Result<()> {
    if obs.max_state() >= g.n_states() {
        return Err(Error::BadDimension(format!(
            "observations use state {} but the generator has {}",
            obs.max_state() + 1,
            g.n_states()
        )));
    }
    Ok(())
}

/// Settings shared by both estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub method: Method,
    pub tir_mode: TirMode,
    pub max_attempts: u64,
    pub exec: Execution,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            method: Method::TimeReverse,
            tir_mode: TirMode::default(),
            max_attempts: crate::bridge::DEFAULT_MAX_ATTEMPTS,
            exec: Execution::default(),
        }
    }
}

/// Bridge statistics for every gap under `g`: `draws` bridges per gap,
/// averaged, then summed across gaps. Gap `k` of iteration `iter` uses the
/// stream keyed `(iter, k)`.
fn e_step(
    g: &Generator,
    obs: &ObservationSeries,
    draws: usize,
    cfg: &SamplingConfig,
    seeds: &SeedTree,
    iter: usize,
) -> Result<SufficientStats> {
    let n = g.n_states();
    let per_gap = try_map_indexed(cfg.exec, obs.n_gaps(), |k| {
        let (dt, x, y) = obs.gap(k);
        let p = transition_matrix(g, dt)?.get(x, y);
        if !(p > 0.0) {
            return Err(Error::UnreachableEndpoint {
                from: x + 1,
                to: y + 1,
                time: dt,
                gap: Some(k + 1),
            });
        }
        let prob = BridgeProblem::new(x, y, dt, cfg.method)
            .with_tir_mode(cfg.tir_mode)
            .with_max_attempts(cfg.max_attempts);
        let mut rng = seeds.stream(&[iter as u64, k as u64]);
        let mut stats = SufficientStats::zeros(n);
        for _ in 0..draws {
            let sample = sample_bridge(g, &prob, &mut rng)?;
            stats.add_path(&sample.path)?;
        }
        if draws > 1 {
            stats.scale(1.0 / draws as f64);
        }
        Ok(stats)
    })?;
    let mut total = SufficientStats::zeros(n);
    for s in &per_gap {
        total.merge(s)?;
    }
    Ok(total)
}

fn floor_rates(mut rates: DMatrix<f64>) -> DMatrix<f64> {
    let n = rates.nrows();
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            if i != j {
                rates[(i, j)] = rates[(i, j)].max(MIN_RATE);
                row += rates[(i, j)];
            }
        }
        rates[(i, i)] = -row;
    }
    rates
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McemConfig {
    pub iters: usize,
    pub bridges_per_gap: usize,
    pub sampling: SamplingConfig,
}

/// Monte Carlo EM: the E-step averages `bridges_per_gap` bridges per gap
/// under the current iterate, the M-step sets `l_ij = N_ij / R_i`. Rates
/// are floored at [`MIN_RATE`].
pub fn mcem_estimate(
    lambda0: &Generator,
    obs: &ObservationSeries,
    cfg: &McemConfig,
    seeds: &SeedTree,
) -> Result<EstimationTrace> {
    check_states(lambda0, obs)?;
    let n = lambda0.n_states();
    if (0..n).any(|i| (0..n).any(|j| i != j && !(lambda0.rate(i, j) > 0.0))) {
        return Err(Error::InvalidArgument(
            "initial rates must all be positive".into(),
        ));
    }
    if cfg.iters == 0 || cfg.bridges_per_gap == 0 {
        return Err(Error::InvalidArgument(
            "iterations and bridges per gap must be positive".into(),
        ));
    }
    let start = Instant::now();
    let mut current = lambda0.clone();
    let mut iterates = Vec::with_capacity(cfg.iters);
    for iter in 0..cfg.iters {
        let stats = e_step(
            &current,
            obs,
            cfg.bridges_per_gap,
            &cfg.sampling,
            seeds,
            iter,
        )?;
        let rates = floor_rates(mle_from_stats(&stats)?);
        current = Generator::new(rates.clone())?;
        iterates.push(rates);
    }
    Ok(EstimationTrace {
        iterates,
        burn_in: 0,
        meta: TraceMeta {
            algorithm: Algorithm::Mcem,
            method: cfg.sampling.method,
            seed: seeds.master(),
            seconds: start.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsConfig {
    pub iters: usize,
    pub burn_in: usize,
    pub sampling: SamplingConfig,
}

/// Gibbs sampler: alternately draws one latent path (a bridge per gap)
/// given the current rates and new rates from the Gamma posterior.
pub fn gibbs_estimate(
    g0: &Generator,
    obs: &ObservationSeries,
    prior: &GammaPrior,
    cfg: &GibbsConfig,
    seeds: &SeedTree,
) -> Result<EstimationTrace> {
    check_states(g0, obs)?;
    if cfg.iters <= cfg.burn_in {
        return Err(Error::InvalidArgument(format!(
            "iterations ({}) must exceed burn-in ({})",
            cfg.iters, cfg.burn_in
        )));
    }
    if prior.n_states() != g0.n_states() {
        return Err(Error::BadDimension(format!(
            "prior on {} states, generator on {}",
            prior.n_states(),
            g0.n_states()
        )));
    }
    let start = Instant::now();
    let posterior_seeds = seeds.child(u64::MAX);
    let mut current = g0.clone();
    let mut iterates = Vec::with_capacity(cfg.iters);
    for iter in 0..cfg.iters {
        let stats = e_step(&current, obs, 1, &cfg.sampling, seeds, iter)?;
        let mut rng = posterior_seeds.stream(&[iter as u64]);
        let rates = floor_rates(sample_posterior_generator(&stats, prior, &mut rng)?);
        current = Generator::new(rates.clone())?;
        iterates.push(rates);
    }
    Ok(EstimationTrace {
        iterates,
        burn_in: cfg.burn_in,
        meta: TraceMeta {
            algorithm: Algorithm::Gibbs,
            method: cfg.sampling.method,
            seed: seeds.master(),
            seconds: start.elapsed().as_secs_f64(),
        },
    })
}
