//! Endpoint-conditioned path samplers ("Markov bridges").
//!
//! Six methods share one interface: given a generator and a
//! [`BridgeProblem`] `(a, b, T)` each returns a [`Path`] distributed as the
//! process started in `a` and conditioned to be in `b` at time `T`.

mod bisection;
mod direct;
mod modified;
mod rejection;
mod time_reverse;
mod uniformization;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::generator::{transition_matrix, Generator};
use crate::path::Path;

pub use bisection::sample_bisection;
pub use direct::sample_direct;
pub use modified::sample_modified_rejection;
pub use rejection::sample_rejection;
pub use time_reverse::{sample_time_reverse, splice_at_meeting};
pub use uniformization::{
    jump_count_law, sample_uniformization, sample_uniformization_detailed, uniformization_matrix,
};

/// Default attempt budget for the rejection-type methods.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Rejection,
    ModifiedRejection,
    Direct,
    Uniformization,
    Bisection,
    TimeReverse,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Rejection,
        Method::ModifiedRejection,
        Method::Direct,
        Method::Uniformization,
        Method::Bisection,
        Method::TimeReverse,
    ];

    /// Canonical short name: `rej`, `mor`, `dir`, `uni`, `bis` or `tir`.
    pub fn name(self) -> &'static str {
        match self {
            Method::Rejection => "rej",
            Method::ModifiedRejection => "mor",
            Method::Direct => "dir",
            Method::Uniformization => "uni",
            Method::Bisection => "bis",
            Method::TimeReverse => "tir",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownName(format!("method {s:?}")))
    }
}

/// Generator used for the backward path of the time-reverse sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TirMode {
    /// Simulate the backward path with the generator itself. Agrees with
    /// the reversed mode only for reversible generators.
    PaperFaithful,
    /// Simulate the backward path with the time-reversed generator.
    #[default]
    ReversedGenerator,
}

impl TirMode {
    pub fn name(self) -> &'static str {
        match self {
            TirMode::PaperFaithful => "paper",
            TirMode::ReversedGenerator => "reversed",
        }
    }
}

impl fmt::Display for TirMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TirMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(TirMode::PaperFaithful),
            "reversed" => Ok(TirMode::ReversedGenerator),
            _ => Err(Error::UnknownName(format!("tir mode {s:?}"))),
        }
    }
}

/// Numerical knobs of the individual samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerOptions {
    /// Largest eigenvector condition number accepted by the direct method.
    pub condition_cap: f64,
    /// Override for the uniformization jump-count cap; `None` uses
    /// `mu T + 20 sqrt(mu T) + 50`.
    pub uniformization_cap: Option<usize>,
    /// Deepest bisection level.
    pub max_depth: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            condition_cap: crate::spectral::DEFAULT_CONDITION_CAP,
            uniformization_cap: None,
            max_depth: 60,
        }
    }
}

/// Endpoints, horizon and sampler choice for one bridge. States are
/// 0-indexed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeProblem {
    pub a: usize,
    pub b: usize,
    pub horizon: f64,
    pub method: Method,
    pub tir_mode: TirMode,
    pub max_attempts: u64,
    pub options: SamplerOptions,
}

impl BridgeProblem {
    pub fn new(a: usize, b: usize, horizon: f64, method: Method) -> Self {
        Self {
            a,
            b,
            horizon,
            method,
            tir_mode: TirMode::default(),
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            options: SamplerOptions::default(),
        }
    }

    pub fn with_tir_mode(mut self, mode: TirMode) -> Self {
        self.tir_mode = mode;
        self
    }

    pub fn with_max_attempts(mut self, max_attempts: u64) -> Self {
        self.max_attempts = max_attempts;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub(crate) fn check(&self, g: &Generator) -> Result<()> {
        let n = g.n_states();
        if self.a >= n || self.b >= n {
            return Err(Error::InvalidArgument(format!(
                "endpoints ({}, {}) outside 1..={n}",
                self.a + 1,
                self.b + 1
            )));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidArgument(
                "max_attempts must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Error reported when the attempt budget runs out.
    pub(crate) fn exhausted(&self, g: &Generator) -> Error {
        let acceptance = transition_matrix(g, self.horizon)
            .map(|p| p.get(self.a, self.b))
            .unwrap_or(f64::NAN);
        Error::AttemptsExhausted {
            max_attempts: self.max_attempts,
            acceptance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeSample {
    pub path: Path,
    /// Proposal cycles consumed (always 1 for the direct, uniformization
    /// and bisection methods).
    pub attempts: u64,
    pub method: Method,
}

/// Samples a bridge with the method named in `prob`.
pub fn sample_bridge<R: Rng + ?Sized>(
    g: &Generator,
    prob: &BridgeProblem,
    rng: &mut R,
) -> Result<BridgeSample> {
    match prob.method {
        Method::Rejection => sample_rejection(g, prob, rng),
        Method::ModifiedRejection => sample_modified_rejection(g, prob, rng),
        Method::Direct => sample_direct(g, prob, rng),
        Method::Uniformization => sample_uniformization(g, prob, rng),
        Method::Bisection => sample_bisection(g, prob, rng),
        Method::TimeReverse => sample_time_reverse(g, prob, prob.tir_mode, rng),
    }
}

/// Inverse CDF of the first jump time out of a state with exit rate
/// `rate`, conditioned on a jump occurring before `horizon`.
pub fn truncated_first_jump_time(rate: f64, horizon: f64, u: f64) -> f64 {
    // -ln(1 - u (1 - e^{-rate T})) / rate
    -(u * (-rate * horizon).exp_m1()).ln_1p() / rate
}

/// Jump time of a path with exactly one jump `i -> j` on `(0, horizon)`:
/// density proportional to `exp(-(rate_i - rate_j) t)`.
pub fn single_jump_time(rate_i: f64, rate_j: f64, horizon: f64, u: f64) -> f64 {
    let diff = rate_i - rate_j;
    if diff.abs() < 1e-12 {
        u * horizon
    } else {
        truncated_first_jump_time(diff, horizon, u)
    }
}

/// `int_0^t exp(-rate_i s) exp(-rate_j (t - s)) ds`.
pub(crate) fn one_jump_integral(rate_i: f64, rate_j: f64, t: f64) -> f64 {
    let diff = rate_i - rate_j;
    let x = diff * t;
    let base = (-rate_j * t).exp();
    if diff.abs() < 1e-8 {
        base * t * (1.0 - x / 2.0 + x * x / 6.0)
    } else {
        base * (-(-x).exp_m1()) / diff
    }
}

/// Uniform variate on the open interval `(0, 1)`.
pub(crate) fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand::distr::Open01)
}

/// Keeps a jump time strictly inside `(lower, upper)`.
pub(crate) fn clamp_open(t: f64, lower: f64, upper: f64) -> f64 {
    if t >= upper {
        upper.next_down()
    } else if t <= lower {
        lower.next_up()
    } else {
        t
    }
}
