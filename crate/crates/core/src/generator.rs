//! Infinitesimal generators and the quantities derived from them.

use std::fmt;
use std::path::Path as FsPath;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expm::expm;

/// Row sums of a valid generator must vanish to this absolute tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Cumulative jump probabilities of the embedded chain, used to pick the
/// next state of a forward simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTable {
    n: usize,
    exit_rates: Vec<f64>,
    cumulative: Vec<f64>,
}

impl JumpTable {
    fn from_rates(rates: &DMatrix<f64>, exit_rates: &[f64]) -> Self {
        let n = rates.nrows();
        let mut cumulative = vec![0.0; n * n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                if i != j {
                    acc += rates[(i, j)] / exit_rates[i];
                }
                cumulative[i * n + j] = acc;
            }
        }
        Self {
            n,
            exit_rates: exit_rates.to_vec(),
            cumulative,
        }
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit_rates[i]
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    /// Next state after leaving `i`, given `u` uniform on `[0, 1)`.
    pub fn next_state(&self, i: usize, u: f64) -> usize {
        let row = &self.cumulative[i * self.n..(i + 1) * self.n];
        let target = u * row[self.n - 1];
        let mut fallback = i;
        let mut prev = 0.0;
        for (j, &c) in row.iter().enumerate() {
            if j != i && c > prev {
                if target < c {
                    return j;
                }
                fallback = j;
            }
            prev = c;
        }
        fallback
    }
}

/// A validated, ergodic infinitesimal generator.
///
/// Construction checks every invariant and precomputes the exit rates,
/// the uniformization rate `mu`, the stationary distribution and the jump
/// tables of both the generator and its time reversal.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    rates: DMatrix<f64>,
    exit_rates: Vec<f64>,
    mu: f64,
    stationary: Vec<f64>,
    forward: JumpTable,
    reversed: JumpTable,
}

/// Validates a raw rate matrix.
pub fn validate_generator(raw: DMatrix<f64>) -> Result<Generator> {
    Generator::new(raw)
}

impl Generator {
    pub fn new(rates: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = rates.shape();
        if rows != cols || rows < 2 {
            return Err(Error::BadShape { rows, cols });
        }
        let n = rows;
        for i in 0..n {
            for j in 0..n {
                let v = rates[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { i: i + 1, j: j + 1 });
                }
                if i != j && v < 0.0 {
                    return Err(Error::NegativeOffDiagonal {
                        i: i + 1,
                        j: j + 1,
                        value: v,
                    });
                }
            }
        }
        for i in 0..n {
            let sum: f64 = rates.row(i).iter().sum();
            if sum.abs() > ROW_SUM_TOL {
                return Err(Error::RowSumNonzero { row: i + 1, sum });
            }
        }
        let exit_rates: Vec<f64> = (0..n).map(|i| -rates[(i, i)]).collect();
        if let Some(state) = exit_rates.iter().position(|&r| r <= 0.0) {
            return Err(Error::AbsorbingState { state: state + 1 });
        }
        check_irreducible(&rates)?;
        let stationary = solve_stationary(&rates)?;
        let mu = exit_rates.iter().copied().fold(0.0, f64::max);
        let forward = JumpTable::from_rates(&rates, &exit_rates);
        let reversed_rates = reverse_rates(&rates, &stationary);
        let reversed = JumpTable::from_rates(&reversed_rates, &exit_rates);
        Ok(Self {
            rates,
            exit_rates,
            mu,
            stationary,
            forward,
            reversed,
        })
    }

    /// Builds a generator from row-major rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::BadShape {
                rows: n,
                cols: rows.first().map_or(0, |r| r.len()),
            });
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(DMatrix::from_row_slice(n, n, &flat))
    }

    /// Builds a generator from its off-diagonal entries; the diagonal of
    /// `off` is ignored and replaced by negative row sums.
    pub fn from_off_diagonal(off: &DMatrix<f64>) -> Result<Self> {
        let mut rates = off.clone();
        for i in 0..rates.nrows() {
            rates[(i, i)] = 0.0;
            let s: f64 = rates.row(i).iter().sum();
            rates[(i, i)] = -s;
        }
        Self::new(rates)
    }

    /// Parses the plain-text format: a line with `n`, then `n` rows of `n`
    /// numbers. `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        let n: usize = tokens
            .next()
            .ok_or_else(|| Error::Parse("empty generator file".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad state count: {e}")))?;
        let values = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad rate {t:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != n * n {
            return Err(Error::Parse(format!(
                "expected {} rates for n = {n}, found {}",
                n * n,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, &values))
    }

    pub fn from_file(path: impl AsRef<FsPath>) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    /// Renders the plain-text file format.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n_states());
        for i in 0..self.n_states() {
            let row: Vec<String> = self.rates.row(i).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn n_states(&self) -> usize {
        self.rates.nrows()
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[(i, j)]
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit_rates[i]
    }

    pub fn exit_rates(&self) -> &[f64] {
        &self.exit_rates
    }

    /// Uniformization rate, the largest exit rate.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn jump_table(&self) -> &JumpTable {
        &self.forward
    }

    /// Jump table of the time-reversed generator.
    pub fn reversed_jump_table(&self) -> &JumpTable {
        &self.reversed
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Whether detailed balance `pi_i l_ij = pi_j l_ji` holds to `tol`.
    pub fn is_reversible(&self, tol: f64) -> bool {
        let n = self.n_states();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let lhs = self.stationary[i] * self.rates[(i, j)];
                let rhs = self.stationary[j] * self.rates[(j, i)];
                (lhs - rhs).abs() <= tol * (1.0 + lhs.abs())
            })
        })
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn check_irreducible(rates: &DMatrix<f64>) -> Result<()> {
    let n = rates.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let r = if forward {
                    rates[(i, j)]
                } else {
                    rates[(j, i)]
                };
                if j != i && r > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    if let Some(to) = reach(true).iter().position(|s| !s) {
        return Err(Error::Reducible {
            from: 1,
            to: to + 1,
        });
    }
    if let Some(from) = reach(false).iter().position(|s| !s) {
        return Err(Error::Reducible {
            from: from + 1,
            to: 1,
        });
    }
    Ok(())
}

fn solve_stationary(rates: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = rates.nrows();
    // pi Lambda = 0 with the last balance equation replaced by sum(pi) = 1.
    let mut a = rates.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSolve("stationary system is singular"))?;
    if pi.iter().any(|p| !p.is_finite() || *p <= 0.0) {
        return Err(Error::SingularSolve("stationary solution is not positive"));
    }
    let total: f64 = pi.iter().sum();
    Ok(pi.iter().map(|p| p / total).collect())
}

fn reverse_rates(rates: &DMatrix<f64>, pi: &[f64]) -> DMatrix<f64> {
    let n = rates.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            rates[(i, i)]
        } else {
            pi[j] * rates[(j, i)] / pi[i]
        }
    })
}

/// Stationary distribution of an ergodic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
}

pub fn stationary_distribution(g: &Generator) -> StationaryDistribution {
    StationaryDistribution {
        pi: g.stationary.clone(),
    }
}

/// The time-reversed generator `l~_ij = pi_j l_ji / pi_i`.
///
/// Exit rates and the stationary distribution are carried over unchanged.
pub fn reversed_generator(g: &Generator) -> Generator {
    let mut rates = reverse_rates(&g.rates, &g.stationary);
    // Re-close the rows so reversal stays an exact involution on the diagonal.
    for i in 0..rates.nrows() {
        rates[(i, i)] = g.rates[(i, i)];
    }
    let forward = g.reversed.clone();
    let reversed = g.forward.clone();
    Generator {
        rates,
        exit_rates: g.exit_rates.clone(),
        mu: g.mu,
        stationary: g.stationary.clone(),
        forward,
        reversed,
    }
}

/// `P(t) = exp(t Lambda)` with entries clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub t: f64,
    pub probs: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[(i, j)]
    }
}

/// Largest `t * mu` accepted by [`transition_matrix`].
pub const MAX_TIME_RATE: f64 = 1e6;

pub fn transition_matrix(g: &Generator, t: f64) -> Result<TransitionMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    if t * g.mu > MAX_TIME_RATE {
        return Err(Error::Overflow(t * g.mu));
    }
    let mut probs = expm(&(&g.rates * t))?;
    probs.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
    Ok(TransitionMatrix { t, probs })
}

/// Matrix norm used for the distance to stationarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StationarityNorm {
    /// Largest absolute entry.
    #[default]
    MaxAbs,
    /// Induced 1-norm (largest absolute column sum).
    One,
}

impl StationarityNorm {
    fn distance(self, pi: &[f64], p: &DMatrix<f64>) -> f64 {
        let n = pi.len();
        match self {
            StationarityNorm::MaxAbs => (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| (p[(i, j)] - pi[j]).abs())
                .fold(0.0, f64::max),
            StationarityNorm::One => (0..n)
                .map(|j| (0..n).map(|i| (p[(i, j)] - pi[j]).abs()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }
}

/// Settings for [`stationary_time`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryTimeOptions {
    pub eps: f64,
    pub norm: StationarityNorm,
    pub cap: f64,
}

impl Default for StationaryTimeOptions {
    fn default() -> Self {
        Self {
            eps: 0.005,
            norm: StationarityNorm::MaxAbs,
            cap: 1e4,
        }
    }
}

/// Distance between `P(t)` and the matrix whose rows are all `pi`.
pub fn distance_to_stationarity(g: &Generator, t: f64, norm: StationarityNorm) -> Result<f64> {
    let p = transition_matrix(g, t)?;
    Ok(norm.distance(&g.stationary, &p.probs))
}

/// First time at which `P(t)` is within `eps` of stationarity, rounded to
/// two decimals.
///
/// The search doubles `t` from 0.01 until the distance drops below `eps`,
/// then bisects the last bracket to 1e-9 before rounding.
pub fn stationary_time(g: &Generator, opts: StationaryTimeOptions) -> Result<f64> {
    if !(opts.eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let below =
        |t: f64| -> Result<bool> { Ok(distance_to_stationarity(g, t, opts.norm)? < opts.eps) };
    if below(0.0)? {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 0.01;
    while !below(hi)? {
        lo = hi;
        hi *= 2.0;
        if lo > opts.cap {
            return Err(Error::NotConverged { cap: opts.cap });
        }
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if hi > opts.cap {
        return Err(Error::NotConverged { cap: opts.cap });
    }
    Ok((hi * 100.0).round() / 100.0)
}
