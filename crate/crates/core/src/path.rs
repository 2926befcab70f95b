//! Realized trajectories of a Markov jump process.

use rand::Rng;

use crate::error::{Error, Result};
use crate::generator::{Generator, JumpTable};

/// A right-continuous step function on `[0, horizon]`.
///
/// `jumps` holds `(time, new_state)` pairs with strictly increasing times in
/// the open interval `(0, horizon)`; consecutive states always differ.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    initial_state: usize,
    jumps: Vec<(f64, usize)>,
    horizon: f64,
}

impl Path {
    /// Checked constructor.
    pub fn new(initial_state: usize, jumps: Vec<(f64, usize)>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidPath(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let mut prev_time = 0.0;
        let mut prev_state = initial_state;
        for &(t, s) in &jumps {
            if !(t > prev_time) || !(t < horizon) {
                return Err(Error::InvalidPath(format!(
                    "jump time {t} not strictly inside ({prev_time}, {horizon})"
                )));
            }
            if s == prev_state {
                return Err(Error::InvalidPath(format!(
                    "self-jump to state {} at {t}",
                    s + 1
                )));
            }
            prev_time = t;
            prev_state = s;
        }
        Ok(Self {
            initial_state,
            jumps,
            horizon,
        })
    }

    pub(crate) fn from_parts(initial_state: usize, jumps: Vec<(f64, usize)>, horizon: f64) -> Self {
        debug_assert!(Self::new(initial_state, jumps.clone(), horizon).is_ok());
        Self {
            initial_state,
            jumps,
            horizon,
        }
    }

    pub fn constant(state: usize, horizon: f64) -> Self {
        Self::from_parts(state, Vec::new(), horizon)
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn jumps(&self) -> &[(f64, usize)] {
        &self.jumps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_jumps(&self) -> usize {
        self.jumps.len()
    }

    pub fn end_state(&self) -> usize {
        self.jumps.last().map_or(self.initial_state, |&(_, s)| s)
    }

    /// State at time `t`; at a jump instant the post-jump state is returned.
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jumps.partition_point(|&(jt, _)| jt <= t);
        if k == 0 {
            self.initial_state
        } else {
            self.jumps[k - 1].1
        }
    }

    /// Iterates over `(start, end, state)` holding segments.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        let starts = std::iter::once((0.0, self.initial_state)).chain(self.jumps.iter().copied());
        let ends = self
            .jumps
            .iter()
            .map(|&(t, _)| t)
            .chain(std::iter::once(self.horizon));
        starts.zip(ends).map(|((s, state), e)| (s, e, state))
    }

    /// Appends `next`, shifted to start at this path's horizon. The two
    /// paths must agree at the junction.
    pub fn concat(&mut self, next: &Path) -> Result<()> {
        if next.initial_state != self.end_state() {
            return Err(Error::InvalidPath(format!(
                "cannot join path ending in {} to one starting in {}",
                self.end_state() + 1,
                next.initial_state + 1
            )));
        }
        let offset = self.horizon;
        self.jumps
            .extend(next.jumps.iter().map(|&(t, s)| (offset + t, s)));
        self.horizon += next.horizon;
        Ok(())
    }

    /// Splits the path at an interior time into two paths on `[0, cut]`
    /// and `[0, horizon - cut]`.
    pub fn split_at(&self, cut: f64) -> Result<(Path, Path)> {
        if !(cut > 0.0 && cut < self.horizon) {
            return Err(Error::InvalidArgument(format!(
                "cut {cut} outside (0, {})",
                self.horizon
            )));
        }
        let k = self.jumps.partition_point(|&(t, _)| t < cut);
        let left = Path::from_parts(self.initial_state, self.jumps[..k].to_vec(), cut);
        let mid_state = self.state_at(cut);
        let right_jumps = self.jumps[k..]
            .iter()
            .filter(|&&(t, _)| t > cut)
            .map(|&(t, s)| (t - cut, s))
            .collect();
        Ok((
            left,
            Path::from_parts(mid_state, right_jumps, self.horizon - cut),
        ))
    }
}

/// The time reversal `t -> horizon - t` of a path.
pub fn reverse_path(p: &Path) -> Path {
    let mut states = Vec::with_capacity(p.jumps.len() + 1);
    states.push(p.initial_state);
    states.extend(p.jumps.iter().map(|&(_, s)| s));
    let mut jumps: Vec<(f64, usize)> = p
        .jumps
        .iter()
        .enumerate()
        .rev()
        .map(|(k, &(t, _))| (p.horizon - t, states[k]))
        .collect();
    // T - t can round onto T or onto a neighbour; keep times strictly inside.
    let mut upper = p.horizon;
    for jump in jumps.iter_mut().rev() {
        if jump.0 >= upper {
            jump.0 = upper.next_down();
        }
        upper = jump.0;
    }
    Path {
        initial_state: p.end_state(),
        jumps,
        horizon: p.horizon,
    }
}

/// Exponential variate with the given rate, via inverse CDF.
pub(crate) fn exp_variate<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    // random::<f64>() is in [0, 1); 1 - u is in (0, 1].
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Forward simulation driven by a jump table, truncated at `horizon`.
pub(crate) fn simulate_with<R: Rng + ?Sized>(
    table: &JumpTable,
    start: usize,
    horizon: f64,
    rng: &mut R,
) -> Path {
    let mut jumps = Vec::new();
    let mut state = start;
    let mut t = exp_variate(rng, table.exit_rate(state));
    while t < horizon {
        state = table.next_state(state, rng.random());
        jumps.push((t, state));
        t += exp_variate(rng, table.exit_rate(state));
    }
    Path {
        initial_state: start,
        jumps,
        horizon,
    }
}

/// Simulates the unconditioned process from `start` over `[0, horizon]`.
pub fn simulate_forward<R: Rng + ?Sized>(
    g: &Generator,
    start: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<Path> {
    if start >= g.n_states() {
        return Err(Error::InvalidArgument(format!(
            "state {} out of range",
            start + 1
        )));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    Ok(simulate_with(g.jump_table(), start, horizon, rng))
}
