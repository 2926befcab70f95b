//! Sufficient statistics of paths and their endpoint-conditioned
//! expectations.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::generator::{transition_matrix, Generator};
use crate::path::Path;

/// Transition counts `N` and occupation times `R` over a horizon.
///
/// Counts are stored as reals so that ensemble averages fit the same type;
/// `integral` records whether every count is a whole number.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    counts: DMatrix<f64>,
    holding: DVector<f64>,
    horizon: f64,
    integral: bool,
}

impl SufficientStats {
    pub fn zeros(n: usize) -> Self {
        Self {
            counts: DMatrix::zeros(n, n),
            holding: DVector::zeros(n),
            horizon: 0.0,
            integral: true,
        }
    }

    /// Builds stats from explicit counts and holding times.
    pub fn from_parts(counts: DMatrix<f64>, holding: DVector<f64>, horizon: f64) -> Result<Self> {
        let n = holding.len();
        if counts.nrows() != n || counts.ncols() != n {
            return Err(Error::BadShape {
                rows: counts.nrows(),
                cols: counts.ncols(),
            });
        }
        if counts
            .iter()
            .chain(holding.iter())
            .any(|&v| !(v >= 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "counts and holding times must be finite and nonnegative".into(),
            ));
        }
        if (0..n).any(|i| counts[(i, i)] != 0.0) {
            return Err(Error::InvalidArgument(
                "diagonal counts must be zero".into(),
            ));
        }
        let integral = counts.iter().all(|v| v.fract() == 0.0);
        Ok(Self {
            counts,
            holding,
            horizon,
            integral,
        })
    }

    /// Exact counts and occupation times of one path on `n` states.
    pub fn accumulate(p: &Path, n: usize) -> Result<Self> {
        let mut s = Self::zeros(n);
        s.add_path(p)?;
        Ok(s)
    }

    /// Adds the statistics of `p` to these.
    pub fn add_path(&mut self, p: &Path) -> Result<()> {
        let n = self.n_states();
        let mut prev = p.initial_state();
        for (start, end, state) in p.segments() {
            if state >= n {
                return Err(Error::InvalidArgument(format!(
                    "path visits state {} of {n}",
                    state + 1
                )));
            }
            if state != prev {
                self.counts[(prev, state)] += 1.0;
            }
            self.holding[state] += end - start;
            prev = state;
        }
        self.horizon += p.horizon();
        Ok(())
    }

    /// Sums two sets of statistics, as for consecutive path pieces.
    pub fn merge(&mut self, other: &SufficientStats) -> Result<()> {
        if other.n_states() != self.n_states() {
            return Err(Error::BadDimension(format!(
                "cannot merge stats on {} and {} states",
                self.n_states(),
                other.n_states()
            )));
        }
        self.counts += &other.counts;
        self.holding += &other.holding;
        self.horizon += other.horizon;
        self.integral &= other.integral;
        Ok(())
    }

    /// Multiplies every count, holding time and the horizon by `factor`.
    pub fn scale(&mut self, factor: f64) {
        self.counts *= factor;
        self.holding *= factor;
        self.horizon *= factor;
        self.integral = self.counts.iter().all(|v| v.fract() == 0.0);
    }

    pub fn n_states(&self) -> usize {
        self.holding.len()
    }

    pub fn counts(&self) -> &DMatrix<f64> {
        &self.counts
    }

    pub fn count(&self, i: usize, j: usize) -> f64 {
        self.counts[(i, j)]
    }

    pub fn holding(&self) -> &DVector<f64> {
        &self.holding
    }

    pub fn holding_time(&self, i: usize) -> f64 {
        self.holding[i]
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn total_jumps(&self) -> f64 {
        self.counts.sum()
    }

    pub fn is_integral(&self) -> bool {
        self.integral
    }

    /// CSV rendering: a `# T=` line, `i,j,N` rows for the off-diagonal
    /// counts, then `i,R` rows. States are 1-indexed.
    pub fn to_csv(&self) -> String {
        let n = self.n_states();
        let mut out = format!("# T={}\ni,j,N\n", self.horizon);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let _ = writeln!(out, "{},{},{}", i + 1, j + 1, self.counts[(i, j)]);
                }
            }
        }
        out.push_str("i,R\n");
        for i in 0..n {
            let _ = writeln!(out, "{},{}", i + 1, self.holding[i]);
        }
        out
    }

    /// Parses the format written by [`SufficientStats::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut horizon = None;
        let mut pairs = Vec::new();
        let mut singles = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix("# T=") {
                horizon = Some(parse_f64(rest)?);
                continue;
            }
            if line.starts_with('#') || line == "i,j,N" || line == "i,R" {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            match fields.as_slice() {
                [i, j, v] => pairs.push((parse_state(i)?, parse_state(j)?, parse_f64(v)?)),
                [i, v] => singles.push((parse_state(i)?, parse_f64(v)?)),
                _ => return Err(Error::Parse(format!("bad stats row {line:?}"))),
            }
        }
        let horizon = horizon.ok_or_else(|| Error::Parse("missing '# T=' header".into()))?;
        let n = singles.iter().map(|&(i, _)| i + 1).max().unwrap_or(0);
        let mut counts = DMatrix::zeros(n, n);
        let mut holding = DVector::zeros(n);
        for (i, j, v) in pairs {
            if i >= n || j >= n {
                return Err(Error::Parse(format!(
                    "count row ({}, {}) outside {n} states",
                    i + 1,
                    j + 1
                )));
            }
            counts[(i, j)] = v;
        }
        for (i, v) in singles {
            holding[i] = v;
        }
        Self::from_parts(counts, holding, horizon)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

fn parse_state(s: &str) -> Result<usize> {
    match s.trim().parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k - 1),
        _ => Err(Error::Parse(format!("bad state {s:?}"))),
    }
}

/// Complete-data maximum-likelihood rates `N_ij / R_i` with the diagonal
/// set to minus the row sums.
pub fn mle_from_stats(s: &SufficientStats) -> Result<DMatrix<f64>> {
    let n = s.n_states();
    if let Some(i) = (0..n).find(|&i| !(s.holding[i] > 0.0)) {
        return Err(Error::ZeroOccupation(i + 1));
    }
    let mut rates = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            s.counts[(i, j)] / s.holding[i]
        }
    });
    for i in 0..n {
        rates[(i, i)] = -rates.row(i).sum();
    }
    Ok(rates)
}

/// `I^{ij}(t)` for every pair of endpoints at once: the upper-right block
/// of `exp([[L, E_ij], [0, L]] t)`, whose `(x, y)` entry is
/// `int_0^t p_xi(s) p_jy(t - s) ds`.
pub fn integral_block(g: &Generator, t: f64, i: usize, j: usize) -> Result<DMatrix<f64>> {
    let n = g.n_states();
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time must be nonnegative, got {t}"
        )));
    }
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "states ({}, {}) outside 1..={n}",
            i + 1,
            j + 1
        )));
    }
    if t == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    let scaled = g.rates() * t;
    big.view_mut((0, 0), (n, n)).copy_from(&scaled);
    big.view_mut((n, n), (n, n)).copy_from(&scaled);
    big[(i, n + j)] = t;
    let e = expm(&big)?;
    Ok(e.view((0, n), (n, n)).into_owned())
}

/// `I_xy^ij(t) = int_0^t p_xi(s) p_jy(t - s) ds`.
pub fn integral_i(g: &Generator, t: f64, x: usize, y: usize, i: usize, j: usize) -> Result<f64> {
    let n = g.n_states();
    if x >= n || y >= n {
        return Err(Error::InvalidArgument(format!(
            "states ({}, {}) outside 1..={n}",
            x + 1,
            y + 1
        )));
    }
    Ok(integral_block(g, t, i, j)?[(x, y)])
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance
/// `tol`, using at most `max_evals` integrand evaluations.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_evals: usize,
) -> Result<f64> {
    struct State<'f> {
        f: &'f mut dyn FnMut(f64) -> f64,
        evals: usize,
        max_evals: usize,
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        s: &mut State<'_>,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        if s.evals + 2 > s.max_evals {
            return Err(Error::NotConverged {
                cap: s.max_evals as f64,
            });
        }
        let (flm, frm) = ((s.f)(lm), (s.f)(rm));
        s.evals += 2;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(recurse(s, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + recurse(s, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }

    if a == b {
        return Ok(0.0);
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let mut state = State {
        f: &mut f,
        evals: 3,
        max_evals,
    };
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&mut state, a, b, fa, fm, fb, whole, tol, 50)
}

/// Quadrature route to `I_xy^ij(t)`: adaptive Simpson (tolerance 1e-10,
/// at most 2^20 evaluations) over matrix-exponential transition
/// probabilities.
pub fn integral_i_quadrature(
    g: &Generator,
    t: f64,
    x: usize,
    y: usize,
    i: usize,
    j: usize,
) -> Result<f64> {
    let mut err = None;
    let value = adaptive_simpson(
        |s| match (transition_matrix(g, s), transition_matrix(g, t - s)) {
            (Ok(a), Ok(b)) => a.get(x, i) * b.get(j, y),
            (Err(e), _) | (_, Err(e)) => {
                err.get_or_insert(e);
                0.0
            }
        },
        0.0,
        t,
        1e-10,
        1 << 20,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Expected transition counts and occupation times of a bridge.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedStats {
    pub counts: DMatrix<f64>,
    pub holding: DVector<f64>,
}

/// `E[N_ij | x, y] = l_ij I_xy^ij / p_xy(t)` and
/// `E[R_i | x, y] = I_xy^ii / p_xy(t)`.
pub fn expected_stats_conditional(
    g: &Generator,
    x: usize,
    y: usize,
    t: f64,
) -> Result<ExpectedStats> {
    let n = g.n_states();
    if x >= n || y >= n {
        return Err(Error::InvalidArgument(format!(
            "states ({}, {}) outside 1..={n}",
            x + 1,
            y + 1
        )));
    }
    let p = transition_matrix(g, t)?.get(x, y);
    if !(p > 1e-300) {
        return Err(Error::UnreachableEndpoint {
            from: x + 1,
            to: y + 1,
            time: t,
            gap: None,
        });
    }
    let mut counts = DMatrix::zeros(n, n);
    let mut holding = DVector::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && g.rate(i, j) == 0.0 {
                continue;
            }
            let value = integral_block(g, t, i, j)?[(x, y)] / p;
            if i == j {
                holding[i] = value;
            } else {
                counts[(i, j)] = g.rate(i, j) * value;
            }
        }
    }
    Ok(ExpectedStats { counts, holding })
}

/// Closed-form conditional expectations for the symmetric family with
/// diagonal `-1` and off-diagonal `1/(n-1)`, whose transition
/// probabilities are `1/n + (d_ij - 1/n) exp(-beta t)` with
/// `beta = n/(n-1)`.
pub fn expected_stats_uniform_closed_form(
    n: usize,
    t: f64,
    x: usize,
    y: usize,
) -> Result<ExpectedStats> {
    if n < 2 {
        return Err(Error::BadDimension(format!(
            "need at least 2 states, got {n}"
        )));
    }
    if x >= n || y >= n {
        return Err(Error::InvalidArgument(format!(
            "states ({}, {}) outside 1..={n}",
            x + 1,
            y + 1
        )));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time must be positive, got {t}"
        )));
    }
    let nf = n as f64;
    let beta = nf / (nf - 1.0);
    let decay = (-beta * t).exp();
    let ramp = -(-beta * t).exp_m1() / beta;
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let p = 1.0 / nf + (delta(x, y) - 1.0 / nf) * decay;
    let integral = |i: usize, j: usize| {
        let a = delta(x, i) - 1.0 / nf;
        let b = delta(j, y) - 1.0 / nf;
        t / (nf * nf) + (a + b) / nf * ramp + a * b * t * decay
    };
    let rate = 1.0 / (nf - 1.0);
    let counts = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            rate * integral(i, j) / p
        }
    });
    let holding = DVector::from_fn(n, |i, _| integral(i, i) / p);
    Ok(ExpectedStats { counts, holding })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model2() -> Generator {
        Generator::from_rows(&[&[-2.0, 1.0, 1.0], &[0.0, -10.0, 10.0], &[4.0, 1.0, -5.0]]).unwrap()
    }

    fn uniform(n: usize) -> Generator {
        let off = 1.0 / (n as f64 - 1.0);
        Generator::new(DMatrix::from_fn(
            n,
            n,
            |i, j| if i == j { -1.0 } else { off },
        ))
        .unwrap()
    }

    #[test]
    fn constant_path() {
        let s = SufficientStats::accumulate(&Path::constant(1, 2.0), 3).unwrap();
        assert_eq!(s.holding_time(1), 2.0);
        assert_eq!(s.holding_time(0), 0.0);
        assert_eq!(s.total_jumps(), 0.0);
        assert!(s.is_integral());
    }

    #[test]
    fn bookkeeping() {
        let p = Path::new(0, vec![(0.4, 1), (0.9, 0)], 1.5).unwrap();
        let s = SufficientStats::accumulate(&p, 2).unwrap();
        assert_eq!(s.count(0, 1), 1.0);
        assert_eq!(s.count(1, 0), 1.0);
        assert!((s.holding_time(0) - 1.0).abs() < 1e-15);
        assert!((s.holding_time(1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mle_arithmetic() {
        let mut counts = DMatrix::zeros(2, 2);
        counts[(0, 1)] = 3.0;
        let s =
            SufficientStats::from_parts(counts, DVector::from_vec(vec![1.5, 1.0]), 2.5).unwrap();
        let m = mle_from_stats(&s).unwrap();
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(m[(0, 0)], -2.0);
        assert_eq!(m[(1, 0)], 0.0);

        let zero = SufficientStats::from_parts(
            DMatrix::zeros(2, 2),
            DVector::from_vec(vec![0.0, 1.0]),
            1.0,
        )
        .unwrap();
        assert!(matches!(
            mle_from_stats(&zero),
            Err(Error::ZeroOccupation(1))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let p = Path::new(0, vec![(0.4, 2), (0.9, 1)], 1.5).unwrap();
        let s = SufficientStats::accumulate(&p, 3).unwrap();
        let text = s.to_csv();
        assert!(text.starts_with("# T=1.5\n"));
        assert_eq!(SufficientStats::from_csv(&text).unwrap(), s);
    }

    #[test]
    fn integral_vanishes_at_zero() {
        let g = model2();
        assert_eq!(integral_i(&g, 0.0, 0, 2, 1, 2).unwrap(), 0.0);
    }

    #[test]
    fn block_and_quadrature_agree() {
        let g = model2();
        for &(x, y, i, j) in &[(0, 2, 1, 2), (1, 1, 2, 0), (2, 0, 0, 0)] {
            let a = integral_i(&g, 0.9, x, y, i, j).unwrap();
            let b = integral_i_quadrature(&g, 0.9, x, y, i, j).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn closed_form_matches_block_route() {
        for n in [3, 5] {
            let g = uniform(n);
            for &t in &[0.5, 3.25] {
                for (x, y) in [(0, 0), (0, 1)] {
                    let a = expected_stats_conditional(&g, x, y, t).unwrap();
                    let b = expected_stats_uniform_closed_form(n, t, x, y).unwrap();
                    assert!((a.counts - b.counts).amax() < 1e-8);
                    assert!((a.holding.clone() - b.holding).amax() < 1e-8);
                    assert!((a.holding.sum() - t).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn unreachable_endpoint() {
        // Reaching state 3 from state 1 takes two jumps, so p_13 underflows.
        let g = Generator::from_rows(&[&[-1.0, 1.0, 0.0], &[0.0, -1.0, 1.0], &[1.0, 0.0, -1.0]])
            .unwrap();
        assert!(matches!(
            expected_stats_conditional(&g, 0, 2, 1e-200),
            Err(Error::UnreachableEndpoint { .. })
        ));
    }

    #[test]
    fn simpson_integrates_polynomials_exactly() {
        let v = adaptive_simpson(|x| x * x * x, 0.0, 2.0, 1e-12, 1000).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        assert!(adaptive_simpson(|x| (50.0 * x).sin().abs(), 0.0, 3.0, 1e-14, 10).is_err());
    }
}
