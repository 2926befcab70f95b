use num_complex::Complex64;
use rand::Rng;

use super::{clamp_open, open01, BridgeProblem, BridgeSample, Method};
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::path::Path;
use crate::spectral::Spectral;

/// Root-finding tolerance on the holding time.
const TIME_TOL: f64 = 1e-10;

/// Direct sampling from the spectral representation.
///
/// In state `i` with `r` time left, the next jump time `s` has density
/// proportional to `exp(-l_i s) sum_{j != i} l_ij p_jb(r - s)`, plus an atom
/// `exp(-l_i r)` for staying put when `i = b`. Jump times are drawn by
/// inverting the CDF with bisection; the target state is drawn with weights
/// `l_ij p_jb(r - s)`.
pub fn sample_direct<R: Rng + ?Sized>(
    g: &Generator,
    prob: &BridgeProblem,
    rng: &mut R,
) -> Result<BridgeSample> {
    prob.check(g)?;
    let spectral = Spectral::new(g, prob.options.condition_cap)?;
    let n = g.n_states();
    let b = prob.b;
    let horizon = prob.horizon;
    let mut jumps = Vec::new();
    let mut state = prob.a;
    let mut now = 0.0;
    let mut weights = vec![0.0; n];

    loop {
        let remaining = horizon - now;
        let rate = g.exit_rate(state);
        let p_end = spectral.transition(state, b, remaining);
        if !(p_end > 0.0) {
            return Err(Error::UnreachableEndpoint {
                from: state + 1,
                to: b + 1,
                time: remaining,
                gap: None,
            });
        }
        if state == b {
            let stay = (-rate * remaining).exp() / p_end;
            if open01(rng) < stay {
                break;
            }
        }

        let cdf = HoldingCdf::new(g, &spectral, state, b, remaining);
        let total = cdf.eval(remaining);
        if !(total > 0.0) {
            return Err(Error::RootFindFailure(format!(
                "no jump mass out of state {} over {remaining}",
                state + 1
            )));
        }
        let target = open01(rng) * total;
        let (mut lo, mut hi) = (0.0, remaining);
        while hi - lo > TIME_TOL {
            let mid = 0.5 * (lo + hi);
            if cdf.eval(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);

        for (j, w) in weights.iter_mut().enumerate() {
            *w = if j == state {
                0.0
            } else {
                g.rate(state, j) * spectral.transition(j, b, remaining - tau)
            };
        }
        let next = pick(&weights, open01(rng)).ok_or_else(|| {
            Error::RootFindFailure(format!("no reachable successor of state {}", state + 1))
        })?;
        now = clamp_open(now + tau, now, horizon);
        state = next;
        jumps.push((now, state));
    }
    Ok(BridgeSample {
        path: Path::from_parts(prob.a, jumps, horizon),
        attempts: 1,
        method: Method::Direct,
    })
}

/// Unnormalized CDF `F(s) = int_0^s exp(-l_i u) sum_j l_ij p_jb(r - u) du`
/// expanded over eigenvalues `d_k`:
/// `sum_k c_k (exp(d_k r) - exp(d_k (r - s) - l_i s)) / (l_i + d_k)`.
struct HoldingCdf {
    rate: f64,
    remaining: f64,
    terms: Vec<(Complex64, Complex64)>,
}

impl HoldingCdf {
    fn new(g: &Generator, spectral: &Spectral, i: usize, b: usize, remaining: f64) -> Self {
        let u = spectral.vectors();
        let u_inv = spectral.inverse();
        let terms = spectral
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let c: Complex64 = (0..g.n_states())
                    .filter(|&j| j != i)
                    .map(|j| u[(j, k)] * g.rate(i, j))
                    .sum::<Complex64>()
                    * u_inv[(k, b)];
                (c, d)
            })
            .collect();
        Self {
            rate: g.exit_rate(i),
            remaining,
            terms,
        }
    }

    fn eval(&self, s: f64) -> f64 {
        let r = self.remaining;
        self.terms
            .iter()
            .map(|&(c, d)| {
                let shift = d + self.rate;
                let value = if (shift * s).norm() < 1e-4 {
                    // exp(d r) (1 - exp(-shift s)) / shift, expanded.
                    let x = shift * s;
                    (d * r).exp() * s * (1.0 - x / 2.0 + x * x / 6.0)
                } else {
                    ((d * r).exp() - (d * (r - s) - self.rate * s).exp()) / shift
                };
                (c * value).re
            })
            .sum()
    }
}

fn pick(weights: &[f64], u: f64) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = None;
    for (j, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = Some(j);
            if target < acc {
                return Some(j);
            }
        }
    }
    last
}
