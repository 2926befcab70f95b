use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{clamp_open, open01, BridgeProblem, BridgeSample, Method};
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::path::Path;

/// Tail mass below which the Poisson mixture is considered complete.
const TAIL_STOP: f64 = 1e-12;
/// Largest tail mass tolerated at the truncation cap.
const TAIL_TOLERANCE: f64 = 1e-10;

/// The uniformized chain `I + Lambda / mu`.
pub fn uniformization_matrix(g: &Generator) -> DMatrix<f64> {
    let n = g.n_states();
    let mu = g.mu();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 - g.exit_rate(i) / mu
        } else {
            g.rate(i, j) / mu
        }
    })
}

/// Default cap on the virtual-inclusive jump count.
fn default_cap(mu_t: f64) -> usize {
    (mu_t + 20.0 * mu_t.sqrt() + 50.0).ceil() as usize
}

/// Terms of the Poisson mixture for a bridge `a -> b` over `horizon`.
struct Mixture {
    gamma: DMatrix<f64>,
    /// `columns[m] = Gamma^m e_b`.
    columns: Vec<DVector<f64>>,
    /// Unnormalized `Pois(m; mu T) (Gamma^m)_ab`.
    weights: Vec<f64>,
}

impl Mixture {
    fn build(g: &Generator, a: usize, b: usize, horizon: f64, cap: Option<usize>) -> Result<Self> {
        let n = g.n_states();
        let gamma = uniformization_matrix(g);
        let mu_t = g.mu() * horizon;
        let cap = cap.unwrap_or_else(|| default_cap(mu_t));

        let mut column = DVector::zeros(n);
        column[b] = 1.0;
        let mut columns = vec![column];
        let mut weights = Vec::new();
        let mut log_pmf = -mu_t;
        let mut cumulative = 0.0;
        for m in 0..=cap {
            if m > 0 {
                log_pmf += mu_t.ln() - (m as f64).ln();
                let next = &gamma * &columns[m - 1];
                columns.push(next);
            }
            let pmf = log_pmf.exp();
            cumulative += pmf;
            weights.push(pmf * columns[m][a]);
            if 1.0 - cumulative < TAIL_STOP {
                return Ok(Self {
                    gamma,
                    columns,
                    weights,
                });
            }
        }
        let mass = 1.0 - cumulative;
        if mass > TAIL_TOLERANCE {
            return Err(Error::SeriesTruncation { cap, mass });
        }
        Ok(Self {
            gamma,
            columns,
            weights,
        })
    }

    fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Law of the virtual-inclusive jump count `m` of a uniformized bridge
/// `a -> b` over `horizon`, indexed by `m` and normalized to sum to one.
pub fn jump_count_law(g: &Generator, a: usize, b: usize, horizon: f64) -> Result<Vec<f64>> {
    BridgeProblem::new(a, b, horizon, Method::Uniformization).check(g)?;
    let mix = Mixture::build(g, a, b, horizon, None)?;
    let total = mix.total();
    if !(total > 0.0) {
        return Err(unreachable(a, b, horizon));
    }
    Ok(mix.weights.iter().map(|w| w / total).collect())
}

fn unreachable(a: usize, b: usize, horizon: f64) -> Error {
    Error::UnreachableEndpoint {
        from: a + 1,
        to: b + 1,
        time: horizon,
        gap: None,
    }
}

/// Uniformization sampler. Returns the bridge and the virtual-inclusive
/// jump count that produced it.
pub fn sample_uniformization_detailed<R: Rng + ?Sized>(
    g: &Generator,
    prob: &BridgeProblem,
    rng: &mut R,
) -> Result<(BridgeSample, usize)> {
    prob.check(g)?;
    let (a, b, horizon) = (prob.a, prob.b, prob.horizon);
    let mix = Mixture::build(g, a, b, horizon, prob.options.uniformization_cap)?;
    let total = mix.total();
    if !(total > 0.0) {
        return Err(unreachable(a, b, horizon));
    }

    let target = open01(rng) * total;
    let mut acc = 0.0;
    let mut m = mix.weights.len() - 1;
    for (k, &w) in mix.weights.iter().enumerate() {
        acc += w;
        if target < acc {
            m = k;
            break;
        }
    }
    // Floating-point residue can land on a zero-weight tail term.
    while mix.weights[m] <= 0.0 && m > 0 {
        m -= 1;
    }

    let mut times: Vec<f64> = (0..m).map(|_| open01(rng) * horizon).collect();
    times.sort_by(f64::total_cmp);

    let n = g.n_states();
    let mut jumps = Vec::new();
    let mut state = a;
    let mut weights = vec![0.0; n];
    for (step, &t) in times.iter().enumerate() {
        let ahead = &mix.columns[m - step - 1];
        for (j, w) in weights.iter_mut().enumerate() {
            *w = mix.gamma[(state, j)] * ahead[j];
        }
        let norm: f64 = weights.iter().sum();
        let u = open01(rng) * norm;
        let mut acc = 0.0;
        let mut next = state;
        for (j, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                next = j;
                if u < acc {
                    break;
                }
            }
        }
        if next != state {
            let lower = jumps.last().map_or(0.0, |&(s, _)| s);
            jumps.push((clamp_open(t, lower, horizon), next));
            state = next;
        }
    }
    let sample = BridgeSample {
        path: Path::from_parts(a, jumps, horizon),
        attempts: 1,
        method: Method::Uniformization,
    };
    Ok((sample, m))
}

pub fn sample_uniformization<R: Rng + ?Sized>(
    g: &Generator,
    prob: &BridgeProblem,
    rng: &mut R,
) -> Result<BridgeSample> {
    sample_uniformization_detailed(g, prob, rng).map(|(s, _)| s)
}
