#![allow(dead_code)]

use mbridge::{transition_matrix, Generator, Path};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn model2() -> Generator {
    Generator::from_rows(&[&[-2.0, 1.0, 1.0], &[0.0, -10.0, 10.0], &[4.0, 1.0, -5.0]]).unwrap()
}

pub fn uniform(n: usize) -> Generator {
    let off = 1.0 / (n as f64 - 1.0);
    Generator::new(nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -1.0
        } else {
            off
        }
    }))
    .unwrap()
}

/// Exact law of the state at time `s` of an `a -> b` bridge over `t`.
pub fn interior_law(g: &Generator, a: usize, b: usize, t: f64, s: f64) -> Vec<f64> {
    let left = transition_matrix(g, s).unwrap();
    let right = transition_matrix(g, t - s).unwrap();
    let total = transition_matrix(g, t).unwrap().get(a, b);
    (0..g.n_states())
        .map(|k| left.get(a, k) * right.get(k, b) / total)
        .collect()
}

/// Pearson statistic and its p-value; cells with expected count below 5
/// are pooled into one.
pub fn chi_square(observed: &[usize], probs: &[f64]) -> (f64, f64) {
    let total: usize = observed.iter().sum();
    let mut cells = Vec::new();
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * total as f64;
        if e < 5.0 {
            pool_o += o as f64;
            pool_e += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pool_e > 0.0 {
        cells.push((pool_o, pool_e));
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (cells.len() - 1).max(1) as f64;
    (stat, 1.0 - ChiSquared::new(df).unwrap().cdf(stat))
}

/// Two-sample chi-square homogeneity test on count vectors.
pub fn two_sample_chi_square(x: &[usize], y: &[usize]) -> (f64, f64) {
    let (nx, ny) = (
        x.iter().sum::<usize>() as f64,
        y.iter().sum::<usize>() as f64,
    );
    let mut stat = 0.0;
    let mut cells = 0;
    for (&a, &b) in x.iter().zip(y) {
        let pooled = (a + b) as f64;
        if pooled == 0.0 {
            continue;
        }
        cells += 1;
        let (ea, eb) = (pooled * nx / (nx + ny), pooled * ny / (nx + ny));
        stat += (a as f64 - ea).powi(2) / ea + (b as f64 - eb).powi(2) / eb;
    }
    let df = (cells - 1).max(1) as f64;
    (stat, 1.0 - ChiSquared::new(df).unwrap().cdf(stat))
}

/// Histogram of the state at time `s` over a set of paths.
pub fn histogram(paths: &[Path], n: usize, s: f64) -> Vec<usize> {
    let mut h = vec![0; n];
    for p in paths {
        h[p.state_at(s)] += 1;
    }
    h
}

/// Mean and standard error of a sample.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}
