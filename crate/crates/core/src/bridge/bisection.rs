use rand::Rng;

use super::{
    clamp_open, one_jump_integral, open01, single_jump_time, BridgeProblem, BridgeSample, Method,
};
use crate::error::{Error, Result};
use crate::generator::{transition_matrix, Generator, TransitionMatrix};
use crate::path::Path;

/// Jump-count class of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    None,
    One,
    Many,
}

const CLASSES: [Class; 3] = [Class::None, Class::One, Class::Many];

struct Bisector<'a> {
    g: &'a Generator,
    horizon: f64,
    max_depth: usize,
    /// `levels[d] = P(horizon / 2^d)`.
    levels: Vec<TransitionMatrix>,
    jumps: Vec<(f64, usize)>,
}

impl<'a> Bisector<'a> {
    fn length(&self, depth: usize) -> f64 {
        self.horizon / 2f64.powi(depth as i32)
    }

    fn level(&mut self, depth: usize) -> Result<&TransitionMatrix> {
        if depth > self.max_depth {
            return Err(Error::RecursionDepthExceeded(self.max_depth));
        }
        while self.levels.len() <= depth {
            let t = self.length(self.levels.len());
            self.levels.push(transition_matrix(self.g, t)?);
        }
        Ok(&self.levels[depth])
    }

    /// Probability mass of `i -> j` over a depth-`depth` segment split by class.
    fn masses(&mut self, i: usize, j: usize, depth: usize) -> Result<[f64; 3]> {
        let t = self.length(depth);
        let p = self.level(depth)?.get(i, j);
        let (ri, rj) = (self.g.exit_rate(i), self.g.exit_rate(j));
        let m0 = if i == j { (-ri * t).exp() } else { 0.0 };
        let m1 = if i == j {
            0.0
        } else {
            self.g.rate(i, j) * one_jump_integral(ri, rj, t)
        };
        Ok([m0, m1, (p - m0 - m1).max(0.0)])
    }

    fn run<R: Rng + ?Sized>(&mut self, i: usize, j: usize, rng: &mut R) -> Result<()> {
        let m = self.masses(i, j, 0)?;
        let class = match pick(&m, open01(rng)) {
            Some(k) => CLASSES[k],
            None => {
                return Err(Error::UnreachableEndpoint {
                    from: i + 1,
                    to: j + 1,
                    time: self.horizon,
                    gap: None,
                })
            }
        };
        self.segment(i, j, class, 0.0, 0, rng)
    }

    fn segment<R: Rng + ?Sized>(
        &mut self,
        i: usize,
        j: usize,
        class: Class,
        start: f64,
        depth: usize,
        rng: &mut R,
    ) -> Result<()> {
        let t = self.length(depth);
        match class {
            Class::None => Ok(()),
            Class::One => {
                let tau =
                    single_jump_time(self.g.exit_rate(i), self.g.exit_rate(j), t, open01(rng));
                let lower = self.jumps.last().map_or(start, |&(s, _)| s.max(start));
                let upper = (start + t).min(self.horizon);
                self.jumps.push((clamp_open(start + tau, lower, upper), j));
                Ok(())
            }
            Class::Many => {
                let n = self.g.n_states();
                let mut cells = Vec::with_capacity(n * 9);
                let mut weights = Vec::with_capacity(n * 9);
                for k in 0..n {
                    let left = self.masses(i, k, depth + 1)?;
                    let right = self.masses(k, j, depth + 1)?;
                    for (cl, &wl) in left.iter().enumerate() {
                        for (cr, &wr) in right.iter().enumerate() {
                            // At least two jumps in total.
                            if cl + cr >= 2 {
                                cells.push((k, CLASSES[cl], CLASSES[cr]));
                                weights.push(wl * wr);
                            }
                        }
                    }
                }
                let pos = pick(&weights, open01(rng)).ok_or_else(|| {
                    Error::RootFindFailure(format!(
                        "no multi-jump mass for {} -> {} over {t}",
                        i + 1,
                        j + 1
                    ))
                })?;
                let (k, cl, cr) = cells[pos];
                self.segment(i, k, cl, start, depth + 1, rng)?;
                self.segment(k, j, cr, start + 0.5 * t, depth + 1, rng)
            }
        }
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
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = Some(k);
            if target < acc {
                return last;
            }
        }
    }
    last
}

/// Bisection sampler: the segment `(i, j, t)` carries zero jumps, exactly
/// one jump, or at least two; in the last case the midpoint state and the
/// classes of both halves are drawn jointly and each half is refined.
pub fn sample_bisection<R: Rng + ?Sized>(
    g: &Generator,
    prob: &BridgeProblem,
    rng: &mut R,
) -> Result<BridgeSample> {
    prob.check(g)?;
    let mut b = Bisector {
        g,
        horizon: prob.horizon,
        max_depth: prob.options.max_depth,
        levels: Vec::new(),
        jumps: Vec::new(),
    };
    b.run(prob.a, prob.b, rng)?;
    Ok(BridgeSample {
        path: Path::from_parts(prob.a, b.jumps, prob.horizon),
        attempts: 1,
        method: Method::Bisection,
    })
}
