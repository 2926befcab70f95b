use rand::Rng;

use super::{BridgeProblem, BridgeSample, Method, TirMode};
use crate::error::Result;
use crate::generator::Generator;
use crate::path::{reverse_path, simulate_with, Path};

/// Joins `forward` on `[0, tau]` with `backward` on `(tau, T]`, where `tau`
/// is the first time the two paths occupy the same state. Both paths must
/// share a horizon. Returns `None` if they never meet.
pub fn splice_at_meeting(forward: &Path, backward: &Path) -> Option<Path> {
    let horizon = forward.horizon();
    let (fj, bj) = (forward.jumps(), backward.jumps());
    let (mut x, mut y) = (forward.initial_state(), backward.initial_state());
    let (mut p, mut q) = (0, 0);
    let mut tau = 0.0;
    loop {
        if x == y {
            break;
        }
        let next_f = fj.get(p).map_or(f64::INFINITY, |&(t, _)| t);
        let next_b = bj.get(q).map_or(f64::INFINITY, |&(t, _)| t);
        tau = next_f.min(next_b);
        if !(tau < horizon) {
            return None;
        }
        if next_f == tau {
            x = fj[p].1;
            p += 1;
        }
        if next_b == tau {
            y = bj[q].1;
            q += 1;
        }
    }
    let mut jumps: Vec<(f64, usize)> = fj[..p].to_vec();
    jumps.extend(bj.iter().copied().filter(|&(t, _)| t > tau));
    Some(Path::from_parts(forward.initial_state(), jumps, horizon))
}

/// Time-reverse sampler. Each attempt simulates a forward path from `a`
/// and a backward path from `b` and splices them at their first meeting.
pub fn sample_time_reverse<R: Rng + ?Sized>(
    g: &Generator,
    prob: &BridgeProblem,
    mode: TirMode,
    rng: &mut R,
) -> Result<BridgeSample> {
    prob.check(g)?;
    let backward_table = match mode {
        TirMode::PaperFaithful => g.jump_table(),
        TirMode::ReversedGenerator => g.reversed_jump_table(),
    };
    let done = |path: Path, attempts: u64| BridgeSample {
        path,
        attempts,
        method: Method::TimeReverse,
    };
    for attempt in 1..=prob.max_attempts {
        let forward = simulate_with(g.jump_table(), prob.a, prob.horizon, rng);
        if forward.end_state() == prob.b {
            return Ok(done(forward, attempt));
        }
        let backward = reverse_path(&simulate_with(backward_table, prob.b, prob.horizon, rng));
        if backward.initial_state() == prob.a {
            return Ok(done(backward, attempt));
        }
        if let Some(path) = splice_at_meeting(&forward, &backward) {
            return Ok(done(path, attempt));
        }
    }
    Err(prob.exhausted(g))
}
