use rand::Rng;

use super::{clamp_open, open01, truncated_first_jump_time, BridgeProblem, BridgeSample, Method};
use crate::error::Result;
use crate::generator::Generator;
use crate::path::{simulate_with, Path};

/// Modified rejection sampling.
///
/// While the current state differs from `b` a jump is still required, so
/// the next jump is drawn conditioned on happening before the horizon. Once
/// the path sits in `b` the remainder is forward-simulated and accepted if
/// it ends in `b`. Only the first forced jump is free: every later one is
/// first thinned by the probability that the unconditioned process would
/// have jumped at all, which keeps the accepted paths exactly
/// bridge-distributed. Any rejection restarts from `a`.
pub fn sample_modified_rejection<R: Rng + ?Sized>(
    g: &Generator,
    prob: &BridgeProblem,
    rng: &mut R,
) -> Result<BridgeSample> {
    prob.check(g)?;
    let table = g.jump_table();
    let horizon = prob.horizon;
    'attempts: for attempt in 1..=prob.max_attempts {
        let mut jumps: Vec<(f64, usize)> = Vec::new();
        let mut state = prob.a;
        let mut now = 0.0;
        let mut forced = false;
        loop {
            let remaining = horizon - now;
            if state == prob.b {
                let tail = simulate_with(table, state, remaining, rng);
                if tail.end_state() != prob.b {
                    continue 'attempts;
                }
                jumps.extend(
                    tail.jumps()
                        .iter()
                        .map(|&(t, s)| (clamp_open(now + t, now, horizon), s)),
                );
                let path = Path::from_parts(prob.a, jumps, horizon);
                return Ok(BridgeSample {
                    path,
                    attempts: attempt,
                    method: Method::ModifiedRejection,
                });
            }
            let rate = table.exit_rate(state);
            if forced && open01(rng) < (-rate * remaining).exp() {
                // The unconditioned process would have stayed in a state != b.
                continue 'attempts;
            }
            forced = true;
            let tau = truncated_first_jump_time(rate, remaining, open01(rng));
            now = clamp_open(now + tau, now, horizon);
            state = table.next_state(state, rng.random());
            jumps.push((now, state));
        }
    }
    Err(prob.exhausted(g))
}
