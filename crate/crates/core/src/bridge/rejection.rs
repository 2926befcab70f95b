use rand::Rng;

use super::{BridgeProblem, BridgeSample, Method};
use crate::error::Result;
use crate::generator::Generator;
use crate::path::simulate_with;

/// Forward-simulates from `a` until a path ends in `b`.
pub fn sample_rejection<R: Rng + ?Sized>(
    g: &Generator,
    prob: &BridgeProblem,
    rng: &mut R,
) -> Result<BridgeSample> {
    prob.check(g)?;
    for attempt in 1..=prob.max_attempts {
        let path = simulate_with(g.jump_table(), prob.a, prob.horizon, rng);
        if path.end_state() == prob.b {
            return Ok(BridgeSample {
                path,
                attempts: attempt,
                method: Method::Rejection,
            });
        }
    }
    Err(prob.exhausted(g))
}
