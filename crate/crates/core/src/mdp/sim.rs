use super::{Policy, TabularMdp};
use crate::rng::{rng_from_seed, sample_dense, sample_sparse, Rng};
use crate::{Error, Result};

/// One simulated transition `(s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
}

/// Simulates from `s0 ∼ ρ` until a terminal state is entered or `max_steps`
/// transitions have been taken.
pub fn rollout(mdp: &TabularMdp, pi: &Policy, max_steps: usize, rng: &mut Rng) -> Vec<Transition> {
    let mut steps = Vec::new();
    let mut s = sample_dense(rng, mdp.initial());
    while steps.len() < max_steps && !mdp.is_terminal(s) {
        let a = pi.sample(s, rng);
        let r = mdp.reward(s, a).sample(rng);
        let s_next = sample_sparse(rng, mdp.next(s, a));
        steps.push(Transition { s, a, r, s_next });
        s = s_next;
    }
    steps
}

/// Seeded episode; identical seeds give identical trajectories.
pub fn sample_episode(
    mdp: &TabularMdp,
    pi: &Policy,
    max_steps: usize,
    rng_seed: u64,
) -> Result<Vec<Transition>> {
    if max_steps == 0 {
        return Err(Error::Config("max_steps must be at least 1".into()));
    }
    let mut rng = rng_from_seed(rng_seed);
    Ok(rollout(mdp, pi, max_steps, &mut rng))
}
