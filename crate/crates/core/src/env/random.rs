use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::data::SupportFilter;
use crate::mdp::{MdpBuilder, Policy, RewardDist, TabularMdp};
use crate::rng::{rng_from_seed, Rng};
use crate::Result;

/// Discounts drawn by [`RandomInstance`].
pub const RANDOM_GAMMAS: [f64; 3] = [0.5, 0.9, 0.99];

fn dirichlet_ones(rng: &mut Rng, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Dense MDP with Dirichlet(1) transition rows and initial distribution and
/// point rewards drawn uniformly from `[0, 1]` (`r_max = 1`).
pub fn random_mdp(rng: &mut Rng, num_states: usize, num_actions: usize, gamma: f64) -> Result<TabularMdp> {
    let mut b = MdpBuilder::new(num_states, num_actions, gamma);
    for s in 0..num_states {
        for a in 0..num_actions {
            let row = dirichlet_ones(rng, num_states).into_iter().enumerate().collect();
            b.transition(s, a, row);
            b.reward(s, a, RewardDist::Point(rng.random::<f64>()));
        }
    }
    b.initial(dirichlet_ones(rng, num_states));
    b.r_max(1.0);
    b.build()
}

/// Stochastic policy with Dirichlet(1) rows.
pub fn random_policy(rng: &mut Rng, num_states: usize, num_actions: usize) -> Policy {
    let probs = (0..num_states).flat_map(|_| dirichlet_ones(rng, num_actions)).collect();
    Policy::Stochastic { probs, num_actions }
}

/// Independent Bernoulli(`keep`) support mask.
pub fn random_filter(rng: &mut Rng, num_states: usize, num_actions: usize, keep: f64) -> SupportFilter {
    let ind = (0..num_states * num_actions).map(|_| rng.random::<f64>() < keep).collect();
    SupportFilter::from_indicator(ind, num_states, num_actions)
}

/// A seeded `(MDP, policy, ζ)` triple for property checks.
///
/// Sizes are drawn from `2..=max_states` states and `2..=max_actions`
/// actions, `γ` from [`RANDOM_GAMMAS`], and the mask keep-rate uniformly
/// from `[0, 1]`.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub seed: u64,
    pub mdp: TabularMdp,
    pub policy: Policy,
    pub filter: SupportFilter,
}

impl RandomInstance {
    pub fn generate(seed: u64, max_states: usize, max_actions: usize) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let s = rng.random_range(2..=max_states.max(2));
        let a = rng.random_range(2..=max_actions.max(2));
        let gamma = RANDOM_GAMMAS[rng.random_range(0..RANDOM_GAMMAS.len())];
        let mdp = random_mdp(&mut rng, s, a, gamma)?;
        let policy = random_policy(&mut rng, s, a);
        let keep = rng.random::<f64>();
        let filter = random_filter(&mut rng, s, a, keep);
        Ok(Self { seed, mdp, policy, filter })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_valid_and_reproducible() {
        for seed in 0..50 {
            let x = RandomInstance::generate(seed, 8, 3).unwrap();
            let y = RandomInstance::generate(seed, 8, 3).unwrap();
            assert_eq!(x.mdp, y.mdp);
            assert_eq!(x.filter, y.filter);
            assert!(x.mdp.num_states() <= 8 && x.mdp.num_actions() <= 3);
            assert!(RANDOM_GAMMAS.contains(&x.mdp.gamma()));
        }
    }

    #[test]
    fn dirichlet_rows_are_distributions() {
        let mut rng = rng_from_seed(3);
        for k in 1..6 {
            let row = dirichlet_ones(&mut rng, k);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| p > 0.0));
        }
    }
}
