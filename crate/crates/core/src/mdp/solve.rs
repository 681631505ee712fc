use super::qtable::argmax;
use super::{Policy, QTable, TabularMdp};
use crate::{Error, Result};

/// Upper bound on fixed-point sweeps before giving up.
pub const MAX_SWEEPS: usize = 500_000;

fn check_shapes(mdp: &TabularMdp, pi: &Policy) -> Result<()> {
    if pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions() {
        return Err(Error::InvalidPolicy(format!(
            "policy shape {}x{} does not match MDP {}x{}",
            pi.num_states(),
            pi.num_actions(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    Ok(())
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// `r(s,a) + γ Σ_{s'} P(s'|s,a) next_value[s']` for every pair.
fn backup_with(mdp: &TabularMdp, next_value: &[f64], out: &mut QTable) {
    let g = mdp.gamma();
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            let ev: f64 = mdp.next(s, a).iter().map(|&(t, p)| p * next_value[t]).sum();
            out.set(s, a, mdp.reward_mean(s, a) + g * ev);
        }
    }
}

/// `V(s) = Σ_a π(a|s) f(s,a)`.
pub fn state_values(f: &QTable, pi: &Policy) -> Vec<f64> {
    (0..f.num_states()).map(|s| pi.expect(s, |a| f.get(s, a))).collect()
}

fn max_values(f: &QTable) -> Vec<f64> {
    (0..f.num_states())
        .map(|s| f.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Bellman evaluation operator `T^π f`.
pub fn bellman_eval(mdp: &TabularMdp, pi: &Policy, f: &QTable) -> QTable {
    let mut out = QTable::zeros(mdp.num_states(), mdp.num_actions());
    backup_with(mdp, &state_values(f, pi), &mut out);
    out
}

/// Bellman optimality operator `T f`.
pub fn bellman_opt(mdp: &TabularMdp, f: &QTable) -> QTable {
    let mut out = QTable::zeros(mdp.num_states(), mdp.num_actions());
    backup_with(mdp, &max_values(f), &mut out);
    out
}

fn fixed_point(
    mdp: &TabularMdp,
    tol: f64,
    next_value: impl Fn(&QTable) -> Vec<f64>,
) -> Result<QTable> {
    check_tol(tol)?;
    let mut q = QTable::zeros(mdp.num_states(), mdp.num_actions());
    let mut next = q.clone();
    for sweep in 1..=MAX_SWEEPS {
        backup_with(mdp, &next_value(&q), &mut next);
        if !next.is_finite() {
            return Err(Error::NumericFailure { iteration: sweep });
        }
        let residual = next.max_abs_diff(&q);
        std::mem::swap(&mut q, &mut next);
        // q = T q_prev and ‖q − T q‖ ≤ γ‖q − q_prev‖ ≤ residual
        if residual <= tol {
            return Ok(q);
        }
        if sweep == MAX_SWEEPS {
            return Err(Error::NonConvergence { iterations: sweep, residual });
        }
    }
    unreachable!()
}

/// `Q^π` by iterating `T^π` from the zero table until `‖Q − T^π Q‖_∞ ≤ tol`.
pub fn exact_policy_evaluation(mdp: &TabularMdp, pi: &Policy, tol: f64) -> Result<QTable> {
    check_shapes(mdp, pi)?;
    fixed_point(mdp, tol, |q| state_values(q, pi))
}

/// `Q*` by value iteration, plus the greedy policy (lowest action index on ties).
pub fn exact_value_iteration(mdp: &TabularMdp, tol: f64) -> Result<(QTable, Policy)> {
    let q = fixed_point(mdp, tol, max_values)?;
    let pi = greedy_policy(&q);
    Ok((q, pi))
}

/// Deterministic greedy policy, ties to the lowest action index.
pub fn greedy_policy(q: &QTable) -> Policy {
    let actions = (0..q.num_states()).map(|s| argmax(q.row(s))).collect();
    Policy::Deterministic { actions, num_actions: q.num_actions() }
}

/// `v^π = Σ_s ρ(s) Σ_a π(a|s) Q^π(s,a)`.
pub fn policy_value(mdp: &TabularMdp, pi: &Policy, tol: f64) -> Result<f64> {
    let q = exact_policy_evaluation(mdp, pi, tol)?;
    let v = state_values(&q, pi);
    Ok(mdp.initial().iter().zip(&v).map(|(p, v)| p * v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{MdpBuilder, RewardDist};

    fn self_loop(r: f64, gamma: f64) -> TabularMdp {
        MdpBuilder::new(1, 1, gamma)
            .goto(0, 0, 0)
            .reward(0, 0, RewardDist::Point(r))
            .initial_state(0)
            .build()
            .unwrap()
    }

    #[test]
    fn geometric_series() {
        let m = self_loop(1.0, 0.9);
        let pi = Policy::uniform(1, 1);
        let q = exact_policy_evaluation(&m, &pi, 1e-10).unwrap();
        assert!((q.get(0, 0) - 10.0).abs() < 1e-8);
    }

    #[test]
    fn one_state_two_actions_closed_form() {
        let m = MdpBuilder::new(1, 2, 0.5)
            .goto(0, 0, 0)
            .goto(0, 1, 0)
            .reward(0, 1, RewardDist::Point(1.0))
            .initial_state(0)
            .build()
            .unwrap();
        let (q, pi) = exact_value_iteration(&m, 1e-12).unwrap();
        assert!((q.get(0, 0) - 1.0).abs() < 1e-10);
        assert!((q.get(0, 1) - 2.0).abs() < 1e-10);
        assert_eq!(pi.action(0), Some(1));
    }

    #[test]
    fn bandit_uniform_value() {
        let m = MdpBuilder::new(1, 2, 0.0)
            .goto(0, 0, 0)
            .goto(0, 1, 0)
            .reward(0, 1, RewardDist::Point(1.0))
            .initial_state(0)
            .build()
            .unwrap();
        let v = policy_value(&m, &Policy::uniform(1, 2), 1e-12).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn chain_discounted_sum() {
        // 0 -> 1 -> 2 (terminal), rewards 1 then 2
        let m = MdpBuilder::new(3, 1, 0.9)
            .goto(0, 0, 1)
            .goto(1, 0, 2)
            .reward(0, 0, RewardDist::Point(1.0))
            .reward(1, 0, RewardDist::Point(2.0))
            .terminal(2)
            .initial_state(0)
            .build()
            .unwrap();
        let v = policy_value(&m, &Policy::uniform(3, 1), 1e-12).unwrap();
        assert!((v - (1.0 + 0.9 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_tolerance_and_bad_shapes() {
        let m = self_loop(1.0, 0.5);
        assert!(exact_policy_evaluation(&m, &Policy::uniform(1, 1), 0.0).is_err());
        assert!(exact_policy_evaluation(&m, &Policy::uniform(2, 1), 1e-6).is_err());
    }
}
