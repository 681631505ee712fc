//! The absorbing-action auxiliary MDP, the support projection of policies,
//! and numeric checks of the identities and inequalities that link
//! ζ-constrained backups to policies in the auxiliary MDP.
//!
//! Every check uses exact-expectation operators, so sampling noise never
//! enters.

mod checks;
mod suite;

pub use checks::{
    check_escape_bound, check_fixed_point, check_occupancy_bookkeeping,
    check_operator_projection_equiv, check_projection_value, membership, FixedPointReport,
    InequalityReport, MembershipReport,
};
pub use suite::{run_suite, write_suite_csv, CaseReport, SuiteConfig, SuiteSummary};

use crate::data::SupportFilter;
use crate::mdp::{MdpBuilder, Policy, QTable, RewardDist, TabularMdp};
use crate::{Error, Result};

/// `M′`: the base MDP plus an absorbing action `a_abs = A` available in
/// every state, leading with reward 0 to the absorbing state `s_abs = S`.
#[derive(Debug, Clone)]
pub struct AugmentedMdp {
    pub base: TabularMdp,
    pub mdp: TabularMdp,
    pub s_abs: usize,
    pub a_abs: usize,
}

pub fn augment(base: &TabularMdp) -> Result<AugmentedMdp> {
    let (ns, na) = (base.num_states(), base.num_actions());
    let (s_abs, a_abs) = (ns, na);
    let mut b = MdpBuilder::new(ns + 1, na + 1, base.gamma());
    for s in 0..ns {
        for a in 0..na {
            b.transition(s, a, base.next(s, a).to_vec());
            b.reward(s, a, *base.reward(s, a));
        }
        b.goto(s, a_abs, s_abs);
        b.reward(s, a_abs, RewardDist::Point(0.0));
    }
    b.terminal(s_abs);
    let mut init = base.initial().to_vec();
    init.push(0.0);
    b.initial(init);
    b.r_max(base.r_max());
    Ok(AugmentedMdp { base: base.clone(), mdp: b.build()?, s_abs, a_abs })
}

impl AugmentedMdp {
    /// Extends `ζ` with `ζ(·, a_abs) = 0` and `ζ(s_abs, ·) = 0`.
    pub fn extend_filter(&self, filter: &SupportFilter) -> Result<SupportFilter> {
        let (ns, na) = (self.base.num_states(), self.base.num_actions());
        check_filter(filter, ns, na)?;
        let mut ind = vec![false; (ns + 1) * (na + 1)];
        for s in 0..ns {
            for a in 0..na {
                ind[s * (na + 1) + a] = filter.supported(s, a);
            }
        }
        Ok(SupportFilter::from_indicator(ind, ns + 1, na + 1))
    }

    /// A base policy viewed in `M′`: no mass on `a_abs`; the absorbing state
    /// takes `a_abs`.
    pub fn lift_policy(&self, pi: &Policy) -> Result<Policy> {
        let (ns, na) = (self.base.num_states(), self.base.num_actions());
        if pi.num_states() != ns || pi.num_actions() != na {
            return Err(Error::InvalidPolicy("policy shape does not match the base MDP".into()));
        }
        let mut probs = Vec::with_capacity((ns + 1) * (na + 1));
        for s in 0..ns {
            probs.extend(pi.row(s));
            probs.push(0.0);
        }
        probs.extend(std::iter::repeat_n(0.0, na));
        probs.push(1.0);
        Ok(Policy::Stochastic { probs, num_actions: na + 1 })
    }

    /// Restriction of an `M′` table to `S × A`.
    pub fn restrict(&self, f: &QTable) -> QTable {
        let (ns, na) = (self.base.num_states(), self.base.num_actions());
        let values = (0..ns).flat_map(|s| f.row(s)[..na].to_vec()).collect();
        QTable::from_vec(ns, na, values)
    }
}

fn check_filter(filter: &SupportFilter, ns: usize, na: usize) -> Result<()> {
    if filter.num_states() != ns || filter.num_actions() != na {
        return Err(Error::Config(format!(
            "filter shape {}x{} does not match {ns}x{na}",
            filter.num_states(),
            filter.num_actions()
        )));
    }
    Ok(())
}

/// Projection `Ξ` onto the strong ζ-constrained set:
/// `(Ξπ)(a|s) = ζ(s,a) π(a|s)` and the unsupported mass moves to the last
/// action, which must be the absorbing one. `filter` is over `M′`.
pub fn project_policy(pi: &Policy, filter: &SupportFilter) -> Result<Policy> {
    let (ns, na) = (pi.num_states(), pi.num_actions());
    check_filter(filter, ns, na)?;
    let a_abs = na - 1;
    let mut probs = vec![0.0; ns * na];
    for s in 0..ns {
        let row = &mut probs[s * na..(s + 1) * na];
        let mut escaped = 0.0;
        for a in 0..na {
            let p = pi.prob(s, a);
            if filter.supported(s, a) {
                row[a] = p;
            } else {
                escaped += p;
            }
        }
        row[a_abs] += escaped;
    }
    Ok(Policy::Stochastic { probs, num_actions: na })
}

/// Exact-model ζ-constrained evaluation operator
/// `r + γ E_{s'} Σ_{a'} π(a'|s') ζ(s',a') f(s',a')`.
pub fn constrained_eval_exact(mdp: &TabularMdp, pi: &Policy, filter: &SupportFilter, f: &QTable) -> QTable {
    let (ns, na, g) = (mdp.num_states(), mdp.num_actions(), mdp.gamma());
    let v: Vec<f64> = (0..ns).map(|s| pi.expect(s, |a| filter.zeta(s, a) * f.get(s, a))).collect();
    let mut out = QTable::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let ev: f64 = mdp.next(s, a).iter().map(|&(t, p)| p * v[t]).sum();
            out.set(s, a, mdp.reward_mean(s, a) + g * ev);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RandomInstance;
    use crate::mdp::exact_policy_evaluation;

    #[test]
    fn augmentation_adds_one_state_and_action() {
        let x = RandomInstance::generate(1, 5, 3).unwrap();
        let aug = augment(&x.mdp).unwrap();
        assert_eq!(aug.mdp.num_states(), x.mdp.num_states() + 1);
        assert_eq!(aug.mdp.num_actions(), x.mdp.num_actions() + 1);
        for s in 0..aug.mdp.num_states() {
            assert_eq!(aug.mdp.next(s, aug.a_abs), &[(aug.s_abs, 1.0)]);
            assert_eq!(aug.mdp.reward_mean(s, aug.a_abs), 0.0);
        }
    }

    #[test]
    fn absorbing_action_has_zero_value() {
        let x = RandomInstance::generate(2, 6, 3).unwrap();
        let aug = augment(&x.mdp).unwrap();
        let pi = aug.lift_policy(&x.policy).unwrap();
        let q = exact_policy_evaluation(&aug.mdp, &pi, 1e-12).unwrap();
        for s in 0..aug.mdp.num_states() {
            assert_eq!(q.get(s, aug.a_abs), 0.0);
        }
    }

    #[test]
    fn projection_extremes() {
        let x = RandomInstance::generate(3, 4, 2).unwrap();
        let aug = augment(&x.mdp).unwrap();
        let pi = aug.lift_policy(&x.policy).unwrap();
        let (ns, na) = (x.mdp.num_states(), x.mdp.num_actions());
        let all = aug.extend_filter(&SupportFilter::all(ns, na)).unwrap();
        let proj = project_policy(&pi, &all).unwrap();
        for s in 0..ns {
            assert_eq!(proj.row(s), pi.row(s));
            assert_eq!(proj.prob(s, aug.a_abs), 0.0);
        }
        let none = aug.extend_filter(&SupportFilter::none(ns, na)).unwrap();
        let proj = project_policy(&pi, &none).unwrap();
        for s in 0..=ns {
            assert!((proj.prob(s, aug.a_abs) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_mixed_row() {
        let pi = Policy::stochastic(vec![vec![0.2, 0.3, 0.5, 0.0]], 4).unwrap();
        let z = SupportFilter::from_indicator(vec![true, false, true, false], 1, 4);
        let proj = project_policy(&pi, &z).unwrap();
        assert_eq!(proj.row(0), vec![0.2, 0.0, 0.5, 0.3]);
    }
}
