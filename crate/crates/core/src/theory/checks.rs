use super::{augment, constrained_eval_exact, project_policy, AugmentedMdp};
use crate::data::SupportFilter;
use crate::mdp::{exact_policy_evaluation, occupancy, policy_value, Policy, QTable, TabularMdp, MAX_SWEEPS};
use crate::{Error, Result};

/// Stopping threshold on successive differences for every internal solve.
/// Keeps the solver error far below the tolerances being checked.
const SOLVE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointReport {
    /// `‖f* − Q^{Ξπ}_{M′}‖_∞` over `S × A`.
    pub residual: f64,
    pub sweeps: usize,
    pub tol: f64,
    pub pass: bool,
}

/// `lhs ≤ rhs + tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub pass: bool,
}

impl InequalityReport {
    fn new(lhs: f64, rhs: f64, tol: f64) -> Self {
        Self { lhs, rhs, tol, pass: lhs <= rhs + tol }
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipReport {
    /// `E_{(s,a)∼η^π}[1(ζ(s,a) = 0)]`.
    pub escape_prob: f64,
    pub epsilon_zeta: f64,
    pub member: bool,
}

fn setup(mdp: &TabularMdp, pi: &Policy, filter: &SupportFilter) -> Result<(AugmentedMdp, Policy, Policy)> {
    let aug = augment(mdp)?;
    let lifted = aug.lift_policy(pi)?;
    let projected = project_policy(&lifted, &aug.extend_filter(filter)?)?;
    Ok((aug, lifted, projected))
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Iterates the exact ζ-constrained evaluation operator of the base MDP to
/// its fixed point and compares it with `Q^{Ξπ}` evaluated in `M′`.
pub fn check_fixed_point(
    mdp: &TabularMdp,
    pi: &Policy,
    filter: &SupportFilter,
    tol: f64,
) -> Result<FixedPointReport> {
    check_tol(tol)?;
    let (aug, _, projected) = setup(mdp, pi, filter)?;
    let mut f = QTable::zeros(mdp.num_states(), mdp.num_actions());
    let mut sweeps = 0;
    loop {
        let next = constrained_eval_exact(mdp, pi, filter, &f);
        sweeps += 1;
        if !next.is_finite() {
            return Err(Error::NumericFailure { iteration: sweeps });
        }
        let diff = next.max_abs_diff(&f);
        f = next;
        if diff <= SOLVE_TOL {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::NonConvergence { iterations: sweeps, residual: diff });
        }
    }
    let q = exact_policy_evaluation(&aug.mdp, &projected, SOLVE_TOL)?;
    let residual = f.max_abs_diff(&aug.restrict(&q));
    Ok(FixedPointReport { residual, sweeps, tol, pass: residual <= tol })
}

/// `v^{Ξπ}_{M′} ≤ v^π_{M′} + tol`, tightened to equality within `tol` when
/// `π` never leaves the support.
pub fn check_projection_value(
    mdp: &TabularMdp,
    pi: &Policy,
    filter: &SupportFilter,
    tol: f64,
) -> Result<InequalityReport> {
    check_tol(tol)?;
    let (aug, lifted, projected) = setup(mdp, pi, filter)?;
    let v_proj = policy_value(&aug.mdp, &projected, SOLVE_TOL)?;
    let v_orig = policy_value(&aug.mdp, &lifted, SOLVE_TOL)?;
    let mut report = InequalityReport::new(v_proj, v_orig, tol);
    if membership(mdp, pi, filter, 0.0)?.escape_prob == 0.0 {
        report.pass &= (v_proj - v_orig).abs() <= tol;
    }
    Ok(report)
}

/// `v^π_M ≤ v^{Ξπ}_{M′} + V_max · ε_ζ / (1 − γ)` with `ε_ζ` the exact escape
/// probability of `π`.
pub fn check_escape_bound(
    mdp: &TabularMdp,
    pi: &Policy,
    filter: &SupportFilter,
    tol: f64,
) -> Result<InequalityReport> {
    check_tol(tol)?;
    let (aug, _, projected) = setup(mdp, pi, filter)?;
    let v = policy_value(mdp, pi, SOLVE_TOL)?;
    let v_proj = policy_value(&aug.mdp, &projected, SOLVE_TOL)?;
    let eps = membership(mdp, pi, filter, 0.0)?.escape_prob;
    let rhs = v_proj + mdp.v_max() * eps / (1.0 - mdp.gamma());
    Ok(InequalityReport::new(v, rhs, tol))
}

/// `max |T̃^π f − T̃^{Ξπ} f|` over all of `S′ × A′` for each table in `fs`
/// (tables over `M′`), both operators taken in `M′` with the extended filter.
pub fn check_operator_projection_equiv(
    mdp: &TabularMdp,
    pi: &Policy,
    filter: &SupportFilter,
    fs: &[QTable],
) -> Result<f64> {
    let (aug, lifted, projected) = setup(mdp, pi, filter)?;
    let z = aug.extend_filter(filter)?;
    let mut worst: f64 = 0.0;
    for f in fs {
        if f.num_states() != aug.mdp.num_states() || f.num_actions() != aug.mdp.num_actions() {
            return Err(Error::Config("test tables must be shaped like the augmented MDP".into()));
        }
        let a = constrained_eval_exact(&aug.mdp, &lifted, &z, f);
        let b = constrained_eval_exact(&aug.mdp, &projected, &z, f);
        worst = worst.max(a.max_abs_diff(&b));
    }
    Ok(worst)
}

/// Occupancy accounting of `Ξπ` in `M′`. Returns the larger of
/// `|η(s_abs) − γ/(1−γ) · η(S, a_abs)|` and `|1 − Σ η|`.
pub fn check_occupancy_bookkeeping(mdp: &TabularMdp, pi: &Policy, filter: &SupportFilter) -> Result<f64> {
    let (aug, _, projected) = setup(mdp, pi, filter)?;
    let eta = occupancy(&aug.mdp, &projected, SOLVE_TOL)?;
    let escaped: f64 = (0..mdp.num_states()).map(|s| eta.get(s, aug.a_abs)).sum();
    let absorbed = eta.state_mass(aug.s_abs);
    let g = mdp.gamma();
    let flow = (absorbed - g / (1.0 - g) * escaped).abs();
    Ok(flow.max((1.0 - eta.total()).abs()))
}

/// Exact escape probability from the discounted occupancy of `π`.
pub fn membership(
    mdp: &TabularMdp,
    pi: &Policy,
    filter: &SupportFilter,
    epsilon_zeta: f64,
) -> Result<MembershipReport> {
    if filter.num_states() != mdp.num_states() || filter.num_actions() != mdp.num_actions() {
        return Err(Error::Config("filter shape does not match MDP".into()));
    }
    let eta = occupancy(mdp, pi, SOLVE_TOL)?;
    let escape_prob = eta.expect(|s, a| 1.0 - filter.zeta(s, a));
    Ok(MembershipReport { escape_prob, epsilon_zeta, member: escape_prob <= epsilon_zeta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RandomInstance;
    use crate::mdp::exact_policy_evaluation;

    fn inst(seed: u64) -> RandomInstance {
        RandomInstance::generate(seed, 6, 3).unwrap()
    }

    #[test]
    fn full_support_reduces_to_standard_evaluation() {
        let x = inst(11);
        let (ns, na) = (x.mdp.num_states(), x.mdp.num_actions());
        let all = SupportFilter::all(ns, na);
        let r = check_fixed_point(&x.mdp, &x.policy, &all, 1e-8).unwrap();
        assert!(r.pass, "{r:?}");
        let p = check_projection_value(&x.mdp, &x.policy, &all, 1e-9).unwrap();
        assert!(p.pass && (p.lhs - p.rhs).abs() < 1e-9);
        assert_eq!(membership(&x.mdp, &x.policy, &all, 0.0).unwrap().escape_prob, 0.0);
    }

    #[test]
    fn empty_support_fixed_point_is_reward() {
        let x = inst(12);
        let (ns, na) = (x.mdp.num_states(), x.mdp.num_actions());
        let none = SupportFilter::none(ns, na);
        let mut f = QTable::zeros(ns, na);
        for _ in 0..3 {
            f = constrained_eval_exact(&x.mdp, &x.policy, &none, &f);
        }
        for s in 0..ns {
            for a in 0..na {
                assert_eq!(f.get(s, a), x.mdp.reward_mean(s, a));
            }
        }
        assert!(check_fixed_point(&x.mdp, &x.policy, &none, 1e-8).unwrap().pass);
        let m = membership(&x.mdp, &x.policy, &none, 0.5).unwrap();
        assert!((m.escape_prob - 1.0).abs() < 1e-12 && !m.member);
    }

    #[test]
    fn empty_support_projected_value_is_immediate_reward() {
        let x = inst(13);
        let (ns, na) = (x.mdp.num_states(), x.mdp.num_actions());
        let none = SupportFilter::none(ns, na);
        // Ξπ takes a_abs at once, so nothing is ever earned
        let r = check_projection_value(&x.mdp, &x.policy, &none, 1e-9).unwrap();
        assert!(r.lhs.abs() < 1e-12, "{r:?}");
        let e = check_escape_bound(&x.mdp, &x.policy, &none, 1e-9).unwrap();
        assert!(e.pass);
        // acting with π for one step and then with Ξπ earns exactly E_{ρ,π}[r]
        let (aug, _, projected) = setup(&x.mdp, &x.policy, &none).unwrap();
        let q = exact_policy_evaluation(&aug.mdp, &projected, 1e-13).unwrap();
        let rho = x.mdp.initial();
        let mixed: f64 = (0..ns).map(|s| rho[s] * x.policy.expect(s, |a| q.get(s, a))).sum();
        let direct: f64 =
            (0..ns).map(|s| rho[s] * x.policy.expect(s, |a| x.mdp.reward_mean(s, a))).sum();
        assert!((mixed - direct).abs() < 1e-12);
    }

    #[test]
    fn bookkeeping_holds_on_random_instances() {
        for seed in 0..20 {
            let x = inst(seed);
            let err = check_occupancy_bookkeeping(&x.mdp, &x.policy, &x.filter).unwrap();
            assert!(err <= 1e-9, "seed {seed}: {err}");
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let x = inst(1);
        assert!(check_fixed_point(&x.mdp, &x.policy, &x.filter, 0.0).is_err());
    }
}
