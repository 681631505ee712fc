use super::mbs::{masked_argmax, q_iteration};
use super::{AlgorithmConfig, EmpiricalModel, RunTrace};
use crate::data::{DensityEstimate, SupportFilter};
use crate::mdp::{Policy, QTable};
use crate::{Error, Result};

fn check_density(model: &EmpiricalModel, density: &DensityEstimate) -> Result<()> {
    if density.num_states() != model.num_states() || density.num_actions() != model.num_actions() {
        return Err(Error::Config("density shape does not match the empirical model".into()));
    }
    Ok(())
}

/// Batch-constrained Q-iteration: bootstraps only through actions with
/// `μ̂(a'|s') > τ` (strict), and 0 when none qualify.
pub fn bcql(
    model: &EmpiricalModel,
    density: &DensityEstimate,
    cfg: &AlgorithmConfig,
) -> Result<(Policy, RunTrace)> {
    check_density(model, density)?;
    let tau = cfg.tau;
    let allowed = |s: usize, a: usize| density.conditional(s, a) > tau;
    let backup = |f: &QTable| {
        let v: Vec<f64> = (0..model.num_states())
            .map(|s| masked_argmax(f, s, |a| allowed(s, a)).map_or(0.0, |a| f.get(s, a)))
            .collect();
        let mut out = QTable::zeros(model.num_states(), model.num_actions());
        model.backup_into(&v, &mut out);
        out
    };
    let extract = |f: &QTable| {
        let actions = (0..f.num_states())
            .map(|s| masked_argmax(f, s, |a| allowed(s, a)).unwrap_or(0))
            .collect();
        Policy::Deterministic { actions, num_actions: f.num_actions() }
    };
    q_iteration(model, cfg, backup, extract, |_| None)
}

/// Backup policy row of SPIBB at state `s`.
///
/// Unsupported actions (`ζ = 0`) keep their estimated behavior probability
/// `μ̂(a|s)`; the remaining mass `1 − Σ_{ζ=0} μ̂(a|s)` goes to the best
/// supported action (lowest index on ties). With no supported action the
/// row is exactly `μ̂(·|s)`.
fn spibb_row(f: &QTable, s: usize, density: &DensityEstimate, filter: &SupportFilter) -> Vec<f64> {
    let na = f.num_actions();
    let mut row = vec![0.0; na];
    let mut bootstrapped = 0.0;
    for (a, p) in row.iter_mut().enumerate() {
        if !filter.supported(s, a) {
            *p = density.conditional(s, a);
            bootstrapped += *p;
        }
    }
    if let Some(best) = masked_argmax(f, s, |a| filter.supported(s, a)) {
        row[best] = 1.0 - bootstrapped;
    }
    row
}

/// SPIBB-style Q-iteration with behavior bootstrapping on unsupported pairs:
/// `V(s') = Σ_{ζ=0} μ̂(a'|s') f(s',a') + (1 − Σ_{ζ=0} μ̂(a'|s')) max_{ζ=1} f(s',a')`.
/// The returned policy is the same mixture built from the final table.
pub fn spibb(
    model: &EmpiricalModel,
    density: &DensityEstimate,
    filter: &SupportFilter,
    cfg: &AlgorithmConfig,
) -> Result<(Policy, RunTrace)> {
    check_density(model, density)?;
    let backup = |f: &QTable| {
        let v: Vec<f64> = (0..model.num_states())
            .map(|s| {
                let mut unsupported = 0.0;
                let mut mass = 0.0;
                for a in 0..model.num_actions() {
                    if !filter.supported(s, a) {
                        let p = density.conditional(s, a);
                        unsupported += p * f.get(s, a);
                        mass += p;
                    }
                }
                match masked_argmax(f, s, |a| filter.supported(s, a)) {
                    Some(best) => unsupported + (1.0 - mass) * f.get(s, best),
                    None => unsupported,
                }
            })
            .collect();
        let mut out = QTable::zeros(model.num_states(), model.num_actions());
        model.backup_into(&v, &mut out);
        out
    };
    let extract = |f: &QTable| {
        let probs = (0..f.num_states()).flat_map(|s| spibb_row(f, s, density, filter)).collect();
        Policy::Stochastic { probs, num_actions: f.num_actions() }
    };
    q_iteration(model, cfg, backup, extract, |pi| Some(model.policy_coverage(pi, filter)))
}

/// The estimated behavior policy `μ̂(a|s)`, uniform on unseen states.
pub fn behavior_cloning(density: &DensityEstimate) -> Policy {
    Policy::Stochastic {
        probs: density.conditional_table().to_vec(),
        num_actions: density.num_actions(),
    }
}
