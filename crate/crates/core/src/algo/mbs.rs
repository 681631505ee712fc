use super::model::{constrained_eval_backup, constrained_opt_backup, eval_backup, opt_backup};
use super::{AlgorithmConfig, Checkpoint, EmpiricalModel, RunTrace};
use crate::data::SupportFilter;
use crate::mdp::{Policy, QTable};
use crate::{Error, Result};

/// Lowest-index maximizer of `f(s,·)` among actions with `allowed(a)`.
pub(crate) fn masked_argmax(f: &QTable, s: usize, allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (a, &v) in f.row(s).iter().enumerate() {
        if allowed(a) && best.is_none_or(|(_, bv)| v > bv) {
            best = Some((a, v));
        }
    }
    best.map(|(a, _)| a)
}

/// `argmax_a ζ∘f(s,a)` restricted to supported actions; action 0 where the
/// filter row is empty.
fn supported_greedy(f: &QTable, filter: &SupportFilter) -> Policy {
    let actions = (0..f.num_states())
        .map(|s| masked_argmax(f, s, |a| filter.supported(s, a)).unwrap_or(0))
        .collect();
    Policy::Deterministic { actions, num_actions: f.num_actions() }
}

fn greedy(f: &QTable) -> Policy {
    let actions = (0..f.num_states()).map(|s| f.argmax(s)).collect();
    Policy::Deterministic { actions, num_actions: f.num_actions() }
}

/// Improvement over the deterministic class using only states seen in the
/// data; every other state keeps action 0.
fn improve(model: &EmpiricalModel, f: &QTable, filter: Option<&SupportFilter>) -> Policy {
    let mut actions = vec![0; model.num_states()];
    for s in model.visited_states() {
        actions[s] = match filter {
            Some(z) => masked_argmax(f, s, |a| z.supported(s, a)).unwrap_or(0),
            None => f.argmax(s),
        };
    }
    Policy::Deterministic { actions, num_actions: model.num_actions() }
}

fn ensure_finite(f: &QTable, iteration: usize) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericFailure { iteration })
    }
}

pub(crate) fn q_iteration(
    model: &EmpiricalModel,
    cfg: &AlgorithmConfig,
    backup: impl Fn(&QTable) -> QTable,
    extract: impl Fn(&QTable) -> Policy,
    coverage: impl Fn(&Policy) -> Option<f64>,
) -> Result<(Policy, RunTrace)> {
    cfg.validate()?;
    let mut f = QTable::zeros(model.num_states(), model.num_actions());
    let mut trace = RunTrace::default();
    for t in 1..=cfg.iters {
        f = backup(&f);
        ensure_finite(&f, t)?;
        if cfg.keep_tables {
            trace.tables.push(f.clone());
        }
        if cfg.is_checkpoint(t) {
            let policy = extract(&f);
            let coverage = coverage(&policy);
            trace.checkpoints.push(Checkpoint { iteration: t, policy, coverage, value: None });
        }
    }
    let policy = trace.checkpoints.last().expect("final checkpoint").policy.clone();
    trace.final_table = Some(f);
    Ok((policy, trace))
}

fn policy_iteration(
    model: &EmpiricalModel,
    cfg: &AlgorithmConfig,
    evaluate: impl Fn(&QTable, &Policy) -> QTable,
    filter: Option<&SupportFilter>,
) -> Result<(Policy, RunTrace)> {
    cfg.validate()?;
    let mut pi = Policy::uniform(model.num_states(), model.num_actions());
    let mut trace = RunTrace::default();
    let mut f = QTable::zeros(model.num_states(), model.num_actions());
    for t in 1..=cfg.iters {
        // each evaluation phase restarts from the zero table
        f = QTable::zeros(model.num_states(), model.num_actions());
        for k in 1..=cfg.inner_iters {
            f = evaluate(&f, &pi);
            ensure_finite(&f, (t - 1) * cfg.inner_iters + k)?;
            if cfg.keep_tables {
                trace.tables.push(f.clone());
            }
        }
        pi = improve(model, &f, filter);
        if cfg.is_checkpoint(t) {
            let coverage = filter.map(|z| model.policy_coverage(&pi, z));
            trace.checkpoints.push(Checkpoint { iteration: t, policy: pi.clone(), coverage, value: None });
        }
    }
    trace.final_table = Some(f);
    Ok((pi, trace))
}

/// MBS Q-iteration: `f ← T̂_ζ f` from zero for `T` steps, then the greedy
/// policy over supported actions.
pub fn mbs_qi(
    model: &EmpiricalModel,
    filter: &SupportFilter,
    cfg: &AlgorithmConfig,
) -> Result<(Policy, RunTrace)> {
    q_iteration(
        model,
        cfg,
        |f| constrained_opt_backup(model, f, filter),
        |f| supported_greedy(f, filter),
        |pi| Some(model.policy_coverage(pi, filter)),
    )
}

/// MBS policy iteration from the uniform policy: `K` evaluation backups
/// under `T̂^π_ζ` per outer step, then supported-greedy improvement on
/// the states present in the data.
pub fn mbs_pi(
    model: &EmpiricalModel,
    filter: &SupportFilter,
    cfg: &AlgorithmConfig,
) -> Result<(Policy, RunTrace)> {
    policy_iteration(
        model,
        cfg,
        |f, pi| constrained_eval_backup(model, f, pi, filter),
        Some(filter),
    )
}

/// Fitted Q-iteration over the tabular class.
pub fn fqi(model: &EmpiricalModel, cfg: &AlgorithmConfig) -> Result<(Policy, RunTrace)> {
    q_iteration(model, cfg, |f| opt_backup(model, f), greedy, |_| None)
}

/// Approximate policy iteration over the tabular class.
pub fn api(model: &EmpiricalModel, cfg: &AlgorithmConfig) -> Result<(Policy, RunTrace)> {
    policy_iteration(model, cfg, |f, pi| eval_backup(model, f, pi), None)
}
