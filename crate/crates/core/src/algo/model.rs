use crate::data::{Dataset, SupportFilter};
use crate::mdp::{Policy, QTable};
use crate::{Error, Result};

/// Per-pair sufficient statistics of a dataset.
///
/// Every sampled-operator backup in this crate is the exact least-squares
/// minimizer over the complete tabular class, i.e. the per-pair sample mean of
/// the regression target. Since the target is affine in the next state, the
/// mean reduces to `r̄(s,a) + γ Σ_{s'} N(s,a,s')/N(s,a) · V(s')`.
/// Pairs with no samples keep the default value 0.
#[derive(Debug, Clone)]
pub struct EmpiricalModel {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    n: usize,
    counts: Vec<u64>,
    state_counts: Vec<u64>,
    reward_mean: Vec<f64>,
    // CSR layout over pairs: next_states/weights[offsets[p]..offsets[p + 1]]
    offsets: Vec<usize>,
    next_states: Vec<usize>,
    weights: Vec<f64>,
}

impl EmpiricalModel {
    pub fn new(dataset: &Dataset, num_states: usize, num_actions: usize, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        let pairs = num_states * num_actions;
        let mut counts = vec![0u64; pairs];
        let mut reward_sum = vec![0.0; pairs];
        let mut state_counts = vec![0u64; num_states];
        let mut by_pair: Vec<Vec<usize>> = vec![Vec::new(); pairs];
        for t in dataset.transitions() {
            if t.s >= num_states || t.a >= num_actions || t.s_next >= num_states {
                return Err(Error::Config(format!(
                    "transition ({}, {}, {}) out of range for {num_states}x{num_actions}",
                    t.s, t.a, t.s_next
                )));
            }
            let p = t.s * num_actions + t.a;
            counts[p] += 1;
            reward_sum[p] += t.r;
            state_counts[t.s] += 1;
            by_pair[p].push(t.s_next);
        }
        let mut offsets = Vec::with_capacity(pairs + 1);
        let mut next_states = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        let mut reward_mean = vec![0.0; pairs];
        for p in 0..pairs {
            let list = &mut by_pair[p];
            if !list.is_empty() {
                let c = counts[p] as f64;
                reward_mean[p] = reward_sum[p] / c;
                list.sort_unstable();
                let mut i = 0;
                while i < list.len() {
                    let j = list[i..].partition_point(|&x| x == list[i]) + i;
                    next_states.push(list[i]);
                    weights.push((j - i) as f64 / c);
                    i = j;
                }
            }
            offsets.push(next_states.len());
        }
        Ok(Self {
            num_states,
            num_actions,
            gamma,
            n: dataset.len(),
            counts,
            state_counts,
            reward_mean,
            offsets,
            next_states,
            weights,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.num_actions + a]
    }

    pub fn state_count(&self, s: usize) -> u64 {
        self.state_counts[s]
    }

    /// Empirical mean reward at `(s,a)`, 0 when unsampled.
    pub fn reward_mean(&self, s: usize, a: usize) -> f64 {
        self.reward_mean[s * self.num_actions + a]
    }

    /// Empirical next-state distribution at `(s,a)` as `(s', N(s,a,s')/N(s,a))`.
    pub fn next(&self, s: usize, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let p = s * self.num_actions + a;
        let range = self.offsets[p]..self.offsets[p + 1];
        self.next_states[range.clone()].iter().copied().zip(self.weights[range].iter().copied())
    }

    /// States that appear as a source state in the data.
    pub fn visited_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states).filter(|&s| self.state_counts[s] > 0)
    }

    /// Fills `out` with `r̄ + γ Σ P̂ V` on sampled pairs and 0 elsewhere.
    pub(crate) fn backup_into(&self, next_value: &[f64], out: &mut QTable) {
        let g = self.gamma;
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let p = s * self.num_actions + a;
                let v = if self.counts[p] == 0 {
                    0.0
                } else {
                    let ev: f64 = self.next(s, a).map(|(t, w)| w * next_value[t]).sum();
                    self.reward_mean[p] + g * ev
                };
                out.set(s, a, v);
            }
        }
    }

    /// Dataset-weighted mean of `Σ_a π(a|s) ζ(s,a)` over source states.
    pub fn policy_coverage(&self, pi: &Policy, filter: &SupportFilter) -> f64 {
        let total: f64 = self
            .visited_states()
            .map(|s| self.state_counts[s] as f64 * pi.expect(s, |a| filter.zeta(s, a)))
            .sum();
        total / self.n.max(1) as f64
    }

    pub(crate) fn check_shapes(&self, f: &QTable, filter: Option<&SupportFilter>) {
        assert_eq!(
            (f.num_states(), f.num_actions()),
            (self.num_states, self.num_actions),
            "table shape does not match the empirical model"
        );
        if let Some(z) = filter {
            assert_eq!(
                (z.num_states(), z.num_actions()),
                (self.num_states, self.num_actions),
                "filter shape does not match the empirical model"
            );
        }
    }
}

/// Empirical ζ-constrained evaluation backup:
/// target `r + γ Σ_{a'} π(a'|s') ζ(s',a') f(s',a')`.
pub fn constrained_eval_backup(
    model: &EmpiricalModel,
    f: &QTable,
    pi: &Policy,
    filter: &SupportFilter,
) -> QTable {
    model.check_shapes(f, Some(filter));
    let v: Vec<f64> = (0..model.num_states)
        .map(|s| pi.expect(s, |a| filter.zeta(s, a) * f.get(s, a)))
        .collect();
    let mut out = QTable::zeros(model.num_states, model.num_actions);
    model.backup_into(&v, &mut out);
    out
}

/// Empirical ζ-constrained optimality backup:
/// target `r + γ max_{a'} ζ(s',a') f(s',a')`.
pub fn constrained_opt_backup(model: &EmpiricalModel, f: &QTable, filter: &SupportFilter) -> QTable {
    model.check_shapes(f, Some(filter));
    let v: Vec<f64> = (0..model.num_states)
        .map(|s| {
            (0..model.num_actions)
                .map(|a| filter.zeta(s, a) * f.get(s, a))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mut out = QTable::zeros(model.num_states, model.num_actions);
    model.backup_into(&v, &mut out);
    out
}

/// Plain empirical evaluation backup `r + γ Σ_{a'} π(a'|s') f(s',a')`.
pub fn eval_backup(model: &EmpiricalModel, f: &QTable, pi: &Policy) -> QTable {
    model.check_shapes(f, None);
    let v = crate::mdp::state_values(f, pi);
    let mut out = QTable::zeros(model.num_states, model.num_actions);
    model.backup_into(&v, &mut out);
    out
}

/// Plain empirical optimality backup `r + γ max_{a'} f(s',a')`.
pub fn opt_backup(model: &EmpiricalModel, f: &QTable) -> QTable {
    model.check_shapes(f, None);
    let v: Vec<f64> = (0..model.num_states)
        .map(|s| f.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut out = QTable::zeros(model.num_states, model.num_actions);
    model.backup_into(&v, &mut out);
    out
}
