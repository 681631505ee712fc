use super::Dataset;
use crate::{Error, Result};

/// Maximum-likelihood behavior estimates from counts:
/// `μ̂(s,a) = N(s,a)/n` and `μ̂(a|s) = N(s,a)/N(s)`.
///
/// States absent from the data get the uniform conditional; their joint mass
/// is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    num_states: usize,
    num_actions: usize,
    n: usize,
    counts: Vec<u64>,
    joint: Vec<f64>,
    conditional: Vec<f64>,
}

impl DensityEstimate {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.num_actions + a]
    }

    pub fn state_count(&self, s: usize) -> u64 {
        self.counts[s * self.num_actions..(s + 1) * self.num_actions].iter().sum()
    }

    /// `μ̂(s,a)`.
    pub fn joint(&self, s: usize, a: usize) -> f64 {
        self.joint[s * self.num_actions + a]
    }

    /// `μ̂(a|s)`.
    pub fn conditional(&self, s: usize, a: usize) -> f64 {
        self.conditional[s * self.num_actions + a]
    }

    pub fn joint_table(&self) -> &[f64] {
        &self.joint
    }

    pub fn conditional_table(&self) -> &[f64] {
        &self.conditional
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

pub fn estimate_density(
    dataset: &Dataset,
    num_states: usize,
    num_actions: usize,
) -> Result<DensityEstimate> {
    if dataset.is_empty() {
        return Err(Error::Config("cannot estimate a density from an empty dataset".into()));
    }
    let mut counts = vec![0u64; num_states * num_actions];
    for t in dataset.transitions() {
        if t.s >= num_states || t.a >= num_actions {
            return Err(Error::Config(format!("transition ({}, {}) out of range", t.s, t.a)));
        }
        counts[t.s * num_actions + t.a] += 1;
    }
    let n = dataset.len();
    let joint = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let mut conditional = vec![1.0 / num_actions as f64; num_states * num_actions];
    for s in 0..num_states {
        let row = &counts[s * num_actions..(s + 1) * num_actions];
        let total: u64 = row.iter().sum();
        if total > 0 {
            for a in 0..num_actions {
                conditional[s * num_actions + a] = row[a] as f64 / total as f64;
            }
        }
    }
    Ok(DensityEstimate { num_states, num_actions, n, counts, joint, conditional })
}
