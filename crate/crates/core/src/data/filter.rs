use std::io::Write;

use super::{Dataset, DensityEstimate};
use crate::mdp::Policy;
use crate::{Error, Result};

/// `ζ(s,a) = 1(μ̂(s,a) ≥ b)`, inclusive.
///
/// With `b = 0` every pair passes, including pairs never seen (`0 ≥ 0`).
/// Callers that want "seen pairs only" should pass `b = 1/(2n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportFilter {
    b: Option<f64>,
    num_states: usize,
    num_actions: usize,
    indicator: Vec<bool>,
}

impl SupportFilter {
    /// Thresholds an arbitrary joint table (row-major `S × A`).
    pub fn from_joint(joint: &[f64], num_states: usize, num_actions: usize, b: f64) -> Result<Self> {
        if !(b >= 0.0) {
            return Err(Error::Config(format!("threshold b must be >= 0, got {b}")));
        }
        if joint.len() != num_states * num_actions {
            return Err(Error::Config("joint table shape mismatch".into()));
        }
        let indicator = joint.iter().map(|&m| m >= b).collect();
        Ok(Self { b: Some(b), num_states, num_actions, indicator })
    }

    pub fn from_indicator(indicator: Vec<bool>, num_states: usize, num_actions: usize) -> Self {
        assert_eq!(indicator.len(), num_states * num_actions, "filter shape mismatch");
        Self { b: None, num_states, num_actions, indicator }
    }

    /// ζ ≡ 1.
    pub fn all(num_states: usize, num_actions: usize) -> Self {
        Self::from_indicator(vec![true; num_states * num_actions], num_states, num_actions)
    }

    /// ζ ≡ 0.
    pub fn none(num_states: usize, num_actions: usize) -> Self {
        Self::from_indicator(vec![false; num_states * num_actions], num_states, num_actions)
    }

    /// The threshold `b`, or `None` for filters built from an explicit mask.
    pub fn threshold(&self) -> Option<f64> {
        self.b
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn supported(&self, s: usize, a: usize) -> bool {
        self.indicator[s * self.num_actions + a]
    }

    /// ζ(s,a) as 0.0 / 1.0.
    #[inline]
    pub fn zeta(&self, s: usize, a: usize) -> f64 {
        if self.supported(s, a) {
            1.0
        } else {
            0.0
        }
    }

    pub fn indicator(&self) -> &[bool] {
        &self.indicator
    }

    pub fn support_size(&self) -> usize {
        self.indicator.iter().filter(|&&z| z).count()
    }

    pub fn any_supported(&self, s: usize) -> bool {
        self.indicator[s * self.num_actions..(s + 1) * self.num_actions].iter().any(|&z| z)
    }
}

pub fn build_filter(density: &DensityEstimate, b: f64) -> Result<SupportFilter> {
    SupportFilter::from_joint(density.joint_table(), density.num_states(), density.num_actions(), b)
}

/// Post-hoc coverage diagnostics for a deterministic policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterDiagnostics {
    /// Mean of `ζ(s, π(s))` over the states of the dataset's transitions.
    pub mean_policy_support: f64,
    pub support_size: usize,
    /// Fraction of transitions whose `(s, a)` passes the filter.
    pub data_fraction_in_support: f64,
}

pub fn filter_diagnostics(
    filter: &SupportFilter,
    dataset: &Dataset,
    pi: &Policy,
) -> Result<FilterDiagnostics> {
    if !pi.is_deterministic() {
        return Err(Error::InvalidPolicy("filter diagnostics need a deterministic policy".into()));
    }
    if dataset.is_empty() {
        return Err(Error::Config("empty dataset".into()));
    }
    let n = dataset.len() as f64;
    let (mut on_policy, mut in_support) = (0.0, 0.0);
    for t in dataset.transitions() {
        on_policy += filter.zeta(t.s, pi.action(t.s).expect("deterministic"));
        in_support += filter.zeta(t.s, t.a);
    }
    Ok(FilterDiagnostics {
        mean_policy_support: on_policy / n,
        support_size: filter.support_size(),
        data_fraction_in_support: in_support / n,
    })
}

/// `s,a,count,joint,conditional,zeta` for inspection.
pub fn write_support_csv(
    density: &DensityEstimate,
    filter: &SupportFilter,
    w: impl Write,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["s", "a", "count", "joint", "conditional", "zeta"])?;
    for s in 0..density.num_states() {
        for a in 0..density.num_actions() {
            out.write_record([
                s.to_string(),
                a.to_string(),
                density.count(s, a).to_string(),
                density.joint(s, a).to_string(),
                density.conditional(s, a).to_string(),
                (filter.supported(s, a) as u8).to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
