//! Offline learners over the complete tabular function class.
//!
//! All learners consume an [`EmpiricalModel`] built once from the dataset.
//! Q-iteration style methods start from the zero table; pairs without samples
//! are pinned at 0 throughout.

mod baselines;
mod mbs;
mod model;
mod trace;

pub use baselines::{bcql, behavior_cloning, spibb};
pub use mbs::{api, fqi, mbs_pi, mbs_qi};
pub use model::{
    constrained_eval_backup, constrained_opt_backup, eval_backup, opt_backup, EmpiricalModel,
};
pub use trace::{Checkpoint, RunTrace};

use crate::data::{build_filter, DensityEstimate, SupportFilter};
use crate::{Error, Result};

pub const DEFAULT_QI_ITERS: usize = 500;
pub const DEFAULT_PI_OUTER: usize = 20;
pub const DEFAULT_PI_INNER: usize = 100;

/// Iteration budgets and thresholds shared by every learner.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    /// Outer iterations `T`.
    pub iters: usize,
    /// Inner evaluation backups `K` (policy-iteration methods only).
    pub inner_iters: usize,
    /// Support threshold `b` on `μ̂(s,a)`.
    pub b: f64,
    /// BCQL threshold `τ` on `μ̂(a|s)`.
    pub tau: f64,
    /// Keep every intermediate table in the trace.
    pub keep_tables: bool,
    /// Record a greedy-policy checkpoint every `policy_stride` outer
    /// iterations; 0 keeps only the final one.
    pub policy_stride: usize,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            iters: DEFAULT_QI_ITERS,
            inner_iters: DEFAULT_PI_INNER,
            b: 0.0,
            tau: 0.0,
            keep_tables: false,
            policy_stride: 0,
        }
    }
}

impl AlgorithmConfig {
    /// Defaults for the policy-iteration learners (`T = 20`, `K = 100`).
    pub fn policy_iteration() -> Self {
        Self { iters: DEFAULT_PI_OUTER, ..Self::default() }
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 || self.inner_iters == 0 {
            return Err(Error::Config("iteration counts must be at least 1".into()));
        }
        if !(self.b >= 0.0) || !(self.tau >= 0.0) {
            return Err(Error::Config(format!(
                "thresholds must be nonnegative (b = {}, tau = {})",
                self.b, self.tau
            )));
        }
        Ok(())
    }

    /// The support filter `ζ` at this config's `b`.
    pub fn filter(&self, density: &DensityEstimate) -> Result<SupportFilter> {
        build_filter(density, self.b)
    }

    fn is_checkpoint(&self, t: usize) -> bool {
        t == self.iters || (self.policy_stride > 0 && t % self.policy_stride == 0)
    }
}
