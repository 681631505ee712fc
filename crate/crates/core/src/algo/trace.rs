use std::io::Write;

use crate::mdp::{policy_value, Policy, QTable, TabularMdp};
use crate::Result;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    /// 1-based outer iteration.
    pub iteration: usize,
    pub policy: Policy,
    /// Dataset-weighted `E[ζ(s, π(s))]`, when the learner uses a filter.
    pub coverage: Option<f64>,
    /// Filled by [`RunTrace::evaluate`] or [`RunTrace::evaluate_with`].
    pub value: Option<f64>,
}

/// Per-iteration record of a learner run.
#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    /// Every intermediate table, in backup order, when requested.
    pub tables: Vec<QTable>,
    pub checkpoints: Vec<Checkpoint>,
    /// Table the final policy was extracted from.
    pub final_table: Option<QTable>,
}

impl RunTrace {
    /// Fills checkpoint values with exact policy values on `mdp`.
    pub fn evaluate(&mut self, mdp: &TabularMdp, tol: f64) -> Result<()> {
        for c in &mut self.checkpoints {
            c.value = Some(policy_value(mdp, &c.policy, tol)?);
        }
        Ok(())
    }

    /// Fills checkpoint values with an arbitrary scorer.
    pub fn evaluate_with(&mut self, mut score: impl FnMut(&Policy) -> Result<f64>) -> Result<()> {
        for c in &mut self.checkpoints {
            c.value = Some(score(&c.policy)?);
        }
        Ok(())
    }

    /// `iteration,value,coverage`; missing entries are left empty.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iteration", "value", "coverage"])?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for c in &self.checkpoints {
            out.write_record([c.iteration.to_string(), opt(c.value), opt(c.coverage)])?;
        }
        out.flush()?;
        Ok(())
    }
}
