use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{
    check_escape_bound, check_fixed_point, check_occupancy_bookkeeping,
    check_operator_projection_equiv, check_projection_value, membership,
};
use crate::env::RandomInstance;
use crate::mdp::QTable;
use crate::rng::{id_hash, mix_seed, rng_from_seed};
use crate::Result;

/// Random-instance family and tolerances for the property checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub cases: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub fixed_point_tol: f64,
    pub value_tol: f64,
    pub operator_tol: f64,
    pub bookkeeping_tol: f64,
    /// Random tables per case for the operator identity.
    pub operator_tables: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            cases: 200,
            max_states: 8,
            max_actions: 3,
            fixed_point_tol: 1e-8,
            value_tol: 1e-9,
            operator_tol: 1e-12,
            bookkeeping_tol: 1e-9,
            operator_tables: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub case: usize,
    pub seed: u64,
    pub states: usize,
    pub actions: usize,
    pub gamma: f64,
    pub support_size: usize,
    pub escape_prob: f64,
    pub fixed_point_residual: f64,
    pub fixed_point_pass: bool,
    pub projected_value: f64,
    pub lifted_value: f64,
    pub projection_pass: bool,
    pub escape_lhs: f64,
    pub escape_rhs: f64,
    pub escape_pass: bool,
    pub operator_residual: f64,
    pub operator_pass: bool,
    pub bookkeeping_residual: f64,
    pub bookkeeping_pass: bool,
}

impl CaseReport {
    pub fn pass(&self) -> bool {
        self.fixed_point_pass
            && self.projection_pass
            && self.escape_pass
            && self.operator_pass
            && self.bookkeeping_pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SuiteSummary {
    pub cases: usize,
    pub fixed_point_pass: usize,
    pub projection_pass: usize,
    pub escape_pass: usize,
    pub operator_pass: usize,
    pub bookkeeping_pass: usize,
    pub max_fixed_point_residual: f64,
    pub max_operator_residual: f64,
}

impl SuiteSummary {
    pub fn from_cases(cases: &[CaseReport]) -> Self {
        let count = |f: fn(&CaseReport) -> bool| cases.iter().filter(|c| f(c)).count();
        Self {
            cases: cases.len(),
            fixed_point_pass: count(|c| c.fixed_point_pass),
            projection_pass: count(|c| c.projection_pass),
            escape_pass: count(|c| c.escape_pass),
            operator_pass: count(|c| c.operator_pass),
            bookkeeping_pass: count(|c| c.bookkeeping_pass),
            max_fixed_point_residual: cases.iter().map(|c| c.fixed_point_residual).fold(0.0, f64::max),
            max_operator_residual: cases.iter().map(|c| c.operator_residual).fold(0.0, f64::max),
        }
    }

    pub fn all_pass(&self) -> bool {
        [
            self.fixed_point_pass,
            self.projection_pass,
            self.escape_pass,
            self.operator_pass,
            self.bookkeeping_pass,
        ]
        .iter()
        .all(|&k| k == self.cases)
    }
}

fn run_case(cfg: &SuiteConfig, base_seed: u64, case: usize) -> Result<CaseReport> {
    let seed = mix_seed(&[base_seed, id_hash("theory"), case as u64]);
    let x = RandomInstance::generate(seed, cfg.max_states, cfg.max_actions)?;
    let (mdp, pi, z) = (&x.mdp, &x.policy, &x.filter);
    let fp = check_fixed_point(mdp, pi, z, cfg.fixed_point_tol)?;
    let proj = check_projection_value(mdp, pi, z, cfg.value_tol)?;
    let esc = check_escape_bound(mdp, pi, z, cfg.value_tol)?;
    let mut rng = rng_from_seed(mix_seed(&[seed, id_hash("tables")]));
    let (ns, na) = (mdp.num_states() + 1, mdp.num_actions() + 1);
    let tables: Vec<QTable> = (0..cfg.operator_tables.max(1))
        .map(|_| {
            let v = (0..ns * na).map(|_| rng.random::<f64>() * mdp.v_max()).collect();
            QTable::from_vec(ns, na, v)
        })
        .collect();
    let op = check_operator_projection_equiv(mdp, pi, z, &tables)?;
    let book = check_occupancy_bookkeeping(mdp, pi, z)?;
    Ok(CaseReport {
        case,
        seed,
        states: mdp.num_states(),
        actions: mdp.num_actions(),
        gamma: mdp.gamma(),
        support_size: z.support_size(),
        escape_prob: membership(mdp, pi, z, 0.0)?.escape_prob,
        fixed_point_residual: fp.residual,
        fixed_point_pass: fp.pass,
        projected_value: proj.lhs,
        lifted_value: proj.rhs,
        projection_pass: proj.pass,
        escape_lhs: esc.lhs,
        escape_rhs: esc.rhs,
        escape_pass: esc.pass,
        operator_residual: op,
        operator_pass: op <= cfg.operator_tol,
        bookkeeping_residual: book,
        bookkeeping_pass: book <= cfg.bookkeeping_tol,
    })
}

/// Runs every check on `cfg.cases` seeded random instances, in parallel,
/// returning reports in case order.
pub fn run_suite(cfg: &SuiteConfig, base_seed: u64) -> Result<Vec<CaseReport>> {
    (0..cfg.cases).into_par_iter().map(|c| run_case(cfg, base_seed, c)).collect()
}

pub fn write_suite_csv(cases: &[CaseReport], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for c in cases {
        out.serialize(c)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_is_deterministic() {
        let cfg = SuiteConfig { cases: 12, ..Default::default() };
        let a = run_suite(&cfg, 5).unwrap();
        let b = run_suite(&cfg, 5).unwrap();
        assert_eq!(a, b);
        let summary = SuiteSummary::from_cases(&a);
        assert!(summary.all_pass(), "{summary:?}");
        let mut buf = Vec::new();
        write_suite_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert!(text.starts_with("case,seed,states"));
    }
}
