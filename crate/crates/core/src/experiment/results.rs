use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::spec::{ExperimentKind, ExperimentSpec};
use crate::Result;

/// Version tag of every CSV this module writes.
pub const SCHEMA_VERSION: u32 = 1;

/// What a row's `success` flag measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `|policy_value − optimal_value| ≤ success_tol`.
    NearOptimal,
    /// `policy_value ≥ behavior_value − success_tol`.
    SafeImprovement,
}

impl Criterion {
    pub fn holds(self, policy: f64, optimal: f64, behavior: f64, tol: f64) -> bool {
        match self {
            Criterion::NearOptimal => (policy - optimal).abs() <= tol,
            Criterion::SafeImprovement => policy >= behavior - tol,
        }
    }
}

/// One learner run on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub environment: String,
    pub algorithm: String,
    pub hyperparameters: String,
    pub n: usize,
    pub epsilon: Option<f64>,
    pub repeat: usize,
    /// Seed of the dataset the learner saw.
    pub seed: u64,
    pub success: bool,
    pub policy_value: f64,
    pub optimal_value: f64,
    pub behavior_value: f64,
    pub success_tol: f64,
    pub criterion: Criterion,
}

impl ResultRow {
    /// Recomputes the success flag from the value columns.
    pub fn recompute_success(&self) -> bool {
        self.criterion.holds(self.policy_value, self.optimal_value, self.behavior_value, self.success_tol)
    }
}

/// Wall-clock cost of a row, kept out of the result file so that reruns are
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub environment: String,
    pub algorithm: String,
    pub n: usize,
    pub epsilon: Option<f64>,
    pub repeat: usize,
    pub runtime_ms: f64,
}

/// Per-point aggregate over repeats. Standard deviations divide by the
/// number of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: ExperimentKind,
    pub environment: String,
    pub algorithm: String,
    pub hyperparameters: String,
    pub n: usize,
    pub epsilon: Option<f64>,
    pub runs: usize,
    pub success_rate: f64,
    pub success_std: f64,
    pub mean_value: f64,
    pub std_value: f64,
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let k = xs.clone().count().max(1) as f64;
    let mean = xs.clone().sum::<f64>() / k;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / k;
    (mean, var.sqrt())
}

/// Groups rows by everything except `repeat`/`seed`, keeping first-seen order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let key = |r: &ResultRow| {
        (r.environment.clone(), r.algorithm.clone(), r.n, r.epsilon.map(f64::to_bits))
    };
    let mut order: Vec<(String, String, usize, Option<u64>)> = Vec::new();
    for r in rows {
        let k = key(r);
        if !order.contains(&k) {
            order.push(k);
        }
    }
    order
        .into_iter()
        .map(|k| {
            let group: Vec<&ResultRow> = rows.iter().filter(|r| key(r) == k).collect();
            let first = group[0];
            let (success_rate, success_std) =
                mean_std(group.iter().map(|r| if r.success { 1.0 } else { 0.0 }));
            let (mean_value, std_value) = mean_std(group.iter().map(|r| r.policy_value));
            SummaryRow {
                experiment: first.experiment,
                environment: first.environment.clone(),
                algorithm: first.algorithm.clone(),
                hyperparameters: first.hyperparameters.clone(),
                n: first.n,
                epsilon: first.epsilon,
                runs: group.len(),
                success_rate,
                success_std,
                mean_value,
                std_value,
            }
        })
        .collect()
}

/// Writes the versioned comment header: a schema line naming the file's
/// table, followed by the fully resolved spec as `# `-prefixed TOML. The
/// output location is omitted, so it does not affect file contents.
pub fn write_header(mut w: impl Write, spec: &ExperimentSpec, table: &str) -> Result<()> {
    let mut resolved = spec.resolved();
    resolved.output = None;
    writeln!(w, "# mbs-lab results v{SCHEMA_VERSION} kind={} table={table}", resolved.kind)?;
    for line in resolved.to_toml()?.lines() {
        if line.is_empty() {
            writeln!(w, "#")?;
        } else {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

/// Writes a header followed by serialized records.
pub fn write_table<T: Serialize>(
    mut w: impl Write,
    spec: &ExperimentSpec,
    table: &str,
    records: &[T],
) -> Result<()> {
    write_header(&mut w, spec, table)?;
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_table_file<T: Serialize>(
    path: &Path,
    spec: &ExperimentSpec,
    table: &str,
    records: &[T],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_table(&mut w, spec, table, records)?;
    w.flush()?;
    Ok(())
}

/// Reads records back from a file written by [`write_table`].
pub fn read_table<T: for<'de> Deserialize<'de>>(r: impl std::io::Read) -> Result<Vec<T>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut out = Vec::new();
    for rec in rd.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
