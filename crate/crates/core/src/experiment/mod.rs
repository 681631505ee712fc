//! Experiment specs, runners and CSV output.
//!
//! Every file written here starts with a `# mbs-lab results v1` line and the
//! resolved spec as comments. Rows are produced in a fixed order regardless
//! of scheduling, so a rerun with the same spec and seed writes identical
//! bytes. Wall-clock timings live in a separate `*_timings.csv`.

mod results;
mod runner;
mod spec;

use std::path::{Path, PathBuf};

pub use results::{
    read_table, summarize, write_header, write_table, write_table_file, Criterion, ResultRow, SummaryRow,
    TimingRow, SCHEMA_VERSION,
};
pub use runner::{
    dataset_seed, mid_sample_size, run_cartpole, run_safe_improve, run_success_rate, run_verify_theory,
    spearman, train, AblationRow, CartPoleOutput, CurveRow, RunOutput, EVAL_TOL, SUCCESS_REL_TOL,
};
pub use spec::{
    default_sample_sizes, parse_spec, read_spec, AlgorithmId, AlgorithmSpec, CartPoleSpec, EnvironmentId,
    ExperimentKind, ExperimentSpec, SafeImproveSpec, Threshold, CARTPOLE_ABLATION_B_GRID, CARTPOLE_B_GRID,
};

use crate::theory::{SuiteSummary, write_suite_csv};
use crate::Result;

/// What a run produced, for printing.
#[derive(Debug, Clone)]
pub enum Report {
    Runs { summary: Vec<SummaryRow> },
    CartPole { summary: Vec<SummaryRow>, calibration_return: f64, ablation_trend: f64 },
    Theory(SuiteSummary),
}

fn emit_runs(
    spec: &ExperimentSpec,
    path: &dyn Fn(&str) -> PathBuf,
    runs: &RunOutput,
    written: &mut Vec<PathBuf>,
) -> Result<Vec<SummaryRow>> {
    let summary = summarize(&runs.rows);
    let p = path("");
    write_table_file(&p, spec, "runs", &runs.rows)?;
    written.push(p);
    let p = path("_summary");
    write_table_file(&p, spec, "summary", &summary)?;
    written.push(p);
    let p = path("_timings");
    write_table_file(&p, spec, "timings", &runs.timings)?;
    written.push(p);
    Ok(summary)
}

/// Runs `spec` and writes its CSVs into `out_dir`, returning the paths
/// written and a summary.
pub fn run_to_dir(spec: &ExperimentSpec, out_dir: &Path) -> Result<(Vec<PathBuf>, Report)> {
    std::fs::create_dir_all(out_dir)?;
    let kind = spec.kind.as_str();
    let path = |suffix: &str| out_dir.join(format!("{kind}{suffix}.csv"));
    let mut written = Vec::new();
    let report = match spec.kind {
        ExperimentKind::SuccessRate => {
            Report::Runs { summary: emit_runs(spec, &path, &run_success_rate(spec)?, &mut written)? }
        }
        ExperimentKind::SafeImprove => {
            Report::Runs { summary: emit_runs(spec, &path, &run_safe_improve(spec)?, &mut written)? }
        }
        ExperimentKind::Cartpole => {
            let out = run_cartpole(spec)?;
            let summary = emit_runs(spec, &path, &out.runs, &mut written)?;
            let p = path("_curves");
            write_table_file(&p, spec, "curves", &out.curves)?;
            written.push(p);
            let p = path("_ablation");
            write_table_file(&p, spec, "ablation", &out.ablation)?;
            written.push(p);
            Report::CartPole {
                summary,
                calibration_return: out.calibration_return,
                ablation_trend: out.ablation_trend,
            }
        }
        ExperimentKind::VerifyTheory => {
            let cases = run_verify_theory(spec)?;
            let p = path("");
            let mut w = std::io::BufWriter::new(std::fs::File::create(&p)?);
            write_header(&mut w, spec, "cases")?;
            write_suite_csv(&cases, w)?;
            written.push(p);
            Report::Theory(SuiteSummary::from_cases(&cases))
        }
    };
    Ok((written, report))
}
