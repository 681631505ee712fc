use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mbs_core::experiment::{read_spec, run_to_dir, ExperimentKind, ExperimentSpec, Report, SummaryRow};
use mbs_core::Result;

/// Offline RL experiment harness for tabular MDPs.
#[derive(Parser)]
#[command(name = "mbs-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Success frequency against the exact optimum on the tabular instances.
    SuccessRate(RunArgs),
    /// Discretized cart-pole sweep over behavior noise levels.
    Cartpole(RunArgs),
    /// Safe improvement over a known behavior on random MDPs.
    SafeImprove(RunArgs),
    /// Property checks on random (MDP, policy, filter) triples.
    VerifyTheory(RunArgs),
    /// Print the fully resolved default spec for an experiment kind.
    DefaultSpec {
        #[arg(value_parser = parse_kind)]
        kind: ExperimentKind,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML spec; defaults apply when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Base seed, overriding the spec's.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the spec's `output` (default `results`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_kind(s: &str) -> std::result::Result<ExperimentKind, String> {
    match s.replace('-', "_").as_str() {
        "success_rate" => Ok(ExperimentKind::SuccessRate),
        "cartpole" => Ok(ExperimentKind::Cartpole),
        "safe_improve" => Ok(ExperimentKind::SafeImprove),
        "verify_theory" => Ok(ExperimentKind::VerifyTheory),
        _ => Err(format!("unknown experiment kind `{s}`")),
    }
}

fn load(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = match &args.spec {
        Some(p) => read_spec(p)?,
        None => ExperimentSpec::new(kind),
    };
    if spec.kind != kind {
        return Err(mbs_core::Error::Config(format!(
            "spec is for `{}` but the `{}` subcommand was used",
            spec.kind, kind
        )));
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(out) = &args.out {
        spec.output = Some(out.display().to_string());
    }
    Ok(spec)
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:<18} {:<24} {:>7} {:>6} {:>6} {:>8} {:>12}",
        "environment", "algorithm", "n", "eps", "runs", "success", "mean value"
    );
    for r in rows {
        let eps = r.epsilon.map(|e| format!("{e}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<18} {:<24} {:>7} {:>6} {:>6} {:>8.3} {:>12.4}",
            r.environment, r.algorithm, r.n, eps, r.runs, r.success_rate, r.mean_value
        );
    }
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<()> {
    let spec = load(kind, args)?;
    let out = PathBuf::from(spec.output.clone().unwrap_or_else(|| "results".into()));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| mbs_core::Error::Config(e.to_string()))?;
    let (written, report) = pool.install(|| run_to_dir(&spec, &out))?;
    match report {
        Report::Runs { summary } => print_summary(&summary),
        Report::CartPole { summary, calibration_return, ablation_trend } => {
            println!("tabular optimum return: {calibration_return:.1}");
            print_summary(&summary);
            println!("rank correlation (epsilon, best b): {ablation_trend:.3}");
        }
        Report::Theory(s) => {
            let line = |name: &str, k: usize| {
                let verdict = if k == s.cases { "PASS" } else { "FAIL" };
                println!("{verdict}  {name:<28} {k}/{}", s.cases);
            };
            line("fixed point", s.fixed_point_pass);
            line("projection value", s.projection_pass);
            line("escape bound", s.escape_pass);
            line("operator equivalence", s.operator_pass);
            line("occupancy bookkeeping", s.bookkeeping_pass);
            println!("max fixed-point residual {:e}", s.max_fixed_point_residual);
            println!("max operator residual    {:e}", s.max_operator_residual);
        }
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SuccessRate(a) => run(ExperimentKind::SuccessRate, a),
        Command::Cartpole(a) => run(ExperimentKind::Cartpole, a),
        Command::SafeImprove(a) => run(ExperimentKind::SafeImprove, a),
        Command::VerifyTheory(a) => run(ExperimentKind::VerifyTheory, a),
        Command::DefaultSpec { kind } => {
            ExperimentSpec::new(*kind).resolved().to_toml().map(|t| print!("{t}"))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
