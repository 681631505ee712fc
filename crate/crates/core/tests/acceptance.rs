//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails. Tolerances are pinned below.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use mbs_core::algo::{api, fqi, mbs_pi, mbs_qi, AlgorithmConfig, EmpiricalModel};
use mbs_core::data::{generate_dataset, SamplingMode, SupportFilter};
use mbs_core::env::{random_mdp, random_policy};
use mbs_core::experiment::{
    mid_sample_size, run_cartpole, run_safe_improve, run_success_rate, run_to_dir, summarize, CartPoleSpec,
    EnvironmentId, ExperimentKind, ExperimentSpec, SummaryRow, CARTPOLE_B_GRID,
};
use mbs_core::rng::{mix_seed, rng_from_seed};
use mbs_core::theory::{run_suite, SuiteConfig, SuiteSummary};

const FIXED_POINT_TOL: f64 = 1e-8;
const VALUE_TOL: f64 = 1e-9;
const OPERATOR_TOL: f64 = 1e-12;
const THEORY_CASES: usize = 200;
const OPERATOR_CASES: usize = 100;
const THEORY_BUDGET: Duration = Duration::from_secs(10);
const REDUCTION_DATASETS: u64 = 20;
const SUCCESS_AT_MAX_N: f64 = 0.9;
const MID_N_GAP: f64 = 0.3;
const SUCCESS_BUDGET: Duration = Duration::from_secs(600);
const CARTPOLE_EPSILONS: [f64; 2] = [0.3, 0.6];
const CARTPOLE_SLACK: f64 = 5.0;
const CARTPOLE_BUDGET: Duration = Duration::from_secs(1800);
const SAFE_INSTANCES: usize = 100;
const SAFE_MIN_PASS: usize = 95;
const SAFE_N: usize = 100_000;

struct Verdicts(Vec<(String, bool, String)>);

impl Verdicts {
    fn record(&mut self, name: &str, pass: bool, detail: String) {
        println!("{}  {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.0.push((name.to_string(), pass, detail));
    }
}

fn theory(v: &mut Verdicts) {
    let cfg = SuiteConfig {
        cases: THEORY_CASES,
        fixed_point_tol: FIXED_POINT_TOL,
        value_tol: VALUE_TOL,
        operator_tol: OPERATOR_TOL,
        ..Default::default()
    };
    let start = Instant::now();
    let cases = run_suite(&cfg, 0).expect("suite runs");
    let elapsed = start.elapsed();
    let s = SuiteSummary::from_cases(&cases);
    v.record(
        "fixed point of the constrained evaluation operator",
        s.fixed_point_pass == THEORY_CASES && elapsed < THEORY_BUDGET,
        format!(
            "{}/{} within {FIXED_POINT_TOL:e} (max residual {:e}) in {:.2} s",
            s.fixed_point_pass,
            s.cases,
            s.max_fixed_point_residual,
            elapsed.as_secs_f64()
        ),
    );
    v.record(
        "projection inequalities",
        s.projection_pass == THEORY_CASES && s.escape_pass == THEORY_CASES,
        format!(
            "projected value {}/{}, escape bound {}/{} (tol {VALUE_TOL:e})",
            s.projection_pass, s.cases, s.escape_pass, s.cases
        ),
    );
    let ops = &cases[..OPERATOR_CASES];
    let ok = ops.iter().filter(|c| c.operator_residual <= OPERATOR_TOL).count();
    let worst = ops.iter().map(|c| c.operator_residual).fold(0.0, f64::max);
    v.record(
        "operator equivalence under projection",
        ok == OPERATOR_CASES,
        format!("{ok}/{OPERATOR_CASES} within {OPERATOR_TOL:e} (max {worst:e})"),
    );
}

fn reduction(v: &mut Verdicts) {
    let mut ok = 0;
    for i in 0..REDUCTION_DATASETS {
        let mut rng = rng_from_seed(mix_seed(&[i, 77]));
        let (ns, na) = (3 + (i as usize % 5), 2 + (i as usize % 2));
        let mdp = random_mdp(&mut rng, ns, na, 0.9).unwrap();
        let mu = random_policy(&mut rng, ns, na);
        let ds = generate_dataset(&mdp, &mu, 50 + 40 * i as usize, SamplingMode::IidOccupancy, i).unwrap();
        let m = EmpiricalModel::new(&ds, ns, na, 0.9).unwrap();
        let all = SupportFilter::all(ns, na);
        let qi = AlgorithmConfig { iters: 100, keep_tables: true, ..Default::default() };
        let pi = AlgorithmConfig { iters: 10, inner_iters: 20, keep_tables: true, ..Default::default() };
        let (pa, ta) = mbs_qi(&m, &all, &qi).unwrap();
        let (pb, tb) = fqi(&m, &qi).unwrap();
        let (pc, tc) = mbs_pi(&m, &all, &pi).unwrap();
        let (pd, td) = api(&m, &pi).unwrap();
        if ta.tables == tb.tables && pa == pb && tc.tables == td.tables && pc == pd {
            ok += 1;
        }
    }
    v.record(
        "full-support reduction to FQI / API",
        ok == REDUCTION_DATASETS,
        format!("{ok}/{REDUCTION_DATASETS} datasets with bit-identical per-iteration tables"),
    );
}

fn rate(summary: &[SummaryRow], env: &str, alg: &str, n: usize) -> f64 {
    summary
        .iter()
        .find(|r| r.environment == env && r.algorithm == alg && r.n == n)
        .unwrap_or_else(|| panic!("missing {env}/{alg}/{n}"))
        .success_rate
}

fn success_rate(v: &mut Verdicts) {
    let spec = ExperimentSpec::new(ExperimentKind::SuccessRate).resolved();
    let start = Instant::now();
    let out = run_success_rate(&spec).expect("success-rate run");
    let elapsed = start.elapsed();
    let summary = summarize(&out.rows);
    let max_n = *spec.sample_sizes.iter().max().unwrap();
    let baselines = ["fqi", "api", "bcql(tau=0)", "bcql(tau=0.1)", "spibb"];
    let mut at_max = true;
    let mut detail = Vec::new();
    let mut gap_somewhere = false;
    for env in [EnvironmentId::RareTransition, EnvironmentId::CombinationLock] {
        let e = env.as_str();
        let mid = mid_sample_size(env);
        let best_base = baselines.iter().map(|b| rate(&summary, e, b, mid)).fold(0.0, f64::max);
        let mut gap_here = true;
        for alg in ["mbs_qi", "mbs_pi"] {
            let hi = rate(&summary, e, alg, max_n);
            at_max &= hi >= SUCCESS_AT_MAX_N;
            let m = rate(&summary, e, alg, mid);
            gap_here &= m - best_base >= MID_N_GAP;
            detail.push(format!("{e} {alg}: {hi:.2}@{max_n}, {m:.2}@{mid}"));
        }
        gap_somewhere |= gap_here;
        detail.push(format!("{e} best baseline {best_base:.2}@{mid}"));
    }
    v.record(
        "success-rate reproduction",
        at_max && gap_somewhere && elapsed < SUCCESS_BUDGET,
        format!("{} in {:.1} s", detail.join("; "), elapsed.as_secs_f64()),
    );
}

fn cartpole(v: &mut Verdicts) {
    let mut spec = ExperimentSpec::new(ExperimentKind::Cartpole);
    spec.epsilons = CARTPOLE_EPSILONS.to_vec();
    spec.repeats = Some(10);
    spec.cartpole = Some(CartPoleSpec { curve_stride: 0, ablation_b: Vec::new(), ..Default::default() });
    let start = Instant::now();
    let out = run_cartpole(&spec).expect("cart-pole run");
    let elapsed = start.elapsed();
    let mut means: BTreeMap<(u64, String), f64> = BTreeMap::new();
    for r in summarize(&out.runs.rows) {
        means.insert((r.epsilon.unwrap().to_bits(), r.algorithm), r.mean_value);
    }
    let mut pass = elapsed < CARTPOLE_BUDGET;
    let mut detail = Vec::new();
    for eps in CARTPOLE_EPSILONS {
        let get = |alg: &str| means[&(eps.to_bits(), alg.to_string())];
        let (best_b, best) = CARTPOLE_B_GRID
            .iter()
            .map(|&b| (b, get(&format!("mbs_qi(b={b})"))))
            .fold((f64::NAN, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let (bc, fq) = (get("bc"), get("fqi"));
        let ok = best >= bc - CARTPOLE_SLACK && best >= fq - CARTPOLE_SLACK;
        pass &= ok;
        detail.push(format!("eps {eps}: mbs_qi {best:.1} (b={best_b}) vs bc {bc:.1}, fqi {fq:.1}"));
    }
    v.record(
        "cart-pole comparison",
        pass,
        format!(
            "{}; optimum {:.1}; {:.1} s",
            detail.join("; "),
            out.calibration_return,
            elapsed.as_secs_f64()
        ),
    );
}

fn safe_improvement(v: &mut Verdicts) {
    let mut spec = ExperimentSpec::new(ExperimentKind::SafeImprove);
    spec.repeats = Some(SAFE_INSTANCES);
    spec.sample_sizes = vec![SAFE_N];
    let out = run_safe_improve(&spec).expect("safe-improvement run");
    let ok = out.rows.iter().filter(|r| r.success).count();
    let worst = out.rows.iter().map(|r| r.policy_value - r.behavior_value).fold(f64::INFINITY, f64::min);
    v.record(
        "safe policy improvement",
        out.rows.len() == SAFE_INSTANCES && ok >= SAFE_MIN_PASS,
        format!("{ok}/{SAFE_INSTANCES} instances (min v - v_behavior = {worst:.4})"),
    );
}

fn determinism(v: &mut Verdicts) {
    let mut specs = Vec::new();
    let mut sr = ExperimentSpec::new(ExperimentKind::SuccessRate);
    sr.repeats = Some(5);
    sr.sample_sizes = vec![100, 1000];
    specs.push(sr);
    let mut cp = ExperimentSpec::new(ExperimentKind::Cartpole);
    cp.repeats = Some(2);
    cp.epsilons = vec![0.5];
    cp.cartpole = Some(CartPoleSpec { n: 2000, eval_episodes: 20, ablation_b: vec![0.01, 0.001], ..Default::default() });
    specs.push(cp);
    let mut si = ExperimentSpec::new(ExperimentKind::SafeImprove);
    si.repeats = Some(10);
    specs.push(si);
    let mut vt = ExperimentSpec::new(ExperimentKind::VerifyTheory);
    vt.theory = Some(SuiteConfig { cases: 20, ..Default::default() });
    specs.push(vt);

    let mut identical = 0;
    let mut files = 0;
    for spec in &specs {
        let runs: Vec<BTreeMap<String, Vec<u8>>> = [1usize, 3]
            .iter()
            .map(|&threads| {
                let dir = tempfile::tempdir().unwrap();
                let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
                let (paths, _) = pool.install(|| run_to_dir(spec, dir.path())).unwrap();
                paths
                    .iter()
                    .filter(|p| !p.to_string_lossy().ends_with("_timings.csv"))
                    .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
                    .collect()
            })
            .collect();
        files += runs[0].len();
        identical += runs[0].iter().filter(|(k, bytes)| runs[1].get(*k) == Some(bytes)).count();
    }
    v.record(
        "deterministic output",
        identical == files && files > 0,
        format!("{identical}/{files} result files byte-identical across reruns with 1 and 3 threads"),
    );
}

#[test]
fn acceptance() {
    let mut v = Verdicts(Vec::new());
    theory(&mut v);
    reduction(&mut v);
    success_rate(&mut v);
    cartpole(&mut v);
    safe_improvement(&mut v);
    determinism(&mut v);
    let failed: Vec<&str> = v.0.iter().filter(|(_, p, _)| !p).map(|(n, _, _)| n.as_str()).collect();
    println!("{}/{} criteria passed", v.0.len() - failed.len(), v.0.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
