use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::results::{Criterion, ResultRow, TimingRow};
use super::spec::{AlgorithmId, AlgorithmSpec, EnvironmentId, ExperimentKind, ExperimentSpec, Threshold};
use crate::algo::{api, bcql, behavior_cloning, fqi, mbs_pi, mbs_qi, spibb, EmpiricalModel, RunTrace};
use crate::data::{build_filter, estimate_density, generate_dataset, Dataset, SamplingMode};
use crate::env::cartpole::{build_cartpole_mdp, collect_dataset, evaluate_policy};
use crate::env::{build_combination_lock_mdp, build_rare_transition_mdp, random_mdp, random_policy};
use crate::mdp::{exact_value_iteration, occupancy, policy_value, Policy, TabularMdp};
use crate::rng::{id_hash, mix_seed, rng_from_seed};
use crate::theory::{run_suite, CaseReport};
use crate::{Error, Result};

/// Tolerance for exact policy evaluation in the harness.
pub const EVAL_TOL: f64 = 1e-10;

/// Relative success tolerance on the tabular instances, as a fraction of
/// `V_max`.
pub const SUCCESS_REL_TOL: f64 = 1e-6;

/// The sample size at which the baselines' single-visit failure mode is
/// most pronounced on each canonical instance.
pub fn mid_sample_size(env: EnvironmentId) -> usize {
    match env {
        EnvironmentId::RareTransition => 316,
        EnvironmentId::CombinationLock => 1000,
    }
}

/// Rows plus per-row wall-clock costs, index-aligned.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<TimingRow>,
}

impl RunOutput {
    fn extend(&mut self, items: Vec<(ResultRow, TimingRow)>) {
        for (r, t) in items {
            self.rows.push(r);
            self.timings.push(t);
        }
    }
}

/// Trains one learner on a dataset. `behavior_min` feeds
/// [`Threshold::BehaviorMinFraction`].
pub fn train(
    alg: &AlgorithmSpec,
    ds: &Dataset,
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    behavior_min: Option<f64>,
    policy_stride: usize,
) -> Result<(Policy, RunTrace)> {
    let r = alg.resolved();
    let b = match r.threshold {
        Some(t) => t.resolve(ds.len(), behavior_min)?,
        None => 0.0,
    };
    let mut cfg = r.config(b);
    cfg.policy_stride = policy_stride;
    cfg.validate()?;
    let density = estimate_density(ds, num_states, num_actions)?;
    if r.id == AlgorithmId::Bc {
        return Ok((behavior_cloning(&density), RunTrace::default()));
    }
    let model = EmpiricalModel::new(ds, num_states, num_actions, gamma)?;
    match r.id {
        AlgorithmId::MbsQi => mbs_qi(&model, &build_filter(&density, b)?, &cfg),
        AlgorithmId::MbsPi => mbs_pi(&model, &build_filter(&density, b)?, &cfg),
        AlgorithmId::Fqi => fqi(&model, &cfg),
        AlgorithmId::Api => api(&model, &cfg),
        AlgorithmId::Bcql => bcql(&model, &density, &cfg),
        AlgorithmId::Spibb => spibb(&model, &density, &build_filter(&density, b)?, &cfg),
        AlgorithmId::Bc => unreachable!(),
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

struct Instance {
    id: EnvironmentId,
    mdp: TabularMdp,
    behavior: Policy,
    max_steps: usize,
    optimal: f64,
    behavior_value: f64,
}

fn build_instance(spec: &ExperimentSpec, id: EnvironmentId) -> Result<Instance> {
    let (mdp, behavior, max_steps) = match id {
        EnvironmentId::RareTransition => {
            let cfg = spec.rare_transition.clone().unwrap_or_default();
            let (m, b) = build_rare_transition_mdp(&cfg)?;
            (m, b, cfg.horizon)
        }
        EnvironmentId::CombinationLock => {
            let cfg = spec.combination_lock.clone().unwrap_or_default();
            let (m, b) = build_combination_lock_mdp(&cfg)?;
            (m, b, cfg.horizon)
        }
    };
    let (_, pi_star) = exact_value_iteration(&mdp, EVAL_TOL)?;
    let optimal = policy_value(&mdp, &pi_star, EVAL_TOL)?;
    let behavior_value = policy_value(&mdp, &behavior, EVAL_TOL)?;
    Ok(Instance { id, mdp, behavior, max_steps, optimal, behavior_value })
}

/// Seed of the dataset for `(environment, n, repeat)`. Every algorithm at a
/// grid point sees the same dataset.
pub fn dataset_seed(base: u64, env: &str, n: usize, repeat: usize) -> u64 {
    mix_seed(&[base, id_hash(env), n as u64, repeat as u64])
}

/// Success frequency of each algorithm against the exact optimum, on
/// pooled behavior episodes.
pub fn run_success_rate(spec: &ExperimentSpec) -> Result<RunOutput> {
    let spec = spec.resolved();
    spec.validate()?;
    let instances: Vec<Instance> =
        spec.environments.iter().map(|&e| build_instance(&spec, e)).collect::<Result<_>>()?;
    let mut tasks = Vec::new();
    for (i, _) in instances.iter().enumerate() {
        for &n in &spec.sample_sizes {
            for rep in 0..spec.repeats() {
                tasks.push((i, n, rep));
            }
        }
    }
    let results: Vec<Vec<(ResultRow, TimingRow)>> = tasks
        .par_iter()
        .map(|&(i, n, rep)| {
            let inst = &instances[i];
            let env = inst.id.as_str();
            let seed = dataset_seed(spec.seed, env, n, rep);
            let mode = SamplingMode::TrajectoryPool { max_steps: inst.max_steps };
            let ds = generate_dataset(&inst.mdp, &inst.behavior, n, mode, seed)?.with_ids(env, "behavior");
            let tol = SUCCESS_REL_TOL * inst.mdp.v_max();
            spec.algorithms
                .iter()
                .map(|alg| {
                    let start = Instant::now();
                    let (ns, na) = (inst.mdp.num_states(), inst.mdp.num_actions());
                    let (pi, _) = train(alg, &ds, ns, na, inst.mdp.gamma(), None, 0)?;
                    let value = policy_value(&inst.mdp, &pi, EVAL_TOL)?;
                    let row = ResultRow {
                        experiment: ExperimentKind::SuccessRate,
                        environment: env.to_string(),
                        algorithm: alg.label(),
                        hyperparameters: alg.hyperparameters(),
                        n,
                        epsilon: None,
                        repeat: rep,
                        seed,
                        success: Criterion::NearOptimal.holds(value, inst.optimal, inst.behavior_value, tol),
                        policy_value: value,
                        optimal_value: inst.optimal,
                        behavior_value: inst.behavior_value,
                        success_tol: tol,
                        criterion: Criterion::NearOptimal,
                    };
                    let timing = timing_row(&row, elapsed_ms(start));
                    Ok((row, timing))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = RunOutput::default();
    results.into_iter().for_each(|r| out.extend(r));
    Ok(out)
}

fn timing_row(row: &ResultRow, runtime_ms: f64) -> TimingRow {
    TimingRow {
        environment: row.environment.clone(),
        algorithm: row.algorithm.clone(),
        n: row.n,
        epsilon: row.epsilon,
        repeat: row.repeat,
        runtime_ms,
    }
}

/// Value of a learner at one learning-curve checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub algorithm: String,
    pub hyperparameters: String,
    pub epsilon: f64,
    pub repeat: usize,
    pub seed: u64,
    pub iteration: usize,
    pub value: f64,
    pub coverage: Option<f64>,
}

/// Mean final return of MBS-QI per `(ε, b)` for the threshold ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub epsilon: f64,
    pub b: f64,
    pub runs: usize,
    pub mean_value: f64,
    pub std_value: f64,
    /// Highest mean at this `ε` (first in grid order on ties).
    pub best: bool,
}

#[derive(Debug, Clone, Default)]
pub struct CartPoleOutput {
    pub runs: RunOutput,
    pub curves: Vec<CurveRow>,
    pub ablation: Vec<AblationRow>,
    /// Spearman correlation between `ε` and the best `b` across the `ε`
    /// grid; NaN when either side is constant.
    pub ablation_trend: f64,
    /// Continuous return of the tabular optimum.
    pub calibration_return: f64,
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let k = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / k, ry.iter().sum::<f64>() / k);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    if vx == 0.0 || vy == 0.0 {
        return f64::NAN;
    }
    cov / (vx * vy).sqrt()
}

/// Cart-pole sweep: ε-greedy data around the tabular optimum, every learner
/// scored by continuous-simulator return, plus learning curves and the
/// MBS-QI threshold ablation.
pub fn run_cartpole(spec: &ExperimentSpec) -> Result<CartPoleOutput> {
    let spec = spec.resolved();
    spec.validate()?;
    let cp = spec.cartpole.clone().unwrap_or_default();
    let disc = &cp.discretization;
    let mdp = build_cartpole_mdp(disc, cp.jitter_samples, mix_seed(&[spec.seed, id_hash("cartpole-build")]))?;
    let eval_seed = mix_seed(&[spec.seed, id_hash("cartpole-eval")]);
    let (_, pi_star) = exact_value_iteration(&mdp, EVAL_TOL)?;
    let calibration_return = evaluate_policy(disc, &pi_star, cp.eval_episodes, eval_seed)?;
    if calibration_return < cp.calibration_floor {
        return Err(Error::Calibration { mean_return: calibration_return, floor: cp.calibration_floor });
    }
    let greedy: Vec<usize> = (0..mdp.num_states()).map(|s| pi_star.action(s).unwrap_or(0)).collect();
    let (ns, na, gamma) = (mdp.num_states(), mdp.num_actions(), mdp.gamma());
    let ablation_algs: Vec<AlgorithmSpec> = cp
        .ablation_b
        .iter()
        .map(|&b| AlgorithmSpec::new(AlgorithmId::MbsQi).with_threshold(Threshold::Fixed(b)))
        .collect();

    let mut tasks = Vec::new();
    for &eps in &spec.epsilons {
        for rep in 0..spec.repeats() {
            tasks.push((eps, rep));
        }
    }
    type TaskOut = (Vec<(ResultRow, TimingRow)>, Vec<CurveRow>, Vec<f64>);
    let results: Vec<TaskOut> = tasks
        .par_iter()
        .map(|&(eps, rep)| -> Result<TaskOut> {
            let behavior = Policy::epsilon_greedy(&greedy, na, eps)?;
            let behavior_value = evaluate_policy(disc, &behavior, cp.eval_episodes, eval_seed)?;
            let seed = mix_seed(&[spec.seed, id_hash("cartpole"), eps.to_bits(), rep as u64]);
            let ds = collect_dataset(disc, &behavior, cp.n, seed)?;
            let per_alg: Vec<((ResultRow, TimingRow), Vec<CurveRow>)> = spec
                .algorithms
                .par_iter()
                .map(|alg| {
                    let start = Instant::now();
                    let (pi, mut trace) = train(alg, &ds, ns, na, gamma, None, cp.curve_stride)?;
                    let value = evaluate_policy(disc, &pi, cp.eval_episodes, eval_seed)?;
                    let runtime = elapsed_ms(start);
                    let mut curve = Vec::new();
                    if cp.curve_stride > 0 {
                        trace.evaluate_with(|p| evaluate_policy(disc, p, cp.eval_episodes, eval_seed))?;
                        for c in &trace.checkpoints {
                            curve.push(CurveRow {
                                algorithm: alg.label(),
                                hyperparameters: alg.hyperparameters(),
                                epsilon: eps,
                                repeat: rep,
                                seed,
                                iteration: c.iteration,
                                value: c.value.unwrap_or(f64::NAN),
                                coverage: c.coverage,
                            });
                        }
                    }
                    let row = ResultRow {
                        experiment: ExperimentKind::Cartpole,
                        environment: "cartpole".into(),
                        algorithm: alg.label(),
                        hyperparameters: alg.hyperparameters(),
                        n: cp.n,
                        epsilon: Some(eps),
                        repeat: rep,
                        seed,
                        success: Criterion::NearOptimal.holds(
                            value,
                            calibration_return,
                            behavior_value,
                            cp.success_tol,
                        ),
                        policy_value: value,
                        optimal_value: calibration_return,
                        behavior_value,
                        success_tol: cp.success_tol,
                        criterion: Criterion::NearOptimal,
                    };
                    let timing = timing_row(&row, runtime);
                    Ok(((row, timing), curve))
                })
                .collect::<Result<_>>()?;
            let ablation: Vec<f64> = ablation_algs
                .par_iter()
                .map(|alg| {
                    let (pi, _) = train(alg, &ds, ns, na, gamma, None, 0)?;
                    evaluate_policy(disc, &pi, cp.eval_episodes, eval_seed)
                })
                .collect::<Result<_>>()?;
            let (rows, curves): (Vec<_>, Vec<_>) = per_alg.into_iter().unzip();
            Ok((rows, curves.into_iter().flatten().collect(), ablation))
        })
        .collect::<Result<_>>()?;

    let mut out = CartPoleOutput { calibration_return, ..Default::default() };
    let mut ablation_values: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::new(); cp.ablation_b.len()]; spec.epsilons.len()];
    for (&(eps, _), (rows, curves, abl)) in tasks.iter().zip(results) {
        out.runs.extend(rows);
        out.curves.extend(curves);
        let e = spec.epsilons.iter().position(|&x| x == eps).expect("epsilon from grid");
        for (j, v) in abl.into_iter().enumerate() {
            ablation_values[e][j].push(v);
        }
    }
    let mut best_b = Vec::new();
    for (e, &eps) in spec.epsilons.iter().enumerate() {
        let stats: Vec<(f64, f64)> = ablation_values[e]
            .iter()
            .map(|vs| {
                let k = vs.len().max(1) as f64;
                let m = vs.iter().sum::<f64>() / k;
                (m, (vs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / k).sqrt())
            })
            .collect();
        let best = stats
            .iter()
            .enumerate()
            .fold(None::<(usize, f64)>, |acc, (j, &(m, _))| match acc {
                Some((_, bm)) if bm >= m => acc,
                _ => Some((j, m)),
            })
            .map(|(j, _)| j);
        if let Some(j) = best {
            best_b.push((eps, cp.ablation_b[j]));
        }
        for (j, &(mean_value, std_value)) in stats.iter().enumerate() {
            out.ablation.push(AblationRow {
                epsilon: eps,
                b: cp.ablation_b[j],
                runs: ablation_values[e][j].len(),
                mean_value,
                std_value,
                best: best == Some(j),
            });
        }
    }
    let (eps, bs): (Vec<f64>, Vec<f64>) = best_b.into_iter().unzip();
    out.ablation_trend = if eps.len() >= 2 { spearman(&eps, &bs) } else { f64::NAN };
    Ok(out)
}

/// Safe improvement over a known behavior: random MDPs, i.i.d. occupancy
/// samples, MBS-PI with `b` tied to the smallest behavior occupancy.
pub fn run_safe_improve(spec: &ExperimentSpec) -> Result<RunOutput> {
    let spec = spec.resolved();
    spec.validate()?;
    let si = spec.safe_improve.clone().unwrap_or_default();
    let mut tasks = Vec::new();
    for inst in 0..spec.repeats() {
        for &n in &spec.sample_sizes {
            tasks.push((inst, n));
        }
    }
    let results: Vec<Vec<(ResultRow, TimingRow)>> = tasks
        .par_iter()
        .map(|&(inst, n)| {
            let inst_seed = mix_seed(&[spec.seed, id_hash("safe_improve"), inst as u64]);
            let mut rng = rng_from_seed(inst_seed);
            let mdp = random_mdp(&mut rng, si.states, si.actions, si.gamma)?;
            let behavior = random_policy(&mut rng, si.states, si.actions);
            let occ = occupancy(&mdp, &behavior, EVAL_TOL)?;
            let mu_min = occ.table().iter().copied().filter(|&m| m > 0.0).fold(f64::INFINITY, f64::min);
            let behavior_value = policy_value(&mdp, &behavior, EVAL_TOL)?;
            let (_, pi_star) = exact_value_iteration(&mdp, EVAL_TOL)?;
            let optimal = policy_value(&mdp, &pi_star, EVAL_TOL)?;
            let tol = si.slack_fraction * mdp.v_max();
            let seed = mix_seed(&[inst_seed, n as u64]);
            let ds = generate_dataset(&mdp, &behavior, n, SamplingMode::IidOccupancy, seed)?;
            spec.algorithms
                .iter()
                .map(|alg| {
                    let start = Instant::now();
                    let (pi, _) = train(alg, &ds, si.states, si.actions, si.gamma, Some(mu_min), 0)?;
                    let value = policy_value(&mdp, &pi, EVAL_TOL)?;
                    let row = ResultRow {
                        experiment: ExperimentKind::SafeImprove,
                        environment: format!("random_{}x{}", si.states, si.actions),
                        algorithm: alg.label(),
                        hyperparameters: alg.hyperparameters(),
                        n,
                        epsilon: None,
                        repeat: inst,
                        seed,
                        success: Criterion::SafeImprovement.holds(value, optimal, behavior_value, tol),
                        policy_value: value,
                        optimal_value: optimal,
                        behavior_value,
                        success_tol: tol,
                        criterion: Criterion::SafeImprovement,
                    };
                    let timing = timing_row(&row, elapsed_ms(start));
                    Ok((row, timing))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = RunOutput::default();
    results.into_iter().for_each(|r| out.extend(r));
    out.rows.sort_by_key(|r| (r.n, r.repeat));
    out.timings.sort_by_key(|t| (t.n, t.repeat));
    Ok(out)
}

/// Runs the property-check suite configured in the spec.
pub fn run_verify_theory(spec: &ExperimentSpec) -> Result<Vec<CaseReport>> {
    let spec = spec.resolved();
    run_suite(&spec.theory.clone().unwrap_or_default(), spec.seed)
}
