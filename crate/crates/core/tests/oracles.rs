//! Independent oracles: dense linear solves, brute-force policy search,
//! Monte Carlo returns and direct recounts from raw transitions.

use nalgebra::{DMatrix, DVector};

use mbs_core::algo::{constrained_eval_backup, constrained_opt_backup, EmpiricalModel};
use mbs_core::data::{
    build_filter, estimate_density, filter_diagnostics, generate_dataset, SamplingMode, SupportFilter,
};
use mbs_core::env::{random_mdp, random_policy, RandomInstance};
use mbs_core::mdp::{exact_policy_evaluation, exact_value_iteration, occupancy, policy_value, rollout};
use mbs_core::rng::rng_from_seed;
use mbs_core::theory::{augment, constrained_eval_exact, project_policy};
use mbs_core::{Policy, QTable, TabularMdp};

/// Solves `Q = r + γ P Π_w Q` where `Π_w[(s',a')] = π(a'|s') w(s',a')`.
fn solve_q(mdp: &TabularMdp, pi: &Policy, weight: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let (ns, na, g) = (mdp.num_states(), mdp.num_actions(), mdp.gamma());
    let k = ns * na;
    let mut m = DMatrix::<f64>::identity(k, k);
    let mut r = DVector::<f64>::zeros(k);
    for s in 0..ns {
        for a in 0..na {
            let i = s * na + a;
            r[i] = mdp.reward_mean(s, a);
            for &(t, p) in mdp.next(s, a) {
                for b in 0..na {
                    m[(i, t * na + b)] -= g * p * pi.prob(t, b) * weight(t, b);
                }
            }
        }
    }
    m.lu().solve(&r).expect("I - γPΠ is invertible").iter().copied().collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn policy_evaluation_matches_linear_solve() {
    for seed in 0..40 {
        let x = RandomInstance::generate(seed, 7, 3).unwrap();
        let q = exact_policy_evaluation(&x.mdp, &x.policy, 1e-12).unwrap();
        let oracle = solve_q(&x.mdp, &x.policy, |_, _| 1.0);
        assert!(max_diff(q.values(), &oracle) <= 1e-9 * x.mdp.v_max(), "seed {seed}");
    }
}

#[test]
fn constrained_fixed_point_matches_linear_solve() {
    for seed in 0..40 {
        let x = RandomInstance::generate(seed + 1000, 8, 3).unwrap();
        let (mdp, pi, z) = (&x.mdp, &x.policy, &x.filter);
        let oracle = solve_q(mdp, pi, |s, a| z.zeta(s, a));
        // fixed point of the constrained operator by iteration
        let mut f = QTable::zeros(mdp.num_states(), mdp.num_actions());
        for _ in 0..20_000 {
            let next = constrained_eval_exact(mdp, pi, z, &f);
            let d = next.max_abs_diff(&f);
            f = next;
            if d < 1e-14 {
                break;
            }
        }
        assert!(max_diff(f.values(), &oracle) <= 1e-8, "seed {seed}");
        // and the projected policy evaluated in the augmented MDP
        let aug = augment(mdp).unwrap();
        let proj = project_policy(&aug.lift_policy(pi).unwrap(), &aug.extend_filter(z).unwrap()).unwrap();
        let q_aug = solve_q(&aug.mdp, &proj, |_, _| 1.0);
        let na = mdp.num_actions();
        for s in 0..mdp.num_states() {
            for a in 0..na {
                let got = q_aug[s * (na + 1) + a];
                assert!((got - oracle[s * na + a]).abs() <= 1e-8, "seed {seed} ({s},{a})");
            }
        }
    }
}

fn all_deterministic(ns: usize, na: usize) -> impl Iterator<Item = Policy> {
    let total = na.pow(ns as u32);
    (0..total).map(move |mut code| {
        let actions = (0..ns)
            .map(|_| {
                let a = code % na;
                code /= na;
                a
            })
            .collect();
        Policy::deterministic(actions, na).unwrap()
    })
}

#[test]
fn value_iteration_matches_brute_force() {
    for seed in 0..25 {
        let mut rng = rng_from_seed(seed);
        let gamma = [0.5, 0.9, 0.95][seed as usize % 3];
        let mdp = random_mdp(&mut rng, 4, 3, gamma).unwrap();
        let (q, pi) = exact_value_iteration(&mdp, 1e-12).unwrap();
        let v_vi = policy_value(&mdp, &pi, 1e-12).unwrap();
        let best = all_deterministic(4, 3)
            .map(|p| {
                let q = solve_q(&mdp, &p, |_, _| 1.0);
                (0..4).map(|s| mdp.initial()[s] * q[s * 3 + p.action(s).unwrap()]).sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((v_vi - best).abs() <= 1e-9, "seed {seed}: {v_vi} vs {best}");
        // Q* dominates every deterministic policy's Q entrywise
        for p in all_deterministic(4, 3).step_by(7) {
            let qp = solve_q(&mdp, &p, |_, _| 1.0);
            assert!(q.values().iter().zip(&qp).all(|(a, b)| *a >= b - 1e-9));
        }
    }
}

#[test]
fn policy_value_matches_monte_carlo() {
    let mut rng = rng_from_seed(5);
    let mdp = random_mdp(&mut rng, 6, 2, 0.8).unwrap();
    let pi = random_policy(&mut rng, 6, 2);
    let exact = policy_value(&mdp, &pi, 1e-12).unwrap();
    let episodes = 20_000;
    let horizon = 120; // 0.8^120 < 1e-11
    let returns: Vec<f64> = (0..episodes)
        .map(|_| {
            rollout(&mdp, &pi, horizon, &mut rng)
                .iter()
                .enumerate()
                .map(|(t, tr)| 0.8f64.powi(t as i32) * tr.r)
                .sum()
        })
        .collect();
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (episodes - 1) as f64;
    let se = (var / episodes as f64).sqrt();
    assert!((mean - exact).abs() <= 4.0 * se, "MC {mean} ± {se} vs exact {exact}");
}

#[test]
fn empirical_backups_match_recount() {
    let mut rng = rng_from_seed(17);
    let mdp = random_mdp(&mut rng, 6, 3, 0.9).unwrap();
    let mu = random_policy(&mut rng, 6, 3);
    let pi = random_policy(&mut rng, 6, 3);
    let ds = generate_dataset(&mdp, &mu, 400, SamplingMode::IidOccupancy, 2).unwrap();
    let density = estimate_density(&ds, 6, 3).unwrap();
    let z = build_filter(&density, 0.04).unwrap();
    let model = EmpiricalModel::new(&ds, 6, 3, 0.9).unwrap();
    let f = QTable::from_vec(6, 3, (0..18).map(|i| (i * 7 % 11) as f64 / 3.0).collect());

    let opt = constrained_opt_backup(&model, &f, &z);
    let eval = constrained_eval_backup(&model, &f, &pi, &z);
    for s in 0..6 {
        for a in 0..3 {
            let ts: Vec<_> = ds.transitions().iter().filter(|t| t.s == s && t.a == a).collect();
            if ts.is_empty() {
                assert_eq!(opt.get(s, a), 0.0);
                assert_eq!(eval.get(s, a), 0.0);
                continue;
            }
            let k = ts.len() as f64;
            let v_opt = |t: usize| {
                (0..3).filter(|&b| z.supported(t, b)).map(|b| f.get(t, b)).fold(0.0, f64::max)
            };
            let v_eval = |t: usize| (0..3).map(|b| pi.prob(t, b) * z.zeta(t, b) * f.get(t, b)).sum::<f64>();
            let want_opt: f64 = ts.iter().map(|t| t.r + 0.9 * v_opt(t.s_next)).sum::<f64>() / k;
            let want_eval: f64 = ts.iter().map(|t| t.r + 0.9 * v_eval(t.s_next)).sum::<f64>() / k;
            assert!((opt.get(s, a) - want_opt).abs() < 1e-12);
            assert!((eval.get(s, a) - want_eval).abs() < 1e-12);
        }
    }
}

#[test]
fn filter_diagnostics_match_recount() {
    let mut rng = rng_from_seed(23);
    let mdp = random_mdp(&mut rng, 5, 3, 0.9).unwrap();
    let mu = random_policy(&mut rng, 5, 3);
    let ds = generate_dataset(&mdp, &mu, 300, SamplingMode::IidOccupancy, 9).unwrap();
    let density = estimate_density(&ds, 5, 3).unwrap();
    let z = build_filter(&density, 0.05).unwrap();
    let pi = Policy::deterministic(vec![0, 1, 2, 0, 1], 3).unwrap();
    let d = filter_diagnostics(&z, &ds, &pi).unwrap();
    let n = ds.len() as f64;
    let on = ds.transitions().iter().filter(|t| z.supported(t.s, pi.action(t.s).unwrap())).count();
    let inside = ds.transitions().iter().filter(|t| density.joint(t.s, t.a) >= 0.05).count();
    let size = (0..5).flat_map(|s| (0..3).map(move |a| (s, a))).filter(|&(s, a)| z.supported(s, a)).count();
    assert_eq!(d.mean_policy_support, on as f64 / n);
    assert_eq!(d.data_fraction_in_support, inside as f64 / n);
    assert_eq!(d.support_size, size);
}

#[test]
fn density_matches_occupancy_and_transitions_concentrate() {
    let mut rng = rng_from_seed(31);
    let (ns, na) = (5, 2);
    let mdp = random_mdp(&mut rng, ns, na, 0.9).unwrap();
    let mu = random_policy(&mut rng, ns, na);
    let n = 200_000;
    let ds = generate_dataset(&mdp, &mu, n, SamplingMode::IidOccupancy, 4).unwrap();
    let density = estimate_density(&ds, ns, na).unwrap();
    let occ = occupancy(&mdp, &mu, 1e-12).unwrap();
    for s in 0..ns {
        for a in 0..na {
            let p = occ.get(s, a);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((density.joint(s, a) - p).abs() <= 5.0 * se + 1e-12, "({s},{a})");
        }
    }
    // L1 deviation of each empirical next-state row (Weissman et al. bound,
    // δ = 1e-6 per pair)
    let model = EmpiricalModel::new(&ds, ns, na, 0.9).unwrap();
    for s in 0..ns {
        for a in 0..na {
            let k = model.count(s, a) as f64;
            if k == 0.0 {
                continue;
            }
            let mut p_hat = vec![0.0; ns];
            for (t, w) in model.next(s, a) {
                p_hat[t] += w;
            }
            let mut p = vec![0.0; ns];
            for &(t, q) in mdp.next(s, a) {
                p[t] += q;
            }
            let l1: f64 = p.iter().zip(&p_hat).map(|(x, y)| (x - y).abs()).sum();
            let bound = (2.0 * (ns as f64 * 2f64.ln() + 1e6f64.ln()) / k).sqrt();
            assert!(l1 <= bound, "({s},{a}) l1 {l1} > {bound}");
        }
    }
}

#[test]
fn dirichlet_rows_are_uniform_on_average() {
    let mut rng = rng_from_seed(3);
    let (ns, na, reps) = (4, 2, 3000);
    let mut mean = vec![0.0; ns];
    for _ in 0..reps {
        let mdp = random_mdp(&mut rng, ns, na, 0.9).unwrap();
        for &(t, p) in mdp.next(0, 0) {
            mean[t] += p / reps as f64;
        }
    }
    // Dirichlet(1,1,1,1) marginals are Beta(1,3): sd = sqrt(3/80)
    let se = (3.0f64 / 80.0).sqrt() / (reps as f64).sqrt();
    for m in mean {
        assert!((m - 0.25).abs() <= 5.0 * se, "{m}");
    }
}

#[test]
fn supported_filter_includes_threshold_exactly() {
    let joint = vec![0.1, 0.2, 0.3, 0.4];
    let z = SupportFilter::from_joint(&joint, 2, 2, 0.3).unwrap();
    assert_eq!(z.indicator(), &[false, false, true, true]);
}
