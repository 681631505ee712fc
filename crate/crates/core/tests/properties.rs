use proptest::prelude::*;

use mbs_core::algo::{
    api, constrained_eval_backup, constrained_opt_backup, fqi, mbs_pi, mbs_qi, AlgorithmConfig, EmpiricalModel,
};
use mbs_core::data::{build_filter, estimate_density, generate_dataset, Dataset, SamplingMode, SupportFilter};
use mbs_core::env::{random_filter, random_mdp, random_policy};
use mbs_core::mdp::{exact_value_iteration, policy_value};
use mbs_core::rng::rng_from_seed;
use mbs_core::{Policy, QTable, TabularMdp};

struct Case {
    mdp: TabularMdp,
    ds: Dataset,
    pi: Policy,
    filter: SupportFilter,
}

fn case(seed: u64, ns: usize, na: usize, n: usize) -> Case {
    let mut rng = rng_from_seed(seed);
    let mdp = random_mdp(&mut rng, ns, na, 0.9).unwrap();
    let mu = random_policy(&mut rng, ns, na);
    let pi = random_policy(&mut rng, ns, na);
    let filter = random_filter(&mut rng, ns, na, 0.6);
    let ds = generate_dataset(&mdp, &mu, n, SamplingMode::IidOccupancy, seed ^ 0xabc).unwrap();
    Case { mdp, ds, pi, filter }
}

fn table(seed: u64, ns: usize, na: usize, scale: f64) -> QTable {
    let mut rng = rng_from_seed(seed);
    let p = random_policy(&mut rng, ns, na * 2);
    QTable::from_vec(ns, na, p.to_table().iter().take(ns * na).map(|x| x * scale).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constrained_backups_are_contractions(seed in 0u64..10_000, ns in 2usize..8, na in 2usize..4, n in 1usize..300) {
        let c = case(seed, ns, na, n);
        let m = EmpiricalModel::new(&c.ds, ns, na, 0.9).unwrap();
        let (f, g) = (table(seed + 1, ns, na, 10.0), table(seed + 2, ns, na, 10.0));
        let d = f.max_abs_diff(&g);
        let opt = constrained_opt_backup(&m, &f, &c.filter).max_abs_diff(&constrained_opt_backup(&m, &g, &c.filter));
        let ev = constrained_eval_backup(&m, &f, &c.pi, &c.filter)
            .max_abs_diff(&constrained_eval_backup(&m, &g, &c.pi, &c.filter));
        prop_assert!(opt <= 0.9 * d + 1e-12);
        prop_assert!(ev <= 0.9 * d + 1e-12);
    }

    #[test]
    fn support_shrinks_as_threshold_grows(seed in 0u64..10_000, n in 1usize..500, b1 in 0.0f64..0.3, db in 0.0f64..0.3) {
        let c = case(seed, 5, 3, n);
        let d = estimate_density(&c.ds, 5, 3).unwrap();
        let lo = build_filter(&d, b1).unwrap();
        let hi = build_filter(&d, b1 + db).unwrap();
        prop_assert!(lo.indicator().iter().zip(hi.indicator()).all(|(l, h)| *l || !*h));
        prop_assert!(hi.support_size() <= lo.support_size());
    }

    #[test]
    fn full_support_reduces_to_unconstrained(seed in 0u64..10_000, ns in 2usize..7, na in 2usize..4, n in 1usize..200) {
        let c = case(seed, ns, na, n);
        let m = EmpiricalModel::new(&c.ds, ns, na, 0.9).unwrap();
        let all = SupportFilter::all(ns, na);
        let qi = AlgorithmConfig { iters: 30, keep_tables: true, ..Default::default() };
        let (p1, t1) = mbs_qi(&m, &all, &qi).unwrap();
        let (p2, t2) = fqi(&m, &qi).unwrap();
        prop_assert_eq!(&t1.tables, &t2.tables);
        prop_assert_eq!(p1, p2);
        let pi = AlgorithmConfig { iters: 4, inner_iters: 10, keep_tables: true, ..Default::default() };
        let (p1, t1) = mbs_pi(&m, &all, &pi).unwrap();
        let (p2, t2) = api(&m, &pi).unwrap();
        prop_assert_eq!(&t1.tables, &t2.tables);
        prop_assert_eq!(p1, p2);
    }

    #[test]
    fn q_iterates_stay_in_value_range(seed in 0u64..10_000, n in 1usize..400, b in 0.0f64..0.2) {
        let c = case(seed, 6, 3, n);
        let d = estimate_density(&c.ds, 6, 3).unwrap();
        let z = build_filter(&d, b).unwrap();
        let m = EmpiricalModel::new(&c.ds, 6, 3, 0.9).unwrap();
        let cfg = AlgorithmConfig { iters: 60, keep_tables: true, ..Default::default() };
        let (_, t) = mbs_qi(&m, &z, &cfg).unwrap();
        let v_max = c.mdp.v_max();
        for f in &t.tables {
            prop_assert!(f.values().iter().all(|&x| (0.0..=v_max + 1e-9).contains(&x)));
        }
    }

    #[test]
    fn mbs_qi_only_picks_supported_actions(seed in 0u64..10_000, n in 1usize..400, b in 0.0f64..0.2) {
        let c = case(seed, 6, 3, n);
        let d = estimate_density(&c.ds, 6, 3).unwrap();
        let z = build_filter(&d, b).unwrap();
        let m = EmpiricalModel::new(&c.ds, 6, 3, 0.9).unwrap();
        let (pi, _) = mbs_qi(&m, &z, &AlgorithmConfig { iters: 50, ..Default::default() }).unwrap();
        for s in 0..6 {
            let a = pi.action(s).unwrap();
            if z.any_supported(s) {
                prop_assert!(z.supported(s, a));
            } else {
                prop_assert_eq!(a, 0);
            }
        }
    }

    #[test]
    fn value_iteration_is_permutation_invariant(seed in 0u64..10_000, ns in 2usize..7) {
        let mut rng = rng_from_seed(seed);
        let mdp = random_mdp(&mut rng, ns, 2, 0.9).unwrap();
        let perm: Vec<usize> = (0..ns).map(|s| (s + 1 + seed as usize) % ns).collect();
        let permuted = mdp.permute_states(&perm).unwrap();
        let (q, pi) = exact_value_iteration(&mdp, 1e-12).unwrap();
        let (qp, pip) = exact_value_iteration(&permuted, 1e-12).unwrap();
        for s in 0..ns {
            for a in 0..2 {
                prop_assert!((q.get(s, a) - qp.get(perm[s], a)).abs() <= 1e-9);
            }
        }
        let v = policy_value(&mdp, &pi, 1e-12).unwrap();
        let vp = policy_value(&permuted, &pip, 1e-12).unwrap();
        prop_assert!((v - vp).abs() <= 1e-9);
    }

    #[test]
    fn learned_values_never_exceed_optimum(seed in 0u64..10_000, n in 1usize..600) {
        let c = case(seed, 5, 2, n);
        let d = estimate_density(&c.ds, 5, 2).unwrap();
        let z = build_filter(&d, 5.0 / n as f64).unwrap();
        let m = EmpiricalModel::new(&c.ds, 5, 2, 0.9).unwrap();
        let (_, star) = exact_value_iteration(&c.mdp, 1e-12).unwrap();
        let v_star = policy_value(&c.mdp, &star, 1e-12).unwrap();
        let (pi, _) = mbs_pi(&m, &z, &AlgorithmConfig { iters: 5, inner_iters: 40, ..Default::default() }).unwrap();
        prop_assert!(policy_value(&c.mdp, &pi, 1e-12).unwrap() <= v_star + 1e-9);
    }
}
