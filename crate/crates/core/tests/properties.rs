use proptest::prelude::*;
use rmg_core::game::{nominal_policy_eval, random_game, random_policy, RandomGameConfig};
use rmg_core::linalg::NormOrder;
use rmg_core::planner::{rne_gap, robust_policy_eval, robust_stage_q};
use rmg_core::reward::{support_interval, support_opnorm_ball};
use rmg_core::transition::{sa_dual_chi2, sa_dual_kl, sa_dual_tv, sa_dual_wasserstein, DualResult};

mod common;

fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn order() -> impl Strategy<Value = NormOrder> {
    prop_oneof![Just(NormOrder::ONE), Just(NormOrder(1.5)), Just(NormOrder::TWO), Just(NormOrder(4.0)), Just(NormOrder::INF)]
}

fn line(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| (i as f64 - j as f64).abs() * 0.5).collect()).collect()
}

fn dual(family: usize, pbar: &[f64], v: &[f64], beta: f64) -> DualResult {
    match family {
        0 => sa_dual_tv(pbar, v, beta),
        1 => sa_dual_kl(pbar, v, beta),
        2 => sa_dual_chi2(pbar, v, beta),
        _ => sa_dual_wasserstein(pbar, v, beta, &line(pbar.len())),
    }
    .unwrap()
}

fn transition_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..7).prop_flat_map(|n| (dist(n), prop::collection::vec(-3.0f64..3.0, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn interval_support_is_homogeneous(
        (lo, hi, y) in (1usize..10).prop_flat_map(|n| (
            prop::collection::vec(-2.0f64..0.0, n),
            prop::collection::vec(0.0f64..2.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
        )),
        t in 0.0f64..10.0,
    ) {
        let base = support_interval(&lo, &hi, &y).unwrap();
        let ty: Vec<f64> = y.iter().map(|v| v * t).collect();
        prop_assert!((support_interval(&lo, &hi, &ty).unwrap() - t * base).abs() <= 1e-10 * (1.0 + t * base.abs()));
        prop_assert_eq!(support_interval(&lo, &hi, &vec![0.0; y.len()]).unwrap(), 0.0);
    }

    #[test]
    fn interval_support_dominates_members(
        (lo, hi, y, w) in (1usize..8).prop_flat_map(|n| (
            prop::collection::vec(-2.0f64..0.0, n),
            prop::collection::vec(0.0f64..2.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
        )),
    ) {
        let member: f64 = (0..y.len()).map(|k| (lo[k] + w[k] * (hi[k] - lo[k])) * y[k]).sum();
        prop_assert!(member <= support_interval(&lo, &hi, &y).unwrap() + 1e-9);
    }

    #[test]
    fn opnorm_support_is_homogeneous(
        x in dist(3), y in dist(4), p in order(), q in order(), alpha in 0.0f64..3.0, t in 0.0f64..10.0,
    ) {
        let base = support_opnorm_ball(alpha, p, q, &x, &y).unwrap();
        let tx: Vec<f64> = x.iter().map(|v| v * t).collect();
        let scaled = support_opnorm_ball(alpha, p, q, &tx, &y).unwrap();
        prop_assert!((scaled - t * base).abs() <= 1e-10 * (1.0 + t * base));
        prop_assert_eq!(support_opnorm_ball(alpha, p, q, &[0.0; 3], &y).unwrap(), 0.0);
    }

    #[test]
    fn dual_values_are_sandwiched_and_monotone(
        (pbar, v) in transition_case(), family in 0usize..4, b1 in 0.0f64..1.5, b2 in 0.0f64..1.5,
    ) {
        let (lo_b, hi_b) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let nominal: f64 = -pbar.iter().zip(&v).map(|(p, x)| p * x).sum::<f64>();
        let ceiling = -v.iter().cloned().fold(f64::INFINITY, f64::min);
        let small = dual(family, &pbar, &v, lo_b).value;
        let large = dual(family, &pbar, &v, hi_b).value;
        prop_assert!(small >= nominal - 1e-10);
        prop_assert!(large <= ceiling + 1e-10);
        prop_assert!(small <= large + 1e-10, "{} > {}", small, large);
    }

    #[test]
    fn dual_values_shift_with_the_value_vector(
        (pbar, v) in transition_case(), family in 0usize..4, beta in 0.0f64..1.5, c in -5.0f64..5.0,
    ) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let d = dual(family, &pbar, &shifted, beta).value - dual(family, &pbar, &v, beta).value;
        prop_assert!((d + c).abs() <= 1e-10, "{}", d + c);
    }

    #[test]
    fn worst_case_distributions_are_feasible_and_attain(
        (pbar, v) in transition_case(), family in 0usize..3, beta in 0.0f64..1.5,
    ) {
        let d = dual(family, &pbar, &v, beta);
        let total: f64 = d.worst.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-8);
        prop_assert!(d.worst.iter().all(|p| *p >= -1e-12));
        let obj: f64 = -d.worst.iter().zip(&v).map(|(p, x)| p * x).sum::<f64>();
        prop_assert!((obj - d.value).abs() <= 1e-8, "{} vs {}", obj, d.value);
        let dist = match family {
            0 => 0.5 * d.worst.iter().zip(&pbar).map(|(p, q)| (p - q).abs()).sum::<f64>(),
            1 => d.worst.iter().zip(&pbar).filter(|(p, _)| **p > 0.0).map(|(p, q)| p * (p / q).ln()).sum(),
            _ => d.worst.iter().zip(&pbar).map(|(p, q)| (p - q) * (p - q) / q).sum(),
        };
        prop_assert!(dist <= beta + 1e-8, "divergence {} > {}", dist, beta);
    }

    #[test]
    fn duals_dominate_sampled_members(
        (pbar, v) in transition_case(), family in 0usize..3, beta in 0.0f64..1.5, (w, s) in (dist(6), 0.0f64..1.0),
    ) {
        // Candidate on the segment from the nominal towards a random distribution, kept if feasible.
        let n = pbar.len();
        let w: Vec<f64> = { let t: f64 = w[..n].iter().sum(); w[..n].iter().map(|x| x / t).collect() };
        let p: Vec<f64> = pbar.iter().zip(&w).map(|(a, b)| a + s * (b - a)).collect();
        let div = match family {
            0 => 0.5 * p.iter().zip(&pbar).map(|(a, b)| (a - b).abs()).sum::<f64>(),
            1 => p.iter().zip(&pbar).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum(),
            _ => p.iter().zip(&pbar).map(|(a, b)| (a - b) * (a - b) / b).sum(),
        };
        prop_assume!(div <= beta);
        let obj: f64 = -p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!(obj <= dual(family, &pbar, &v, beta).value + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nominal_eval_is_linear_in_rewards(seed in 0u64..10_000, c in -3.0f64..3.0) {
        let g1 = random_game(&RandomGameConfig::two_player(3, 2, 3, false, seed)).unwrap();
        let g2 = random_game(&RandomGameConfig::two_player(3, 2, 3, false, seed + 1)).unwrap();
        let mut spec = g1.spec().clone();
        for (r, q) in spec.rewards.iter_mut().flatten().flatten().flatten().zip(g2.rewards.iter().flatten().flatten().flatten()) {
            *r += c * q;
        }
        let mut spec2 = g1.spec().clone();
        spec2.rewards = g2.rewards.clone();
        let mixed = spec.validate().unwrap();
        let other = spec2.validate().unwrap();
        let pol = random_policy(&g1, seed, false);
        let (a, b, m) = (
            nominal_policy_eval(&g1, &pol).unwrap(),
            nominal_policy_eval(&other, &pol).unwrap(),
            nominal_policy_eval(&mixed, &pol).unwrap(),
        );
        for i in 0..2 {
            for h in 0..3 {
                for s in 0..3 {
                    prop_assert!((m.v[i][h][s] - a.v[i][h][s] - c * b.v[i][h][s]).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_sum_values_cancel(seed in 0u64..10_000) {
        let g = random_game(&RandomGameConfig::two_player(3, 3, 4, true, seed)).unwrap();
        let v = nominal_policy_eval(&g, &random_policy(&g, seed, false)).unwrap();
        for h in 0..4 {
            for s in 0..3 {
                prop_assert!((v.v[0][h][s] + v.v[1][h][s]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn robust_values_respect_bellman_and_nominal(family in 0usize..9, seed in 0u64..10_000) {
        let names = ["interval", "opnorm_ball", "pnorm_own", "transition_ball", "sa_tv", "sa_kl", "sa_chi2", "sa_wasserstein", "shannon"];
        let inst = common::random_instance(names[family], seed);
        let g = &inst.game;
        let pol = random_policy(g, seed, false);
        let robust = robust_policy_eval(&inst, &pol).unwrap();
        let tol = 1e-10;
        for h in 0..g.horizon {
            for s in 0..g.states {
                let q = robust_stage_q(&inst, Some(&robust), h, s, &pol.dists(h, s)).unwrap();
                for i in 0..2 {
                    prop_assert!((q[i] - robust.v[i][h][s]).abs() <= tol);
                }
            }
        }
        if names[family] != "shannon" {
            let nominal = nominal_policy_eval(g, &pol).unwrap();
            for (r, n) in robust.v.iter().flatten().flatten().zip(nominal.v.iter().flatten().flatten()) {
                prop_assert!(*r <= n + 1e-10);
            }
        }
    }

    #[test]
    fn gap_entries_are_non_negative(family in 0usize..4, seed in 0u64..10_000) {
        // s-rectangular transition balls are excluded; see `ball_best_response_can_trail_the_policy`.
        let names = ["interval", "shannon", "sa_tv", "sa_kl"];
        let inst = common::random_instance(names[family], seed);
        let rep = rne_gap(&inst, &random_policy(&inst.game, seed, false), 1e-9).unwrap();
        let low = rep.gaps.iter().flatten().flatten().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(low >= -1e-8, "{} {}", names[family], low);
    }
}
