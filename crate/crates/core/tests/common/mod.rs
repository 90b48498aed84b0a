#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmg_core::game::{random_distribution, random_game, RandomGameConfig};
use rmg_core::linalg::NormOrder;
use rmg_core::planner::RmgInstance;
use rmg_core::reward::{Kernel, RewardSet};
use rmg_core::transition::TransitionSet;

pub const REWARD_FAMILIES: [&str; 6] = ["interval", "opnorm_ball", "shannon", "kl_reference", "tsallis", "pnorm_own"];
pub const TRANSITION_FAMILIES: [&str; 5] = ["transition_ball", "sa_tv", "sa_kl", "sa_chi2", "sa_wasserstein"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn norm_order(r: &mut ChaCha8Rng) -> NormOrder {
    [NormOrder::ONE, NormOrder(1.5), NormOrder::TWO, NormOrder(3.0), NormOrder::INF][r.random_range(0..5)]
}

fn reward_set(family: &str, r: &mut ChaCha8Rng, actions: &[usize], player: usize) -> RewardSet {
    let joint: usize = actions.iter().product();
    match family {
        "interval" => RewardSet::Interval {
            lo: (0..joint).map(|_| -r.random::<f64>()).collect(),
            hi: (0..joint).map(|_| r.random::<f64>()).collect(),
        },
        "opnorm_ball" => RewardSet::OpnormBall { alpha: r.random(), p: norm_order(r), q: norm_order(r) },
        "pnorm_own" => RewardSet::OpnormBall { alpha: r.random(), p: norm_order(r), q: NormOrder::ONE },
        "shannon" => RewardSet::KernelPolicyDependent { kernel: Kernel::Shannon, tau: r.random() },
        "kl_reference" => RewardSet::KernelPolicyDependent {
            kernel: Kernel::KlReference { reference: random_distribution(r, actions[player]) },
            tau: r.random(),
        },
        "tsallis" => RewardSet::KernelPolicyDependent { kernel: Kernel::Tsallis, tau: r.random() },
        _ => RewardSet::Singleton,
    }
}

fn transition_set(family: &str, r: &mut ChaCha8Rng, states: usize, joint: usize) -> TransitionSet {
    let radii = |r: &mut ChaCha8Rng, max: f64| (0..joint).map(|_| max * r.random::<f64>()).collect::<Vec<f64>>();
    match family {
        "transition_ball" => TransitionSet::OpnormBall { beta: 0.5 * r.random::<f64>(), p: norm_order(r), q: norm_order(r) },
        "sa_tv" => TransitionSet::SaTv { beta: radii(r, 1.0) },
        "sa_kl" => TransitionSet::SaKl { beta: radii(r, 2.0) },
        "sa_chi2" => TransitionSet::SaChi2 { beta: radii(r, 2.0) },
        "sa_wasserstein" => TransitionSet::SaWasserstein { beta: radii(r, 1.0), metric: line_metric(r, states) },
        _ => TransitionSet::Singleton,
    }
}

/// Metric `|x_i - x_j|` for random points on a line.
pub fn line_metric(r: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let x: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 2.0).collect();
    (0..n).map(|i| (0..n).map(|j| (x[i] - x[j]).abs()).collect()).collect()
}

/// Random two-player instance (|S| <= 4, |A_i| <= 5, H <= 4) whose reward or transition sets all
/// belong to `family`.
pub fn random_instance(family: &str, seed: u64) -> RmgInstance {
    let mut r = rng(seed ^ 0x5eed_0000);
    let transition = TRANSITION_FAMILIES.contains(&family);
    let states = r.random_range(1..=4);
    let actions = vec![r.random_range(2..=5), r.random_range(2..=5)];
    let horizon = if transition { r.random_range(2..=4) } else { r.random_range(1..=4) };
    let cfg = RandomGameConfig {
        players: 2,
        states,
        actions: actions.clone(),
        horizon,
        reward_range: (-1.0, 1.0),
        zero_sum: false,
        seed,
    };
    let game = random_game(&cfg).unwrap();
    let joint: usize = actions.iter().product();
    let mut reward = vec![vec![vec![RewardSet::Singleton; states]; horizon]; 2];
    let mut trans = vec![vec![TransitionSet::Singleton; states]; horizon - 1];
    if transition {
        for row in trans.iter_mut() {
            for set in row.iter_mut() {
                *set = transition_set(family, &mut r, states, joint);
            }
        }
    } else {
        for (i, ri) in reward.iter_mut().enumerate() {
            for row in ri.iter_mut() {
                for set in row.iter_mut() {
                    *set = reward_set(family, &mut r, &actions, i);
                }
            }
        }
    }
    RmgInstance::new(game, reward, trans, false).unwrap()
}

/// Zero-sum decomposable instance with the same own-policy set at every slot.
pub fn tpzs_instance(states: usize, actions: usize, horizon: usize, set: RewardSet, seed: u64) -> RmgInstance {
    let game = random_game(&RandomGameConfig::two_player(states, actions, horizon, true, seed)).unwrap();
    let mut inst = RmgInstance::nominal(game).with_reward_sets(|_, _, _| set.clone()).unwrap();
    inst.decomposable = true;
    inst.validate().unwrap();
    inst
}
