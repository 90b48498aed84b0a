//! Reductions from two-player general-sum normal-form games to robust zero-sum Markov games.
//!
//! Both constructions preserve the equilibrium gap exactly: for every mixed profile `(x, y)` the
//! robust Nash gap of the instance equals the Nash gap of `(A, B)`.

use serde::{Deserialize, Serialize};

use crate::error::{dim, Result};
use crate::game::{random_distribution, rng, GameSpec, Policy};
use crate::linalg::{uniform, Mat};
use crate::planner::{rne_gap, RmgInstance};
use crate::reward::RewardSet;
use crate::transition::TransitionSet;

/// Two-player normal-form game; `a` pays the row player, `b` the column player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bimatrix {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl Bimatrix {
    pub fn matrices(&self) -> Result<(Mat, Mat)> {
        let a = Mat::from_rows(&self.a)?;
        let b = Mat::from_rows(&self.b)?;
        if a.rows != b.rows || a.cols != b.cols {
            return Err(dim("payoff matrices differ in shape"));
        }
        if a.data.iter().chain(&b.data).any(|v| !v.is_finite()) {
            return Err(crate::error::param("payoff matrices must be finite"));
        }
        Ok((a, b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Reward,
    Transition,
}

/// `[max_i (A y)_i - xᵀ A y] + [max_j (xᵀ B)_j - xᵀ B y]`.
pub fn gensum_ne_gap(a: &Mat, b: &Mat, x: &[f64], y: &[f64]) -> f64 {
    let ay = a.mul_vec(y);
    let xb = b.tmul_vec(x);
    let va: f64 = x.iter().zip(&ay).map(|(p, q)| p * q).sum();
    let vb: f64 = xb.iter().zip(y).map(|(p, q)| p * q).sum();
    let ma = ay.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mb = xb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (ma - va) + (mb - vb)
}

/// Shifts both matrices by `max(A + B) / 2` when positive, so that `A + B <= 0` entrywise.
/// A common constant shift leaves every Nash gap unchanged.
fn normalize(a: &Mat, b: &Mat) -> (Mat, Mat) {
    let m = a.data.iter().zip(&b.data).map(|(x, y)| x + y).fold(f64::NEG_INFINITY, f64::max);
    if m > 0.0 {
        let c = m / 2.0;
        let shift = |x: &Mat| Mat { rows: x.rows, cols: x.cols, data: x.data.iter().map(|v| v - c).collect() };
        (shift(a), shift(b))
    } else {
        (a.clone(), b.clone())
    }
}

fn zero_sum_spec(states: usize, actions: [usize; 2], horizon: usize, r1: Vec<Vec<Vec<f64>>>, transitions: Vec<Vec<Vec<Vec<f64>>>>) -> GameSpec {
    let r2 = r1.iter().map(|h| h.iter().map(|s| s.iter().map(|v| -v).collect()).collect()).collect();
    GameSpec {
        num_players: 2,
        states,
        actions: actions.to_vec(),
        horizon,
        initial_state: 0,
        transitions,
        rewards: vec![r1, r2],
        zero_sum: true,
    }
}

/// One-state, one-step instance with nominal reward `(A - B)/2` and interval sets
/// `[(A + B)/2, -(A + B)/2]` for both players.
pub fn reduce_to_reward(a: &Mat, b: &Mat) -> Result<RmgInstance> {
    let (a, b) = normalize(a, b);
    let rstar: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) / 2.0).collect();
    let lo: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| (x + y) / 2.0).collect();
    let hi: Vec<f64> = lo.iter().map(|v| -v).collect();
    let game = zero_sum_spec(1, [a.rows, a.cols], 1, vec![vec![rstar]], vec![]).validate()?;
    RmgInstance::nominal(game).with_reward_sets(|_, _, _| RewardSet::Interval { lo: lo.clone(), hi: hi.clone() })
}

/// Two-state, two-step instance carrying the general-sum part in (s,a)-rectangular TV balls.
///
/// Step 0 at state 0 pays `(A - B)/2` and moves to either state with probability ½, perturbed by
/// a TV ball of radius `r̄(a) / 2K` where `r̄ = -(A + B)/2` and `K = max r̄`. Step 1 pays `-K` in
/// state 0 and `+K` in state 1 to the row player, regardless of actions.
pub fn reduce_to_transition(a: &Mat, b: &Mat) -> Result<RmgInstance> {
    let (a, b) = normalize(a, b);
    let n = a.rows * a.cols;
    let rstar: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) / 2.0).collect();
    let rbar: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| -(x + y) / 2.0).collect();
    let k = rbar.iter().cloned().fold(0.0, f64::max);
    let r1 = vec![vec![rstar, vec![0.0; n]], vec![vec![-k; n], vec![k; n]]];
    let transitions = vec![vec![vec![vec![0.5, 0.5]; n]; 2]];
    let game = zero_sum_spec(2, [a.rows, a.cols], 2, r1, transitions).validate()?;
    let beta: Vec<f64> = rbar.iter().map(|r| if k > 0.0 { r / (2.0 * k) } else { 0.0 }).collect();
    RmgInstance::nominal(game).with_transition_sets(|_, s| {
        if s == 0 {
            TransitionSet::SaTv { beta: beta.clone() }
        } else {
            TransitionSet::Singleton
        }
    })
}

pub fn reduce(a: &Mat, b: &Mat, variant: Variant) -> Result<RmgInstance> {
    match variant {
        Variant::Reward => reduce_to_reward(a, b),
        Variant::Transition => reduce_to_transition(a, b),
    }
}

/// Markov policy playing `(x, y)` at the initial state of the first step and uniformly elsewhere.
pub fn profile_policy(inst: &RmgInstance, x: &[f64], y: &[f64]) -> Policy {
    let mut pol = Policy::uniform(&inst.game);
    pol.pi[0][0][inst.game.initial_state] = x.to_vec();
    pol.pi[1][0][inst.game.initial_state] = y.to_vec();
    pol
}

/// Robust Nash gap of the instance at the profile `(x, y)`, summed over both players.
pub fn instance_gap(inst: &RmgInstance, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(rne_gap(inst, &profile_policy(inst, x, y), 1e-12)?.initial_gap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub variant: Variant,
    pub trials: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares instance gaps with bimatrix gaps on random profiles (plus the uniform profile and
/// every pure profile).
pub fn verify_reduction(a: &Mat, b: &Mat, variant: Variant, trials: usize, seed: u64) -> Result<ReductionReport> {
    let inst = reduce(a, b, variant)?;
    let mut r = rng(seed);
    let mut profiles = vec![(uniform(a.rows), uniform(a.cols))];
    for i in 0..a.rows {
        for j in 0..a.cols {
            let mut x = vec![0.0; a.rows];
            let mut y = vec![0.0; a.cols];
            x[i] = 1.0;
            y[j] = 1.0;
            profiles.push((x, y));
        }
    }
    for _ in 0..trials {
        profiles.push((random_distribution(&mut r, a.rows), random_distribution(&mut r, a.cols)));
    }
    let mut max_deviation: f64 = 0.0;
    for (x, y) in &profiles {
        let d = (instance_gap(&inst, x, y)? - gensum_ne_gap(a, b, x, y)).abs();
        max_deviation = max_deviation.max(d);
    }
    let tolerance = match variant {
        Variant::Reward => 1e-10,
        Variant::Transition => 1e-8,
    };
    Ok(ReductionReport { variant, trials: profiles.len(), max_deviation, tolerance, passed: max_deviation <= tolerance })
}
