//! Nominal finite-horizon Markov games, policies and value tables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Row-major indexing of joint actions `(a_1, ..., a_N)`, `a_1` most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointActions {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl JointActions {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        let mut strides = vec![1; sizes.len()];
        let mut total: usize = 1;
        for i in (0..sizes.len()).rev() {
            strides[i] = total;
            total = total
                .checked_mul(sizes[i])
                .ok_or_else(|| param("joint action space overflows usize"))?;
        }
        Ok(JointActions { sizes: sizes.to_vec(), strides, total })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn players(&self) -> usize {
        self.sizes.len()
    }

    /// Action of `player` inside joint action `a`.
    #[inline]
    pub fn component(&self, a: usize, player: usize) -> usize {
        (a / self.strides[player]) % self.sizes[player]
    }

    /// Size of the joint action space of everyone except `player`.
    pub fn others(&self, player: usize) -> usize {
        self.total / self.sizes[player]
    }

    /// Row-major index of `a_{-i}` over the remaining players.
    #[inline]
    pub fn others_index(&self, a: usize, player: usize) -> usize {
        let hi = a / (self.strides[player] * self.sizes[player]);
        let lo = a % self.strides[player];
        hi * self.strides[player] + lo
    }

    /// Inverse of `(component, others_index)`.
    #[inline]
    pub fn compose(&self, player: usize, ai: usize, others: usize) -> usize {
        let s = self.strides[player];
        let hi = others / s;
        let lo = others % s;
        (hi * self.sizes[player] + ai) * s + lo
    }

    /// Product distribution over joint actions.
    pub fn product(&self, dists: &[&[f64]]) -> Vec<f64> {
        let mut mu = vec![1.0];
        for d in dists {
            let mut next = Vec::with_capacity(mu.len() * d.len());
            for &m in &mu {
                for &p in d.iter() {
                    next.push(m * p);
                }
            }
            mu = next;
        }
        mu
    }

    /// Product distribution over `A_{-i}`, in `others_index` order.
    pub fn product_except(&self, dists: &[&[f64]], player: usize) -> Vec<f64> {
        let rest: Vec<&[f64]> =
            dists.iter().enumerate().filter(|(j, _)| *j != player).map(|(_, d)| *d).collect();
        self.product(&rest)
    }
}

/// Serializable description of a finite-horizon N-player Markov game.
///
/// `transitions[h][s][a][s']` covers steps `0..H-1`; `rewards[i][h][s][a]` covers all `H` steps.
/// Joint actions are indexed row-major over `(a_1, ..., a_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub num_players: usize,
    pub states: usize,
    pub actions: Vec<usize>,
    pub horizon: usize,
    #[serde(default)]
    pub initial_state: usize,
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    pub rewards: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub zero_sum: bool,
}

/// A game that passed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    spec: GameSpec,
    joint: JointActions,
}

impl std::ops::Deref for Game {
    type Target = GameSpec;
    fn deref(&self) -> &GameSpec {
        &self.spec
    }
}

impl GameSpec {
    /// Checks every structural constraint and reports all violations at once.
    pub fn validate(self) -> Result<Game> {
        let mut errs = Vec::new();
        let n = self.num_players;
        if n == 0 {
            errs.push("num_players must be positive".to_string());
        }
        if self.actions.len() != n {
            errs.push(format!("actions has {} entries for {} players", self.actions.len(), n));
        }
        if self.actions.iter().any(|&a| a == 0) {
            errs.push("every player needs at least one action".into());
        }
        if self.states == 0 {
            errs.push("states must be positive".into());
        }
        if self.horizon == 0 {
            errs.push("horizon must be positive".into());
        }
        if self.initial_state >= self.states.max(1) {
            errs.push(format!("initial_state {} out of range", self.initial_state));
        }
        let joint = match JointActions::new(&self.actions) {
            Ok(j) => j,
            Err(e) => return Err(Error::InvalidGame(vec![e.to_string()])),
        };
        if !errs.is_empty() {
            return Err(Error::InvalidGame(errs));
        }
        let (s_n, a_n, h_n) = (self.states, joint.total(), self.horizon);

        if self.transitions.len() != h_n - 1 {
            errs.push(format!("transitions has {} steps, expected {}", self.transitions.len(), h_n - 1));
        }
        for (h, th) in self.transitions.iter().enumerate() {
            if th.len() != s_n {
                errs.push(format!("transitions[{h}] has {} states, expected {s_n}", th.len()));
                continue;
            }
            for (s, ts) in th.iter().enumerate() {
                if ts.len() != a_n {
                    errs.push(format!("transitions[{h}][{s}] has {} joint actions, expected {a_n}", ts.len()));
                    continue;
                }
                for (a, row) in ts.iter().enumerate() {
                    if row.len() != s_n {
                        errs.push(format!("transitions[{h}][{s}][{a}] has length {}, expected {s_n}", row.len()));
                        continue;
                    }
                    if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                        errs.push(format!("transitions[{h}][{s}][{a}] has entry {v}"));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > STOCHASTIC_TOL {
                        errs.push(format!("transitions[{h}][{s}][{a}] sums to {sum}"));
                    }
                }
            }
        }

        if self.rewards.len() != n {
            errs.push(format!("rewards has {} players, expected {n}", self.rewards.len()));
        }
        for (i, ri) in self.rewards.iter().enumerate() {
            if ri.len() != h_n {
                errs.push(format!("rewards[{i}] has {} steps, expected {h_n}", ri.len()));
                continue;
            }
            for (h, rh) in ri.iter().enumerate() {
                if rh.len() != s_n {
                    errs.push(format!("rewards[{i}][{h}] has {} states, expected {s_n}", rh.len()));
                    continue;
                }
                for (s, rs) in rh.iter().enumerate() {
                    if rs.len() != a_n {
                        errs.push(format!("rewards[{i}][{h}][{s}] has length {}, expected {a_n}", rs.len()));
                    } else if let Some(v) = rs.iter().find(|v| !v.is_finite()) {
                        errs.push(format!("rewards[{i}][{h}][{s}] has entry {v}"));
                    }
                }
            }
        }

        if self.zero_sum && errs.is_empty() {
            if n != 2 {
                errs.push(format!("zero_sum requires two players, got {n}"));
            } else {
                'outer: for h in 0..h_n {
                    for s in 0..s_n {
                        for a in 0..a_n {
                            let (r1, r2) = (self.rewards[0][h][s][a], self.rewards[1][h][s][a]);
                            if (r1 + r2).abs() > 1e-12 {
                                errs.push(format!("zero_sum violated at step {h}, state {s}, action {a}"));
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }

        if errs.is_empty() {
            Ok(Game { spec: self, joint })
        } else {
            Err(Error::InvalidGame(errs))
        }
    }
}

impl Game {
    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn into_spec(self) -> GameSpec {
        self.spec
    }

    pub fn joint(&self) -> &JointActions {
        &self.joint
    }

    /// `Σ_{s'} P(s'|s,a) v(s')`.
    pub fn expected_next(&self, h: usize, s: usize, a: usize, v: &[f64]) -> f64 {
        self.transitions[h][s][a].iter().zip(v).map(|(p, x)| p * x).sum()
    }
}

/// Markov policy `pi[i][h][s][a_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub pi: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Policy {
    pub fn uniform(game: &Game) -> Policy {
        let pi = game
            .actions
            .iter()
            .map(|&k| vec![vec![vec![1.0 / k as f64; k]; game.states]; game.horizon])
            .collect();
        Policy { pi }
    }

    pub fn validate(&self, game: &Game) -> Result<()> {
        if self.pi.len() != game.num_players {
            return Err(Error::InvalidPolicy(format!(
                "policy has {} players, game has {}",
                self.pi.len(),
                game.num_players
            )));
        }
        for (i, pi_i) in self.pi.iter().enumerate() {
            if pi_i.len() != game.horizon {
                return Err(Error::InvalidPolicy(format!("player {i} has {} steps", pi_i.len())));
            }
            for (h, ph) in pi_i.iter().enumerate() {
                if ph.len() != game.states {
                    return Err(Error::InvalidPolicy(format!("player {i} step {h} has {} states", ph.len())));
                }
                for (s, d) in ph.iter().enumerate() {
                    if d.len() != game.actions[i] {
                        return Err(Error::InvalidPolicy(format!(
                            "pi[{i}][{h}][{s}] has {} actions, expected {}",
                            d.len(),
                            game.actions[i]
                        )));
                    }
                    crate::linalg::check_distribution(d, STOCHASTIC_TOL, &format!("pi[{i}][{h}][{s}]"))
                        .map_err(|e| Error::InvalidPolicy(e.to_string()))?;
                }
            }
        }
        Ok(())
    }

    /// Per-player marginals at `(h, s)`.
    pub fn dists(&self, h: usize, s: usize) -> Vec<&[f64]> {
        self.pi.iter().map(|p| p[h][s].as_slice()).collect()
    }
}

/// Values `v[i][h][s]` for steps `0..H`; the terminal value at step `H` is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub v: Vec<Vec<Vec<f64>>>,
}

impl ValueTable {
    pub fn zeros(players: usize, horizon: usize, states: usize) -> Self {
        ValueTable { v: vec![vec![vec![0.0; states]; horizon]; players] }
    }

    /// Values of player `i` at step `h`; `None` past the horizon.
    pub fn step(&self, i: usize, h: usize) -> Option<&[f64]> {
        self.v[i].get(h).map(|x| x.as_slice())
    }

    pub fn max_abs_diff(&self, other: &ValueTable) -> f64 {
        self.v
            .iter()
            .flatten()
            .flatten()
            .zip(other.v.iter().flatten().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Exact backward induction under the nominal model.
pub fn nominal_policy_eval(game: &Game, policy: &Policy) -> Result<ValueTable> {
    policy.validate(game)?;
    let (n, hn, sn) = (game.num_players, game.horizon, game.states);
    let mut out = ValueTable::zeros(n, hn, sn);
    for h in (0..hn).rev() {
        for s in 0..sn {
            let mu = game.joint().product(&policy.dists(h, s));
            for i in 0..n {
                let mut q = 0.0;
                for (a, &m) in mu.iter().enumerate() {
                    if m == 0.0 {
                        continue;
                    }
                    let mut r = game.rewards[i][h][s][a];
                    if h + 1 < hn {
                        r += game.expected_next(h, s, a, &out.v[i][h + 1]);
                    }
                    q += m * r;
                }
                out.v[i][h][s] = q;
            }
        }
    }
    Ok(out)
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Flat Dirichlet(1, ..., 1) sample.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomGameConfig {
    pub players: usize,
    pub states: usize,
    pub actions: Vec<usize>,
    pub horizon: usize,
    pub reward_range: (f64, f64),
    pub zero_sum: bool,
    pub seed: u64,
}

impl RandomGameConfig {
    pub fn two_player(states: usize, actions: usize, horizon: usize, zero_sum: bool, seed: u64) -> Self {
        RandomGameConfig {
            players: 2,
            states,
            actions: vec![actions, actions],
            horizon,
            reward_range: (-1.0, 1.0),
            zero_sum,
            seed,
        }
    }
}

/// Game with Dirichlet transitions and uniform rewards; deterministic in the seed.
pub fn random_game(cfg: &RandomGameConfig) -> Result<Game> {
    if cfg.zero_sum && cfg.players != 2 {
        return Err(param("zero-sum games need exactly two players"));
    }
    let (lo, hi) = cfg.reward_range;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(param(format!("bad reward range ({lo}, {hi})")));
    }
    let joint = JointActions::new(&cfg.actions)?;
    let mut rng = rng(cfg.seed);
    let (sn, an, hn) = (cfg.states, joint.total(), cfg.horizon);
    let transitions = (0..hn.saturating_sub(1))
        .map(|_| (0..sn).map(|_| (0..an).map(|_| random_distribution(&mut rng, sn)).collect()).collect())
        .collect();
    let mut rewards: Vec<Vec<Vec<Vec<f64>>>> = (0..cfg.players)
        .map(|_| {
            (0..hn)
                .map(|_| (0..sn).map(|_| (0..an).map(|_| rng.random_range(lo..=hi)).collect()).collect())
                .collect()
        })
        .collect();
    if cfg.zero_sum {
        rewards[1] = rewards[0].iter().map(|h| h.iter().map(|s| s.iter().map(|r| -r).collect()).collect()).collect();
    }
    GameSpec {
        num_players: cfg.players,
        states: sn,
        actions: cfg.actions.clone(),
        horizon: hn,
        initial_state: 0,
        transitions,
        rewards,
        zero_sum: cfg.zero_sum,
    }
    .validate()
}

/// Random Markov policy (Dirichlet draws), or the uniform policy.
pub fn random_policy(game: &Game, seed: u64, uniform: bool) -> Policy {
    if uniform {
        return Policy::uniform(game);
    }
    let mut rng = rng(seed);
    let pi = game
        .actions
        .iter()
        .map(|&k| {
            (0..game.horizon)
                .map(|_| (0..game.states).map(|_| random_distribution(&mut rng, k)).collect())
                .collect()
        })
        .collect();
    Policy { pi }
}
