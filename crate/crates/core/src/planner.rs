//! Robust Markov games: policy evaluation, best responses, equilibrium gaps and planners.

use serde::{Deserialize, Serialize};

use crate::error::{dim, Error, Result};
use crate::game::{Game, JointActions, Policy, ValueTable};
use crate::linalg::{dot, norm, Mat};
use crate::reward::{check_kernel_convex, regularizer_from_uncertainty, Regularizer, RewardSet};
use crate::stage::{
    best_response_regularized, solve_general_sum_support_enum, solve_regularized_bimatrix, NormTerm, OwnRegularizer,
    SaddleOptions,
};
use crate::transition::{Route, TransitionSet};

/// A nominal game together with reward sets `reward[i][h][s]` and transition sets
/// `transition[h][s]` (steps `0..H-1`).
#[derive(Debug, Clone, PartialEq)]
pub struct RmgInstance {
    pub game: Game,
    pub reward: Vec<Vec<Vec<RewardSet>>>,
    pub transition: Vec<Vec<TransitionSet>>,
    pub decomposable: bool,
}

impl RmgInstance {
    /// Instance whose sets are all singletons.
    pub fn nominal(game: Game) -> Self {
        let (n, h, s) = (game.num_players, game.horizon, game.states);
        RmgInstance {
            reward: vec![vec![vec![RewardSet::Singleton; s]; h]; n],
            transition: vec![vec![TransitionSet::Singleton; s]; h.saturating_sub(1)],
            decomposable: false,
            game,
        }
    }

    pub fn new(
        game: Game,
        reward: Vec<Vec<Vec<RewardSet>>>,
        transition: Vec<Vec<TransitionSet>>,
        decomposable: bool,
    ) -> Result<Self> {
        let inst = RmgInstance { game, reward, transition, decomposable };
        inst.validate()?;
        Ok(inst)
    }

    /// Same instance with every reward set replaced by `f(player, step, state)`.
    pub fn with_reward_sets(mut self, f: impl Fn(usize, usize, usize) -> RewardSet) -> Result<Self> {
        for (i, ri) in self.reward.iter_mut().enumerate() {
            for (h, rh) in ri.iter_mut().enumerate() {
                for (s, set) in rh.iter_mut().enumerate() {
                    *set = f(i, h, s);
                }
            }
        }
        self.validate()?;
        Ok(self)
    }

    /// Same instance with every transition set replaced by `f(step, state)`.
    pub fn with_transition_sets(mut self, f: impl Fn(usize, usize) -> TransitionSet) -> Result<Self> {
        for (h, th) in self.transition.iter_mut().enumerate() {
            for (s, set) in th.iter_mut().enumerate() {
                *set = f(h, s);
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.game;
        let joint = g.joint();
        if self.reward.len() != g.num_players
            || self.reward.iter().any(|r| r.len() != g.horizon || r.iter().any(|x| x.len() != g.states))
        {
            return Err(dim("reward uncertainty must cover every (player, step, state)"));
        }
        if self.transition.len() != g.horizon - 1 || self.transition.iter().any(|t| t.len() != g.states) {
            return Err(dim("transition uncertainty must cover every (step, state) before the last step"));
        }
        for (i, ri) in self.reward.iter().enumerate() {
            for (h, rh) in ri.iter().enumerate() {
                for (s, set) in rh.iter().enumerate() {
                    set.validate(i, joint).map_err(|e| context(e, "reward", Some(i), h, s))?;
                    if let RewardSet::KernelPolicyDependent { kernel, tau } = set {
                        check_kernel_convex(kernel, *tau, g.actions[i], 0)
                            .map_err(|e| context(e, "reward", Some(i), h, s))?;
                    }
                }
            }
        }
        for (h, th) in self.transition.iter().enumerate() {
            for (s, set) in th.iter().enumerate() {
                set.validate(g.states, joint.total()).map_err(|e| context(e, "transition", None, h, s))?;
            }
        }
        if self.decomposable {
            self.check_decomposable()?;
        }
        Ok(())
    }

    /// Checks the structure required by the zero-sum fast path.
    pub fn check_decomposable(&self) -> Result<()> {
        let g = &self.game;
        if g.num_players != 2 || !g.zero_sum {
            return Err(Error::NotDecomposable("requires a two-player zero-sum nominal game".into()));
        }
        for (i, ri) in self.reward.iter().enumerate() {
            for (h, rh) in ri.iter().enumerate() {
                for (s, set) in rh.iter().enumerate() {
                    if own_regularizer(set).is_none() {
                        return Err(Error::NotDecomposable(format!(
                            "reward set {} of player {i} at step {h}, state {s} couples both players",
                            set.family()
                        )));
                    }
                }
            }
        }
        for (h, th) in self.transition.iter().enumerate() {
            for (s, set) in th.iter().enumerate() {
                if !set.is_singleton() {
                    return Err(Error::NotDecomposable(format!(
                        "transition uncertainty ({}) at step {h}, state {s}",
                        set.family()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Regularizers equivalent to every reward set.
    pub fn regularizers(&self) -> Result<Vec<Vec<Vec<Regularizer>>>> {
        self.reward
            .iter()
            .map(|ri| ri.iter().map(|rh| rh.iter().map(regularizer_from_uncertainty).collect()).collect())
            .collect()
    }

    fn rows(&self, h: usize, s: usize) -> &[Vec<f64>] {
        &self.game.transitions[h][s]
    }
}

fn context(e: Error, what: &str, player: Option<usize>, h: usize, s: usize) -> Error {
    let who = player.map(|i| format!("player {i}, ")).unwrap_or_default();
    match e {
        Error::InvalidParameter(m) => Error::InvalidParameter(format!("{what} set at {who}step {h}, state {s}: {m}")),
        Error::Dimension(m) => Error::Dimension(format!("{what} set at {who}step {h}, state {s}: {m}")),
        Error::NonConvex(m) => Error::NonConvex(format!("{what} set at {who}step {h}, state {s}: {m}")),
        other => other,
    }
}

/// Own-policy penalty of a separable reward set.
pub fn own_regularizer(set: &RewardSet) -> Option<OwnRegularizer> {
    match set {
        RewardSet::Singleton => Some(OwnRegularizer::zero()),
        RewardSet::OpnormBall { alpha, p, q } if q.0 == 1.0 => Some(OwnRegularizer::pnorm(*alpha, *p)),
        RewardSet::KernelPolicyDependent { kernel, tau } => Some(OwnRegularizer::with_kernel(kernel.clone(), *tau)),
        _ => None,
    }
}

pub(crate) fn map_states<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[derive(Clone, Copy)]
enum Mode<'a> {
    Support,
    WorstCase,
    Regularized(&'a [Vec<Vec<Regularizer>>]),
}

fn stage_value(
    inst: &RmgInstance,
    next: Option<&ValueTable>,
    h: usize,
    s: usize,
    dists: &[&[f64]],
    mode: Mode,
) -> Result<Vec<f64>> {
    let g = &inst.game;
    let joint = g.joint();
    let mu = joint.product(dists);
    let mut out = Vec::with_capacity(g.num_players);
    for i in 0..g.num_players {
        let r = &g.rewards[i][h][s];
        let set = &inst.reward[i][h][s];
        let reward_part = match mode {
            Mode::Support => dot(&mu, r) - set.support(i, joint, dists)?,
            Mode::WorstCase => set.worst_case_expectation(i, joint, dists, r),
            Mode::Regularized(regs) => dot(&mu, r) - regs[i][h][s].eval(i, joint, dists)?,
        };
        let trans_part = match next {
            Some(vt) if h + 1 < g.horizon => {
                let v = &vt.v[i][h + 1];
                let tset = &inst.transition[h][s];
                match mode {
                    Mode::Support => -tset.support(inst.rows(h, s), v, &mu, Route::Support)?,
                    Mode::WorstCase => tset.worst_case_expectation(inst.rows(h, s), v, &mu)?,
                    Mode::Regularized(_) => -tset.support(inst.rows(h, s), v, &mu, Route::Dual)?,
                }
            }
            _ => 0.0,
        };
        out.push(reward_part + trans_part);
    }
    Ok(out)
}

/// Robust Q-value of every player at `(h, s)` for the product policy `dists`:
/// `E_μ[r*] - σ_R(-π_i π_{-i}ᵀ) - σ_P(-V_{h+1} μᵀ)`, with `next` holding `V_{h+1}`.
pub fn robust_stage_q(
    inst: &RmgInstance,
    next: Option<&ValueTable>,
    h: usize,
    s: usize,
    dists: &[&[f64]],
) -> Result<Vec<f64>> {
    check_dists(&inst.game, dists)?;
    stage_value(inst, next, h, s, dists, Mode::Support)
}

/// Same quantity computed by building the worst-case reward and transition models explicitly.
pub fn worst_case_stage_q(
    inst: &RmgInstance,
    next: Option<&ValueTable>,
    h: usize,
    s: usize,
    dists: &[&[f64]],
) -> Result<Vec<f64>> {
    check_dists(&inst.game, dists)?;
    stage_value(inst, next, h, s, dists, Mode::WorstCase)
}

fn check_dists(game: &Game, dists: &[&[f64]]) -> Result<()> {
    if dists.len() != game.num_players || dists.iter().zip(&game.actions).any(|(d, &a)| d.len() != a) {
        return Err(dim("one marginal per player, sized to its action set, is required"));
    }
    Ok(())
}

fn backward(inst: &RmgInstance, policy: &Policy, mode: Mode) -> Result<ValueTable> {
    let g = &inst.game;
    policy.validate(g)?;
    let mut vt = ValueTable::zeros(g.num_players, g.horizon, g.states);
    for h in (0..g.horizon).rev() {
        let next = vt.clone();
        let vals = map_states(g.states, |s| stage_value(inst, Some(&next), h, s, &policy.dists(h, s), mode))?;
        for (s, q) in vals.into_iter().enumerate() {
            for (i, x) in q.into_iter().enumerate() {
                vt.v[i][h][s] = x;
            }
        }
    }
    Ok(vt)
}

/// Robust value of a Markov policy by backward induction with [`robust_stage_q`].
pub fn robust_policy_eval(inst: &RmgInstance, policy: &Policy) -> Result<ValueTable> {
    backward(inst, policy, Mode::Support)
}

/// Robust value through explicitly constructed worst-case models at every stage.
pub fn worst_case_policy_eval(inst: &RmgInstance, policy: &Policy) -> Result<ValueTable> {
    backward(inst, policy, Mode::WorstCase)
}

/// Value of the regularized game: `E_μ[r*] - Ω_i(π) + E_μ[P* V] - Ω_P(P*, -V, μ)` per stage.
pub fn regularized_policy_eval(
    inst: &RmgInstance,
    regs: &[Vec<Vec<Regularizer>>],
    policy: &Policy,
) -> Result<ValueTable> {
    if regs.len() != inst.game.num_players {
        return Err(dim("one regularizer table per player is required"));
    }
    for r in regs.iter().flatten().flatten() {
        r.validate()?;
    }
    backward(inst, policy, Mode::Regularized(regs))
}

/// Linear payoff and own penalty faced by `player` at `(h, s)` when the others play `dists`.
fn stage_problem(
    inst: &RmgInstance,
    player: usize,
    h: usize,
    s: usize,
    dists: &[&[f64]],
    v_next: Option<&[f64]>,
) -> Result<(Vec<f64>, OwnRegularizer)> {
    let g = &inst.game;
    let joint: &JointActions = g.joint();
    let others = joint.product_except(dists, player);
    let mut payoff = vec![0.0; g.actions[player]];
    let mut reg = OwnRegularizer::zero();
    let set = &inst.reward[player][h][s];
    match set {
        RewardSet::OpnormBall { alpha, p, q } => reg.norms.push(NormTerm { coef: alpha * norm(&others, *q), p: *p }),
        RewardSet::KernelPolicyDependent { kernel, tau } => reg.kernel = Some((kernel.clone(), *tau)),
        _ => {}
    }
    let tset = v_next.map(|v| (&inst.transition[h][s], v));
    if let Some((TransitionSet::OpnormBall { beta, p, q }, v)) = tset {
        reg.norms.push(NormTerm { coef: beta * norm(v, *p) * norm(&others, *q), p: *q });
    }
    for a in 0..joint.total() {
        let w = others[joint.others_index(a, player)];
        if w == 0.0 {
            continue;
        }
        let mut base = g.rewards[player][h][s][a];
        if let RewardSet::Interval { lo, .. } = set {
            base += lo[a];
        }
        if let Some((ts, v)) = tset {
            let row = &inst.rows(h, s)[a];
            base += match ts {
                TransitionSet::Singleton | TransitionSet::OpnormBall { .. } => dot(row, v),
                other => -other.action_dual(a, row, v, Route::Support)?.value,
            };
        }
        payoff[joint.component(a, player)] += w * base;
    }
    Ok((payoff, reg))
}

/// Robust best response of one player, per step and state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseResult {
    pub player: usize,
    /// `policy[h][s]`
    pub policy: Vec<Vec<Vec<f64>>>,
    /// `values[h][s]`
    pub values: Vec<Vec<f64>>,
}

/// Best response of `player` against the other players of `policy`, by backward induction.
/// Each stage is warm-started at the player's own action, so it never does worse than it.
///
/// Exact when the robust backup is monotone in the continuation value, which holds for every
/// family whose members are stochastic. s-rectangular transition balls also contain
/// non-stochastic kernels; there a better continuation can lower the stage value, and the result
/// is only a lower bound on the best deviation.
pub fn robust_best_response(inst: &RmgInstance, player: usize, policy: &Policy, tol: f64) -> Result<BestResponseResult> {
    let g = &inst.game;
    policy.validate(g)?;
    if player >= g.num_players {
        return Err(dim(format!("player {player} out of range")));
    }
    let mut values = vec![vec![0.0; g.states]; g.horizon];
    let mut pol = vec![vec![vec![]; g.states]; g.horizon];
    for h in (0..g.horizon).rev() {
        let next = if h + 1 < g.horizon { Some(values[h + 1].clone()) } else { None };
        let res = map_states(g.states, |s| {
            let dists = policy.dists(h, s);
            let (payoff, reg) = stage_problem(inst, player, h, s, &dists, next.as_deref())?;
            best_response_regularized(&payoff, &reg, tol, Some(dists[player]))
        })?;
        for (s, br) in res.into_iter().enumerate() {
            values[h][s] = br.value;
            pol[h][s] = br.x;
        }
    }
    Ok(BestResponseResult { player, policy: pol, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `gaps[i][h][s] = V†_{i,h}(s) - V^π_{i,h}(s)`
    pub gaps: Vec<Vec<Vec<f64>>>,
    /// Largest entry of `gaps`.
    pub max_gap: f64,
    /// `Σ_i gaps[i][0][initial_state]`.
    pub initial_gap: f64,
    pub values: ValueTable,
    pub best_responses: Vec<BestResponseResult>,
}

/// Robust Nash equilibrium gap of a Markov policy.
pub fn rne_gap(inst: &RmgInstance, policy: &Policy, tol: f64) -> Result<GapReport> {
    let g = &inst.game;
    let values = robust_policy_eval(inst, policy)?;
    let stage_tol = (tol / g.horizon as f64 * 1e-2).max(1e-14);
    let mut gaps = Vec::new();
    let mut brs = Vec::new();
    for i in 0..g.num_players {
        let br = robust_best_response(inst, i, policy, stage_tol)?;
        let gi: Vec<Vec<f64>> = (0..g.horizon)
            .map(|h| (0..g.states).map(|s| br.values[h][s] - values.v[i][h][s]).collect())
            .collect();
        gaps.push(gi);
        brs.push(br);
    }
    let max_gap = gaps.iter().flatten().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    let initial_gap = gaps.iter().map(|gi| gi[0][g.initial_state]).sum();
    Ok(GapReport { gaps, max_gap, initial_gap, values, best_responses: brs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    pub policy: Policy,
    pub values: ValueTable,
    /// Equilibrium gap of each stage game, `stage_gaps[h][s]`.
    pub stage_gaps: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Largest robust best-response improvement over all players, steps and states.
    pub max_gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerOptions {
    pub saddle: SaddleOptions,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        PlannerOptions { saddle: SaddleOptions::default() }
    }
}

type StageOutput = (Vec<f64>, Vec<f64>, [f64; 2], f64, usize, bool);

fn assemble(
    inst: &RmgInstance,
    method: &str,
    stages: Vec<Vec<StageOutput>>,
    eps: f64,
) -> Result<SolveReport> {
    let g = &inst.game;
    let mut pi = vec![vec![vec![vec![]; g.states]; g.horizon]; 2];
    let mut values = ValueTable::zeros(2, g.horizon, g.states);
    let mut stage_gaps = vec![vec![0.0; g.states]; g.horizon];
    let mut iterations = 0;
    let mut converged = true;
    for (h, row) in stages.into_iter().enumerate() {
        for (s, (x, y, v, gap, it, ok)) in row.into_iter().enumerate() {
            pi[0][h][s] = x;
            pi[1][h][s] = y;
            values.v[0][h][s] = v[0];
            values.v[1][h][s] = v[1];
            stage_gaps[h][s] = gap;
            iterations += it;
            converged &= ok;
        }
    }
    let policy = Policy { pi };
    let cert = rne_gap(inst, &policy, eps)?;
    Ok(SolveReport {
        method: method.into(),
        policy,
        values,
        stage_gaps,
        iterations,
        max_gap: cert.max_gap.max(0.0),
        converged: converged && cert.max_gap <= eps,
    })
}

fn stage_matrices(inst: &RmgInstance, h: usize, s: usize, values: &ValueTable) -> Result<[Mat; 2]> {
    let g = &inst.game;
    let (n1, n2) = (g.actions[0], g.actions[1]);
    let mut out = [Mat::zeros(n1, n2), Mat::zeros(n1, n2)];
    for (i, m) in out.iter_mut().enumerate() {
        let v = (h + 1 < g.horizon).then(|| values.v[i][h + 1].as_slice());
        for a in 0..n1 * n2 {
            let mut x = g.rewards[i][h][s][a];
            if let RewardSet::Interval { lo, .. } = &inst.reward[i][h][s] {
                x += lo[a];
            }
            if let Some(v) = v {
                let row = &inst.rows(h, s)[a];
                x += match &inst.transition[h][s] {
                    TransitionSet::Singleton => dot(row, v),
                    TransitionSet::OpnormBall { .. } => {
                        return Err(Error::Unsupported("s-rectangular transition balls in stage matrices".into()))
                    }
                    other => -other.action_dual(a, row, v, Route::Support)?.value,
                };
            }
            m.data[a] = x;
        }
    }
    Ok(out)
}

/// Robust equilibrium of an efficiently player-decomposable two-player zero-sum instance:
/// one regularized stage game per `(h, s)`, solved backwards in time with tolerance `eps / H`.
/// Each player's continuation is its own robust value, so the stage game stays exact even when
/// the accumulated regularizers make the values non-zero-sum.
pub fn solve_tpzs_rmg(inst: &RmgInstance, eps: f64, opts: &PlannerOptions) -> Result<SolveReport> {
    inst.check_decomposable()?;
    if !inst.decomposable {
        return Err(Error::NotDecomposable("instance is not flagged decomposable".into()));
    }
    let g = &inst.game;
    let stage_eps = eps / g.horizon as f64;
    let mut values = ValueTable::zeros(2, g.horizon, g.states);
    let mut stages: Vec<Vec<StageOutput>> = vec![vec![]; g.horizon];
    for h in (0..g.horizon).rev() {
        let row = map_states(g.states, |s| {
            let [m1, m2] = stage_matrices(inst, h, s, &values)?;
            let r1 = own_regularizer(&inst.reward[0][h][s]).expect("checked");
            let r2 = own_regularizer(&inst.reward[1][h][s]).expect("checked");
            let sol = solve_regularized_bimatrix(&m1, &m2, &r1, &r2, stage_eps, &opts.saddle)?;
            Ok((sol.x, sol.y, sol.values, sol.gap, sol.iterations, sol.converged))
        })?;
        for (s, st) in row.iter().enumerate() {
            values.v[0][h][s] = st.2[0];
            values.v[1][h][s] = st.2[1];
        }
        stages[h] = row;
    }
    assemble(inst, "tpzs_regularized", stages, eps)
}

/// Robust Markov perfect equilibrium of a small two-player instance with bilinear worst cases
/// (interval or singleton rewards, singleton or (s,a)-rectangular transitions): each stage is an
/// exact bimatrix game solved by support enumeration.
pub fn solve_small_general_sum_rmg(inst: &RmgInstance, eps: f64) -> Result<SolveReport> {
    let g = &inst.game;
    if g.num_players != 2 {
        return Err(Error::Unsupported("the general-sum solver handles two players".into()));
    }
    if g.actions.iter().any(|&a| a > 4) {
        return Err(Error::TooLarge { what: "actions per player", size: g.actions[0].max(g.actions[1]), limit: 4 });
    }
    if let Some(set) = inst.reward.iter().flatten().flatten().find(|s| !s.is_bilinear()) {
        return Err(Error::Unsupported(format!("reward family {} has a nonlinear worst case", set.family())));
    }
    if let Some(set) = inst.transition.iter().flatten().find(|s| !s.is_sa_rectangular()) {
        return Err(Error::Unsupported(format!("transition family {} is not (s,a)-rectangular", set.family())));
    }
    let mut values = ValueTable::zeros(2, g.horizon, g.states);
    let mut stages: Vec<Vec<StageOutput>> = vec![vec![]; g.horizon];
    for h in (0..g.horizon).rev() {
        let row = map_states(g.states, |s| {
            let [m1, m2] = stage_matrices(inst, h, s, &values)?;
            let en = solve_general_sum_support_enum(&m1, &m2)?;
            let z = OwnRegularizer::zero();
            match en.equilibria.first() {
                Some(e) => Ok((e.x.clone(), e.y.clone(), e.payoffs, 0.0, 0, true)),
                None => {
                    let sol = solve_regularized_bimatrix(&m1, &m2, &z, &z, eps / g.horizon as f64, &SaddleOptions::default())?;
                    Ok((sol.x, sol.y, sol.values, sol.gap, sol.iterations, sol.converged))
                }
            }
        })?;
        for (s, st) in row.iter().enumerate() {
            values.v[0][h][s] = st.2[0];
            values.v[1][h][s] = st.2[1];
        }
        stages[h] = row;
    }
    assemble(inst, "general_sum_support_enumeration", stages, eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub trials: usize,
    /// Largest |robust - regularized| over all trials, players, steps and states.
    pub max_deviation: f64,
    pub worst_trial: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Whether every set in the instance has an exact (non-iterative) worst case.
pub fn closed_form_families(inst: &RmgInstance) -> bool {
    inst.transition.iter().flatten().all(|t| !matches!(t, TransitionSet::SaKl { .. } | TransitionSet::SaChi2 { .. }))
}

/// Compares the explicit worst-case evaluation with the regularized evaluation (mapped
/// regularizers, dual transition penalties) on random policies.
pub fn equivalence_check(inst: &RmgInstance, trials: usize, seed: u64) -> Result<EquivalenceReport> {
    let regs = inst.regularizers()?;
    let tolerance = if closed_form_families(inst) { 1e-9 } else { 1e-6 };
    let mut max_deviation: f64 = 0.0;
    let mut worst_trial = 0;
    for t in 0..trials {
        let pol = crate::game::random_policy(&inst.game, seed.wrapping_add(t as u64), false);
        let robust = worst_case_policy_eval(inst, &pol)?;
        let reg = regularized_policy_eval(inst, &regs, &pol)?;
        let sup = robust_policy_eval(inst, &pol)?;
        let scale = 1.0 + robust.v.iter().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let d = robust.max_abs_diff(&reg).max(sup.max_abs_diff(&reg)) / scale;
        if d > max_deviation {
            max_deviation = d;
            worst_trial = t;
        }
    }
    Ok(EquivalenceReport { trials, max_deviation, worst_trial, tolerance, passed: max_deviation <= tolerance })
}
