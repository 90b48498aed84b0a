//! Brute-force references for validating the closed forms and solvers.
//!
//! Slow on purpose. Norms, distances, entropies and linear solves are written out again here
//! rather than borrowed from the modules under test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim, param, Error, Result};
use crate::game::{Game, JointActions, Policy, ValueTable};
use crate::linalg::{Mat, NormOrder};
use crate::reward::{Kernel, RewardSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub samples: usize,
    pub local_steps: usize,
    pub grid_resolution: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { samples: 10_000, local_steps: 200, grid_resolution: 100, seed: 0 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.local_steps == 0 || self.grid_resolution == 0 {
            return Err(param("oracle counts must be positive"));
        }
        Ok(())
    }
}

fn pnorm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn conj(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn draw(r: &mut ChaCha8Rng, dist: &[f64]) -> usize {
    let u: f64 = r.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in dist.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Gaussian elimination with full row scan; `None` when singular.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-13 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..n {
                        a[r][k] -= f * a[c][k];
                    }
                    b[r] -= f * b[c];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportEstimate {
    /// Best `<member, y>` found; never above the true support value.
    pub value: f64,
    /// The member attaining it, as a perturbation over joint actions.
    pub witness: Vec<f64>,
}

/// Lower bound on `sup_{R ∈ set} <R, y>` for perturbations `R` over joint actions.
///
/// `own_policy` is needed for policy-dependent kernel sets. Interval sets are solved exactly by
/// corner selection; operator-norm balls by feasible sampling plus coordinate ascent.
pub fn oracle_set_support(
    set: &RewardSet,
    player: usize,
    joint: &JointActions,
    own_policy: Option<&[f64]>,
    y: &[f64],
    cfg: &OracleConfig,
) -> Result<SupportEstimate> {
    cfg.validate()?;
    if y.len() != joint.total() {
        return Err(dim("y must be indexed by joint actions"));
    }
    match set {
        RewardSet::Singleton => Ok(SupportEstimate { value: 0.0, witness: vec![0.0; y.len()] }),
        RewardSet::Interval { lo, hi } => interval_support(lo, hi, y, cfg),
        RewardSet::KernelPolicyDependent { kernel, tau } => {
            let pi = own_policy.ok_or_else(|| param("kernel sets need the player's own policy"))?;
            let (lo, hi) = kernel_interval(kernel, *tau, pi, player, joint)?;
            interval_support(&lo, &hi, y, cfg)
        }
        RewardSet::OpnormBall { alpha, p, q } => {
            let (rows, cols) = (joint.sizes()[player], joint.others(player));
            let mut ym = Mat::zeros(rows, cols);
            for (a, &v) in y.iter().enumerate() {
                ym.set(joint.component(a, player), joint.others_index(a, player), v);
            }
            let (value, r) = opnorm_support(*alpha, *p, *q, &ym, cfg)?;
            let witness = (0..y.len())
                .map(|a| r.get(joint.component(a, player), joint.others_index(a, player)))
                .collect();
            Ok(SupportEstimate { value, witness })
        }
    }
}

fn kernel_interval(
    kernel: &Kernel,
    tau: f64,
    pi: &[f64],
    player: usize,
    joint: &JointActions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let omega = |k: usize, x: f64| -> Result<f64> {
        Ok(match kernel {
            Kernel::Shannon => x.ln(),
            Kernel::KlReference { reference } => x.ln() - reference[k].ln(),
            Kernel::Tsallis => 0.5 * x - 0.5,
            Kernel::Renyi { .. } => return Err(Error::NonSeparableKernel("renyi")),
        })
    };
    let mut lo = vec![0.0; joint.total()];
    for (a, l) in lo.iter_mut().enumerate() {
        let k = joint.component(a, player);
        *l = if tau == 0.0 || pi[k] == 0.0 { 0.0 } else { -tau * omega(k, pi[k])? };
    }
    let hi = lo.iter().map(|l| l.max(0.0)).collect();
    Ok((lo, hi))
}

fn interval_support(lo: &[f64], hi: &[f64], y: &[f64], cfg: &OracleConfig) -> Result<SupportEstimate> {
    if lo.len() != y.len() || hi.len() != y.len() {
        return Err(dim("interval bounds must be indexed by joint actions"));
    }
    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best = SupportEstimate { value: f64::NEG_INFINITY, witness: vec![] };
    for _ in 0..cfg.samples.min(64) {
        let mut x: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| l + (h - l) * r.random::<f64>()).collect();
        // Each coordinate enters linearly, so one sweep moves it to its better endpoint.
        for k in 0..x.len() {
            x[k] = if y[k] * hi[k] >= y[k] * lo[k] { hi[k] } else { lo[k] };
        }
        let v: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        if v > best.value {
            best = SupportEstimate { value: v, witness: x };
        }
    }
    Ok(best)
}

/// Upper bound on `||R||_{q→p*}` from Hölder: the `q*` norm of the column `p*` norms.
/// Exact for rank-one matrices.
fn opnorm_bound(r: &Mat, p: f64, q: f64) -> f64 {
    let cols: Vec<f64> = (0..r.cols)
        .map(|j| pnorm(&(0..r.rows).map(|i| r.get(i, j)).collect::<Vec<_>>(), conj(p)))
        .collect();
    pnorm(&cols, conj(q))
}

fn opnorm_support(alpha: f64, p: NormOrder, q: NormOrder, y: &Mat, cfg: &OracleConfig) -> Result<(f64, Mat)> {
    let (p, q) = (p.0, q.0);
    if !(p >= 1.0 && q >= 1.0) || !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(param("bad ball parameters"));
    }
    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
    let inner = |m: &Mat| -> f64 { m.data.iter().zip(&y.data).map(|(a, b)| a * b).sum() };
    let scaled = |m: &Mat| -> Mat {
        let b = opnorm_bound(m, p, q);
        let c = if b > 0.0 { alpha / b } else { 0.0 };
        let mut out = m.scale(c);
        if inner(&out) < 0.0 {
            out = out.scale(-1.0);
        }
        out
    };
    let mut best = Mat::zeros(y.rows, y.cols);
    let mut best_v = 0.0;
    let mut best_uw: Option<(Vec<f64>, Vec<f64>)> = None;
    for k in 0..cfg.samples {
        let m = if k % 2 == 0 {
            let u: Vec<f64> = (0..y.rows).map(|_| gaussian(&mut r)).collect();
            let w: Vec<f64> = (0..y.cols).map(|_| gaussian(&mut r)).collect();
            let m = Mat::outer(&u, &w);
            let v = inner(&scaled(&m));
            if v > best_v {
                best_uw = Some((u, w));
            }
            m
        } else {
            let data = (0..y.rows * y.cols).map(|_| gaussian(&mut r)).collect();
            Mat { rows: y.rows, cols: y.cols, data }
        };
        let m = scaled(&m);
        let v = inner(&m);
        if v > best_v {
            best_v = v;
            best = m;
        }
    }
    // Coordinate ascent on the best rank-one factorization.
    if let Some((mut u, mut w)) = best_uw {
        let value = |u: &[f64], w: &[f64]| inner(&scaled(&Mat::outer(u, w)));
        let mut cur = value(&u, &w);
        let mut step = 0.5 * (pnorm(&u, 2.0) + pnorm(&w, 2.0)) / ((u.len() + w.len()) as f64).sqrt();
        for _ in 0..cfg.local_steps {
            let mut improved = false;
            for which in 0..2 {
                let len = if which == 0 { u.len() } else { w.len() };
                for k in 0..len {
                    for dir in [1.0, -1.0] {
                        let (mut u2, mut w2) = (u.clone(), w.clone());
                        if which == 0 {
                            u2[k] += dir * step;
                        } else {
                            w2[k] += dir * step;
                        }
                        let v = value(&u2, &w2);
                        if v > cur {
                            cur = v;
                            u = u2;
                            w = w2;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if cur > best_v {
            best_v = cur;
            best = scaled(&Mat::outer(&u, &w));
        }
    }
    Ok((best_v, best))
}

/// Number of points on the simplex grid with `resolution` steps in `dim` coordinates.
fn grid_size(dim: usize, resolution: usize) -> f64 {
    // C(resolution + dim - 1, dim - 1)
    (1..dim).fold(1.0, |acc, k| acc * (resolution + k) as f64 / k as f64)
}

pub const GRID_LIMIT: f64 = 5e6;

/// Exhaustive maximization of `f` over `{x ∈ Δ_dim : x = k / resolution}`.
pub fn oracle_simplex_grid_max(
    f: impl Fn(&[f64]) -> f64,
    dim: usize,
    resolution: usize,
) -> Result<(Vec<f64>, f64)> {
    if dim == 0 || resolution == 0 {
        return Err(param("grid needs a positive dimension and resolution"));
    }
    let size = grid_size(dim, resolution);
    if size > GRID_LIMIT {
        return Err(Error::TooLarge { what: "simplex grid points", size: size as usize, limit: GRID_LIMIT as usize });
    }
    let mut counts = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut best = (vec![], f64::NEG_INFINITY);
    fn rec(
        k: usize,
        left: usize,
        res: usize,
        counts: &mut Vec<usize>,
        x: &mut Vec<f64>,
        f: &dyn Fn(&[f64]) -> f64,
        best: &mut (Vec<f64>, f64),
    ) {
        if k + 1 == counts.len() {
            counts[k] = left;
            for (xi, &c) in x.iter_mut().zip(counts.iter()) {
                *xi = c as f64 / res as f64;
            }
            let v = f(x);
            if v > best.1 {
                *best = (x.clone(), v);
            }
            return;
        }
        for c in 0..=left {
            counts[k] = c;
            rec(k + 1, left - c, res, counts, x, f, best);
        }
    }
    rec(0, resolution, resolution, &mut counts, &mut x, &f, &mut best);
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Estimated value from the initial state, per player.
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub rollouts: usize,
}

const MC_CHUNK: usize = 8192;

/// Monte-Carlo rollouts of `policy` under the nominal model, from the initial state.
/// Chunks use independent ChaCha streams so the result does not depend on thread count.
pub fn oracle_mc_eval(game: &Game, policy: &Policy, rollouts: usize, seed: u64) -> Result<McEstimate> {
    if rollouts == 0 {
        return Err(param("at least one rollout is required"));
    }
    policy.validate(game)?;
    let n = game.num_players;
    let chunks = rollouts.div_ceil(MC_CHUNK);
    let run = |c: usize| -> (f64, Vec<f64>, Vec<f64>) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(c as u64);
        let count = MC_CHUNK.min(rollouts - c * MC_CHUNK);
        let mut mean = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        let mut ret = vec![0.0; n];
        let sizes = &game.actions;
        for t in 0..count {
            ret.iter_mut().for_each(|x| *x = 0.0);
            let mut s = game.initial_state;
            for h in 0..game.horizon {
                let mut a = 0;
                for (i, &k) in sizes.iter().enumerate() {
                    a = a * k + draw(&mut r, &policy.pi[i][h][s]);
                }
                for (i, x) in ret.iter_mut().enumerate() {
                    *x += game.rewards[i][h][s][a];
                }
                if h + 1 < game.horizon {
                    s = draw(&mut r, &game.transitions[h][s][a]);
                }
            }
            // Welford update.
            let k = (t + 1) as f64;
            for i in 0..n {
                let d = ret[i] - mean[i];
                mean[i] += d / k;
                m2[i] += d * (ret[i] - mean[i]);
            }
        }
        (count as f64, mean, m2)
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<_> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<_> = (0..chunks).map(run).collect();
    let (mut cnt, mut mean, mut m2) = (0.0, vec![0.0; n], vec![0.0; n]);
    for (c, mu, q) in parts {
        let tot = cnt + c;
        for i in 0..n {
            let d = mu[i] - mean[i];
            mean[i] += d * c / tot;
            m2[i] += q[i] + d * d * cnt * c / tot;
        }
        cnt = tot;
    }
    let stderr = m2
        .iter()
        .map(|q| if cnt > 1.0 { (q / (cnt - 1.0) / cnt).sqrt() } else { 0.0 })
        .collect();
    Ok(McEstimate { mean, stderr, rollouts })
}

/// Divergences between a candidate and the nominal next-state distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Divergence {
    Tv,
    Kl,
    Chi2,
    /// Wasserstein-1 under a metric satisfying the triangle inequality.
    W1(Vec<Vec<f64>>),
}

impl Divergence {
    pub fn eval(&self, p: &[f64], pbar: &[f64]) -> f64 {
        match self {
            Divergence::Tv => 0.5 * p.iter().zip(pbar).map(|(a, b)| (a - b).abs()).sum::<f64>(),
            Divergence::Kl => p
                .iter()
                .zip(pbar)
                .map(|(&a, &b)| match (a > 0.0, b > 0.0) {
                    (false, _) => 0.0,
                    (true, false) => f64::INFINITY,
                    (true, true) => a * (a / b).ln(),
                })
                .sum(),
            Divergence::Chi2 => p
                .iter()
                .zip(pbar)
                .map(|(&a, &b)| {
                    if b > 0.0 {
                        (a - b) * (a - b) / b
                    } else if a > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                })
                .sum(),
            Divergence::W1(d) => w1_small(p, pbar, d),
        }
    }
}

/// Optimal transport cost on at most three points: with a triangle-inequality metric, the state
/// whose excess has a unique sign exchanges mass directly with the others.
fn w1_small(p: &[f64], pbar: &[f64], metric: &[Vec<f64>]) -> f64 {
    let e: Vec<f64> = p.iter().zip(pbar).map(|(a, b)| a - b).collect();
    match e.len() {
        1 => 0.0,
        2 => metric[0][1] * e[0].abs(),
        _ => {
            let pos = e.iter().filter(|&&x| x > 0.0).count();
            let neg = e.iter().filter(|&&x| x < 0.0).count();
            let hub = if pos == 1 {
                e.iter().position(|&x| x > 0.0)
            } else if neg == 1 {
                e.iter().position(|&x| x < 0.0)
            } else {
                None
            };
            match hub {
                Some(k) => (0..3).filter(|&j| j != k).map(|j| e[j].abs() * metric[k][j]).sum(),
                None => 0.0,
            }
        }
    }
}

fn check_small(pbar: &[f64], v: &[f64], beta: f64) -> Result<()> {
    if pbar.len() != v.len() || pbar.is_empty() {
        return Err(dim("nominal and value sizes differ"));
    }
    if pbar.len() > 3 {
        return Err(Error::TooLarge { what: "states for the line-search oracle", size: pbar.len(), limit: 3 });
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(param("radius must be finite and non-negative"));
    }
    Ok(())
}

/// Largest feasible step along `d` from `pbar`, by bisection on the divergence constraint.
fn ray_reach(div: &Divergence, pbar: &[f64], d: &[f64], beta: f64) -> f64 {
    let mut rmax = f64::INFINITY;
    for (&p, &dk) in pbar.iter().zip(d) {
        if dk < 0.0 {
            rmax = rmax.min(p / -dk);
        }
    }
    if !rmax.is_finite() || rmax <= 0.0 {
        return 0.0;
    }
    let at = |r: f64| -> Vec<f64> { pbar.iter().zip(d).map(|(p, dk)| (p + r * dk).max(0.0)).collect() };
    if div.eval(&at(rmax), pbar) <= beta {
        return rmax;
    }
    let (mut lo, mut hi) = (0.0, rmax);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if div.eval(&at(mid), pbar) <= beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `sup {<P, -v> : P ∈ Δ, div(P, p̄) <= β}` on two or three states, by sweeping rays from `p̄`.
pub fn oracle_transition_support(div: &Divergence, pbar: &[f64], v: &[f64], beta: f64) -> Result<f64> {
    check_small(pbar, v, beta)?;
    let base: f64 = -pbar.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let gain = |d: &[f64]| -> f64 {
        let slope: f64 = -d.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        if slope <= 0.0 {
            0.0
        } else {
            slope * ray_reach(div, pbar, d, beta)
        }
    };
    match pbar.len() {
        1 => Ok(base),
        2 => Ok(base + gain(&[1.0, -1.0]).max(gain(&[-1.0, 1.0]))),
        _ => {
            let (s2, s6) = (2f64.sqrt(), 6f64.sqrt());
            let dir = |t: f64| [t.cos() / s2 + t.sin() / s6, -t.cos() / s2 + t.sin() / s6, -2.0 * t.sin() / s6];
            let n = 3600;
            let h = std::f64::consts::TAU / n as f64;
            let mut best = (0.0, 0.0);
            for k in 0..n {
                let t = k as f64 * h;
                let g = gain(&dir(t));
                if g > best.1 {
                    best = (t, g);
                }
            }
            // Golden-section refinement around the best sampled angle.
            let (mut a, mut b) = (best.0 - h, best.0 + h);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..80 {
                let c = b - phi * (b - a);
                let d = a + phi * (b - a);
                if gain(&dir(c)) >= gain(&dir(d)) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let refined = gain(&dir(0.5 * (a + b)));
            Ok(base + best.1.max(refined))
        }
    }
}

/// KL ball support through the exponential-tilting family `p_λ ∝ p̄ exp(-v/λ)`: the radius is
/// matched by bisection on `λ`, with the point-mass limit when the radius exceeds
/// `-ln p̄(argmin v)`.
pub fn oracle_kl_tilting(pbar: &[f64], v: &[f64], beta: f64) -> Result<f64> {
    if pbar.len() != v.len() || pbar.is_empty() {
        return Err(dim("nominal and value sizes differ"));
    }
    let supp: Vec<usize> = (0..pbar.len()).filter(|&k| pbar[k] > 0.0).collect();
    let vmin = supp.iter().map(|&k| v[k]).fold(f64::INFINITY, f64::min);
    let mean: f64 = supp.iter().map(|&k| pbar[k] * v[k]).sum();
    if beta == 0.0 {
        return Ok(-mean);
    }
    let tilt = |lam: f64| -> (f64, f64) {
        let w: Vec<f64> = supp.iter().map(|&k| pbar[k] * (-(v[k] - vmin) / lam).exp()).collect();
        let z: f64 = w.iter().sum();
        let mut kl = 0.0;
        let mut ev = 0.0;
        for (j, &k) in supp.iter().enumerate() {
            let p = w[j] / z;
            if p > 0.0 {
                kl += p * (p / pbar[k]).ln();
                ev += p * v[k];
            }
        }
        (kl, -ev)
    };
    let mass: f64 = supp.iter().filter(|&&k| v[k] == vmin).map(|&k| pbar[k]).sum();
    if beta >= -mass.ln() {
        return Ok(-vmin);
    }
    let (mut lo, mut hi) = (1.0, 1.0);
    while tilt(lo).0 <= beta {
        lo *= 0.5;
    }
    while tilt(hi).0 > beta {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if tilt(mid).0 > beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(tilt(hi).1)
}

/// Value and optimal strategies of the zero-sum game `max_x min_y xᵀ M y` by enumerating
/// equal-size supports.
pub fn oracle_matrix_game(m: &Mat) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (r, c) = (m.rows, m.cols);
    if r == 0 || c == 0 {
        return Err(dim("empty payoff matrix"));
    }
    if r > 10 || c > 10 {
        return Err(Error::TooLarge { what: "actions for support enumeration", size: r.max(c), limit: 10 });
    }
    let scale = 1.0 + m.data.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let tol = 1e-10 * scale;
    for k in 1..=r.min(c) {
        for rs in subsets(r, k) {
            for cs in subsets(c, k) {
                // y on cs, value v: Σ_j M[i][j] y_j - v = 0 for i ∈ rs, Σ y = 1.
                let mut a = vec![vec![0.0; k + 1]; k + 1];
                let mut b = vec![0.0; k + 1];
                for (e, &i) in rs.iter().enumerate() {
                    for (f, &j) in cs.iter().enumerate() {
                        a[e][f] = m.get(i, j);
                    }
                    a[e][k] = -1.0;
                }
                a[k][..k].iter_mut().for_each(|x| *x = 1.0);
                b[k] = 1.0;
                let Some(ys) = gauss(a, b) else { continue };
                let mut a = vec![vec![0.0; k + 1]; k + 1];
                let mut b = vec![0.0; k + 1];
                for (f, &j) in cs.iter().enumerate() {
                    for (e, &i) in rs.iter().enumerate() {
                        a[f][e] = m.get(i, j);
                    }
                    a[f][k] = -1.0;
                }
                a[k][..k].iter_mut().for_each(|x| *x = 1.0);
                b[k] = 1.0;
                let Some(xs) = gauss(a, b) else { continue };
                if ys[..k].iter().chain(&xs[..k]).any(|&p| p < -1e-12) {
                    continue;
                }
                let v = ys[k];
                let mut x = vec![0.0; r];
                let mut y = vec![0.0; c];
                for (e, &i) in rs.iter().enumerate() {
                    x[i] = xs[e].max(0.0);
                }
                for (f, &j) in cs.iter().enumerate() {
                    y[j] = ys[f].max(0.0);
                }
                let rows_ok = (0..r).all(|i| (0..c).map(|j| m.get(i, j) * y[j]).sum::<f64>() <= v + tol);
                let cols_ok = (0..c).all(|j| (0..r).map(|i| m.get(i, j) * x[i]).sum::<f64>() >= v - tol);
                if rows_ok && cols_ok {
                    return Ok((v, x, y));
                }
            }
        }
    }
    Err(Error::Unsupported("degenerate matrix game: no equal-size support equilibrium".into()))
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut cur = vec![];
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// Nominal Shapley backward induction of a two-player zero-sum game.
pub fn oracle_shapley(game: &Game) -> Result<(ValueTable, Policy)> {
    if game.num_players != 2 || !game.zero_sum {
        return Err(Error::Unsupported("Shapley recursion needs a two-player zero-sum game".into()));
    }
    let (n1, n2) = (game.actions[0], game.actions[1]);
    let mut vt = ValueTable::zeros(2, game.horizon, game.states);
    let mut pi = vec![vec![vec![vec![]; game.states]; game.horizon]; 2];
    for h in (0..game.horizon).rev() {
        for s in 0..game.states {
            let m = Mat::from_fn(n1, n2, |i, j| {
                let a = i * n2 + j;
                let mut x = game.rewards[0][h][s][a];
                if h + 1 < game.horizon {
                    x += game.transitions[h][s][a].iter().zip(&vt.v[0][h + 1]).map(|(p, w)| p * w).sum::<f64>();
                }
                x
            });
            let (v, x, y) = oracle_matrix_game(&m)?;
            vt.v[0][h][s] = v;
            vt.v[1][h][s] = -v;
            pi[0][h][s] = x;
            pi[1][h][s] = y;
        }
    }
    Ok((vt, Policy { pi }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{random_game, RandomGameConfig};

    #[test]
    fn interval_matches_corner_enumeration() {
        let joint = JointActions::new(&[2, 2]).unwrap();
        let lo = vec![-1.0, -0.5, -2.0, 0.0];
        let hi = vec![0.5, 1.0, 0.0, 3.0];
        let y = vec![0.3, -0.7, -1.1, 0.2];
        let set = RewardSet::Interval { lo: lo.clone(), hi: hi.clone() };
        let est = oracle_set_support(&set, 0, &joint, None, &y, &OracleConfig::default()).unwrap();
        let mut best = f64::NEG_INFINITY;
        for mask in 0..16 {
            let v: f64 = (0..4).map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] } * y[k]).sum();
            best = best.max(v);
        }
        assert_eq!(est.value, best);
    }

    #[test]
    fn opnorm_ball_example() {
        let joint = JointActions::new(&[2, 2]).unwrap();
        let set = RewardSet::OpnormBall { alpha: 1.0, p: NormOrder::INF, q: NormOrder::TWO };
        let (x, y) = ([0.5, 0.5], [0.6, 0.4]);
        let yv: Vec<f64> = (0..4).map(|a| -x[a / 2] * y[a % 2]).collect();
        let cfg = OracleConfig { samples: 10_000, ..Default::default() };
        let est = oracle_set_support(&set, 0, &joint, None, &yv, &cfg).unwrap();
        let exact = 0.5 * 0.52f64.sqrt();
        assert!(est.value <= exact + 1e-9);
        assert!(exact - est.value < 1e-3, "{} vs {exact}", est.value);
    }

    #[test]
    fn simplex_grid() {
        let (x, v) = oracle_simplex_grid_max(|x| 0.2 * x[0] + 0.7 * x[1] + 0.1 * x[2], 3, 10).unwrap();
        assert_eq!(x, vec![0.0, 1.0, 0.0]);
        assert!((v - 0.7).abs() < 1e-15);
        assert!(oracle_simplex_grid_max(|_| 0.0, 8, 1000).is_err());
    }

    #[test]
    fn mc_matches_deterministic_chain() {
        let spec = crate::game::GameSpec {
            num_players: 1,
            states: 1,
            actions: vec![1],
            horizon: 3,
            initial_state: 0,
            transitions: vec![vec![vec![vec![1.0]]]; 2],
            rewards: vec![vec![vec![vec![2.0]]; 3]],
            zero_sum: false,
        };
        let g = spec.validate().unwrap();
        let e = oracle_mc_eval(&g, &Policy::uniform(&g), 100, 1).unwrap();
        assert_eq!(e.mean, vec![6.0]);
        assert_eq!(e.stderr, vec![0.0]);
    }

    #[test]
    fn mc_is_seed_deterministic() {
        let g = random_game(&RandomGameConfig::two_player(3, 2, 3, false, 4)).unwrap();
        let p = Policy::uniform(&g);
        let a = oracle_mc_eval(&g, &p, 20_000, 7).unwrap();
        let b = oracle_mc_eval(&g, &p, 20_000, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tv_line_search_example() {
        let v = oracle_transition_support(&Divergence::Tv, &[0.5, 0.5], &[0.0, 1.0], 0.25).unwrap();
        assert!((v + 0.25).abs() < 1e-12);
    }

    #[test]
    fn kl_tilting_limits() {
        assert!((oracle_kl_tilting(&[0.5, 0.5], &[0.0, 1.0], 0.0).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(oracle_kl_tilting(&[0.5, 0.5], &[0.0, 1.0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn matrix_game_example() {
        let m = Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let (v, x, y) = oracle_matrix_game(&m).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-14);
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-14 && (y[0] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn w1_on_two_points_is_scaled_tv() {
        let d = Divergence::W1(vec![vec![0.0, 2.0], vec![2.0, 0.0]]);
        assert!((d.eval(&[0.8, 0.2], &[0.5, 0.5]) - 0.6).abs() < 1e-15);
    }
}
