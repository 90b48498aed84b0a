//! Transition uncertainty sets and the support function `σ_P(-v) = sup_{P ∈ P} <P, -v>`.
//!
//! For every family there is a dual (regularizer-side) evaluation and an explicit worst-case
//! distribution attaining it.

use serde::{Deserialize, Serialize};

use crate::error::{dim, param, Result};
use crate::linalg::{dot, dual_vector, golden_min, log_sum_exp, norm, NormOrder};

/// Uncertainty set over next-state distributions at one `(step, state)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TransitionSet {
    Singleton,
    /// s-rectangular ball `{P* + E : ||E||_{q→p*} <= β}` with `E ∈ R^{S × A}`.
    OpnormBall { beta: f64, p: NormOrder, q: NormOrder },
    /// Total-variation ball per joint action.
    SaTv { beta: Vec<f64> },
    /// KL ball `KL(P || P*) <= β(a)` per joint action.
    SaKl { beta: Vec<f64> },
    /// χ² ball `Σ (P - P*)² / P* <= β(a)` per joint action.
    SaChi2 { beta: Vec<f64> },
    /// Wasserstein-1 ball under `metric` per joint action.
    SaWasserstein { beta: Vec<f64>, metric: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualResult {
    /// `σ(-v) = -min_P E_P[v]`.
    pub value: f64,
    /// Optimal dual multiplier (`None` when the radius is zero).
    pub lambda: Option<f64>,
    /// A distribution attaining the value.
    pub worst: Vec<f64>,
}

fn check_inputs(pbar: &[f64], v: &[f64], beta: f64) -> Result<()> {
    if pbar.len() != v.len() || pbar.is_empty() {
        return Err(dim(format!("nominal has {} states, value has {}", pbar.len(), v.len())));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(param(format!("radius must be finite and non-negative, got {beta}")));
    }
    Ok(())
}

fn first_argmin(v: &[f64], mask: impl Fn(usize) -> bool) -> usize {
    let mut best = usize::MAX;
    for i in 0..v.len() {
        if mask(i) && (best == usize::MAX || v[i] < v[best]) {
            best = i;
        }
    }
    best
}

/// TV ball: move `min(β, 1 - p̄(s_min))` mass onto the lowest-value state, taking it from the
/// highest-value states first. Expected linear time (weighted selection instead of a sort).
pub fn sa_dual_tv(pbar: &[f64], v: &[f64], beta: f64) -> Result<DualResult> {
    check_inputs(pbar, v, beta)?;
    let smin = first_argmin(v, |_| true);
    let mut worst = pbar.to_vec();
    let budget = beta.min(1.0 - pbar[smin]).max(0.0);
    if budget > 0.0 {
        let mut items: Vec<(f64, f64, usize)> = (0..v.len())
            .filter(|&s| s != smin && pbar[s] > 0.0)
            .map(|s| (v[s], pbar[s], s))
            .collect();
        // Descending value, then ascending index.
        let cmp = |a: &(f64, f64, usize), b: &(f64, f64, usize)| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2));
        let mut remaining = budget;
        let mut slice: &mut [(f64, f64, usize)] = &mut items;
        while remaining > 0.0 && !slice.is_empty() {
            let k = slice.len() / 2;
            slice.select_nth_unstable_by(k, cmp);
            let left_mass: f64 = slice[..k].iter().map(|t| t.1).sum();
            if left_mass >= remaining {
                slice = &mut slice[..k];
                continue;
            }
            for t in &slice[..k] {
                worst[t.2] = 0.0;
            }
            remaining -= left_mass;
            let (_, pm, ps) = slice[k];
            if pm >= remaining {
                let left = pm - remaining;
                worst[ps] = if left <= 4.0 * f64::EPSILON { 0.0 } else { left };
                remaining = 0.0;
            } else {
                worst[ps] = 0.0;
                remaining -= pm;
                slice = &mut slice[k + 1..];
            }
        }
        let rest: f64 = (0..worst.len()).filter(|&s| s != smin).map(|s| worst[s]).sum();
        worst[smin] = 1.0 - rest;
    }
    let value = -dot(&worst, v);
    Ok(DualResult { value, lambda: None, worst })
}

/// TV support through its truncation dual
/// `min_t { -E_p̄[min(v, t)] + β (t - min v) }`, `t ∈ [min v, max v]`.
pub fn tv_truncation_dual(pbar: &[f64], v: &[f64], beta: f64) -> Result<f64> {
    check_inputs(pbar, v, beta)?;
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let vmin = v[order[0]];
    // f(t) at t = v_(k): states below contribute their value, the rest contribute t.
    let mut below = 0.0;
    let mut mass_below = 0.0;
    let mut best = f64::INFINITY;
    for (k, &s) in order.iter().enumerate() {
        let t = v[s];
        if k == 0 || t != v[order[k - 1]] {
            let f = -(below + (1.0 - mass_below) * t) + beta * (t - vmin);
            best = best.min(f);
        }
        below += pbar[s] * v[s];
        mass_below += pbar[s];
    }
    Ok(best)
}

/// KL ball dual `min_{λ>=0} { βλ + λ ln E_p̄ exp(-v/λ) }`, with the `λ → 0` limit
/// `-min_{supp p̄} v` compared explicitly.
pub fn sa_dual_kl(pbar: &[f64], v: &[f64], beta: f64) -> Result<DualResult> {
    check_inputs(pbar, v, beta)?;
    if beta == 0.0 {
        return Ok(DualResult { value: -dot(pbar, v), lambda: None, worst: pbar.to_vec() });
    }
    let supp: Vec<usize> = (0..v.len()).filter(|&s| pbar[s] > 0.0).collect();
    let vmin = supp.iter().map(|&s| v[s]).fold(f64::INFINITY, f64::min);
    let vmax = supp.iter().map(|&s| v[s]).fold(f64::NEG_INFINITY, f64::max);
    let range = vmax - vmin;
    let boundary_worst = || {
        let mass: f64 = supp.iter().filter(|&&s| v[s] == vmin).map(|&s| pbar[s]).sum();
        (0..v.len()).map(|s| if pbar[s] > 0.0 && v[s] == vmin { pbar[s] / mass } else { 0.0 }).collect()
    };
    if range == 0.0 {
        return Ok(DualResult { value: -vmin, lambda: Some(0.0), worst: pbar.to_vec() });
    }
    let logp: Vec<f64> = supp.iter().map(|&s| pbar[s].ln()).collect();
    let g = |lambda: f64| -> f64 {
        let z: Vec<f64> = supp.iter().zip(&logp).map(|(&s, lp)| lp - (v[s] - vmin) / lambda).collect();
        beta * lambda - vmin + lambda * log_sum_exp(&z)
    };
    // Sub-Gaussian bound: KL(p_λ || p̄) <= range² / (8 λ²), so λ* <= range / sqrt(8β).
    let hi = (2.0 * range / (8.0 * beta).sqrt()).max(1e-9);
    let (lambda, val) = golden_min(g, 0.0f64.max(hi * 1e-12), hi, 1e-12);
    if val >= -vmin {
        return Ok(DualResult { value: -vmin, lambda: Some(0.0), worst: boundary_worst() });
    }
    // The objective is flat at its minimum, so golden section only pins λ to about sqrt(ε).
    // Sharpen it on the stationarity condition KL(p_λ || p̄) = β, which is decreasing in λ.
    let kl_at = |lambda: f64| -> f64 {
        let z: Vec<f64> = supp.iter().zip(&logp).map(|(&s, lp)| lp - (v[s] - vmin) / lambda).collect();
        let lz = log_sum_exp(&z);
        supp.iter().zip(&z).map(|(&s, zi)| (zi - lz).exp() * (-(v[s] - vmin) / lambda - lz)).sum()
    };
    let (mut a, mut b) = (lambda * 0.5, lambda * 2.0);
    while kl_at(a) < beta && a > 1e-300 {
        a *= 0.5;
    }
    while kl_at(b) > beta && b < 1e300 {
        b *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if kl_at(m) > beta {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(DualResult { value: g(b), lambda: Some(b), worst: kl_tilt(pbar, v, b) })
}

/// Exponential tilt `p ∝ p̄ exp(-v/λ)`.
pub fn kl_tilt(pbar: &[f64], v: &[f64], lambda: f64) -> Vec<f64> {
    let logw: Vec<f64> = pbar
        .iter()
        .zip(v)
        .map(|(&p, &x)| if p > 0.0 { p.ln() - x / lambda } else { f64::NEG_INFINITY })
        .collect();
    let z = log_sum_exp(&logw);
    logw.iter().map(|l| (l - z).exp()).collect()
}

/// χ² ball dual `min_t { -E_p̄[w] + sqrt(β Var_p̄(w)) }` with `w = min(v, t)`. Between
/// consecutive values the objective is convex in `t` with a closed-form stationary point, so each
/// segment is solved exactly.
pub fn sa_dual_chi2(pbar: &[f64], v: &[f64], beta: f64) -> Result<DualResult> {
    check_inputs(pbar, v, beta)?;
    if beta == 0.0 {
        return Ok(DualResult { value: -dot(pbar, v), lambda: None, worst: pbar.to_vec() });
    }
    let mut supp: Vec<usize> = (0..v.len()).filter(|&s| pbar[s] > 0.0).collect();
    supp.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let sb = beta.sqrt();
    let total: f64 = supp.iter().map(|&s| pbar[s]).sum();
    // Work with x = v - min v so that the lowest segment is exact and shifts cancel.
    let base = v[supp[0]];
    let x = |s: usize| v[s] - base;
    // Running weighted mean and centered second moment of the states below the cut.
    let (mut mass, mut mu, mut m2) = (0.0, 0.0, 0.0);
    let mut best = (f64::INFINITY, 0.0, 1usize);
    for (k, &s) in supp.iter().enumerate() {
        let w = pbar[s];
        mass += w;
        if k == 0 {
            mu = x(s);
        } else {
            let d = x(s) - mu;
            mu += d * w / mass;
            m2 += w * d * (x(s) - mu);
        }
        let b = total - mass;
        // w = min(v, t): lower part (mass, mu, m2) plus mass b at t.
        let objective = |t: f64| -> f64 {
            let e = t - mu;
            let mean = (mass * mu + b * t) / total;
            let var = ((m2 + mass * b / total * e * e) / total).max(0.0);
            -mean + (beta * var).sqrt()
        };
        let lo = x(s);
        let hi = supp.get(k + 1).map_or(lo, |&n| x(n));
        let t = if hi > lo && b > 0.0 {
            let denom = mass * (beta * mass - b);
            let star = if denom > 0.0 { mu + (m2 * total / denom).sqrt() } else { f64::INFINITY };
            star.clamp(lo, hi)
        } else {
            lo
        };
        let f = objective(t).min(objective(lo));
        if f < best.0 {
            best = (f, if objective(t) <= objective(lo) { t } else { lo }, k + 1);
        }
    }
    let (value, t, _) = best;
    let (value, t) = (value - base, t + base);
    let w: Vec<f64> = v.iter().map(|&x| x.min(t)).collect();
    let mean: f64 = supp.iter().map(|&s| pbar[s] * w[s]).sum();
    let var: f64 = supp.iter().map(|&s| pbar[s] * (w[s] - mean).powi(2)).sum();
    // At t = min v the optimality condition is exactly feasibility of the point mass.
    let worst = if t <= v[supp[0]] || var <= 1e-300 {
        let vmin = v[supp[0]];
        let mass: f64 = supp.iter().filter(|&&s| v[s] == vmin).map(|&s| pbar[s]).sum();
        (0..v.len()).map(|s| if pbar[s] > 0.0 && v[s] == vmin { pbar[s] / mass } else { 0.0 }).collect()
    } else {
        let sd = var.sqrt();
        let raw: Vec<f64> =
            (0..v.len()).map(|s| (pbar[s] * (1.0 + (mean - w[s]) * sb / sd)).max(0.0)).collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / z).collect()
    };
    Ok(DualResult { value, lambda: Some(t), worst })
}

fn check_metric(metric: &[Vec<f64>], n: usize) -> Result<()> {
    if metric.len() != n || metric.iter().any(|r| r.len() != n) {
        return Err(dim(format!("metric must be {n}×{n}")));
    }
    for (i, row) in metric.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            if !(d.is_finite() && d >= 0.0) || (i == j && d != 0.0) {
                return Err(param(format!("metric entry ({i},{j}) = {d} is not a valid distance")));
            }
        }
    }
    Ok(())
}

/// Lower envelope breakpoints of `λ ↦ min_{s'} v(s') + λ ρ(s̃, s')` on `λ > 0`.
fn envelope_breakpoints(v: &[f64], rho: &[f64], out: &mut Vec<f64>) {
    let mut lines: Vec<(f64, f64)> = rho.iter().zip(v).map(|(&r, &x)| (r, x)).collect();
    // Slope descending; for equal slopes keep the smaller intercept.
    lines.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
    lines.dedup_by(|b, a| a.0 == b.0);
    let meet = |l1: (f64, f64), l2: (f64, f64)| (l2.1 - l1.1) / (l1.0 - l2.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for l in lines {
        while hull.len() >= 2 {
            let n = hull.len();
            if meet(hull[n - 2], l) <= meet(hull[n - 2], hull[n - 1]) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(l);
    }
    for w in hull.windows(2) {
        let x = meet(w[0], w[1]);
        if x > 0.0 && x.is_finite() {
            out.push(x);
        }
    }
}

/// Wasserstein-1 dual `min_{λ>=0} { λβ - Σ p̄(s̃) min_{s'} (v(s') + λ ρ(s̃, s')) }`, evaluated at
/// the envelope breakpoints. The worst distribution comes from [`wasserstein_primal`].
pub fn sa_dual_wasserstein(pbar: &[f64], v: &[f64], beta: f64, metric: &[Vec<f64>]) -> Result<DualResult> {
    check_inputs(pbar, v, beta)?;
    check_metric(metric, v.len())?;
    if beta == 0.0 {
        return Ok(DualResult { value: -dot(pbar, v), lambda: None, worst: pbar.to_vec() });
    }
    let supp: Vec<usize> = (0..v.len()).filter(|&s| pbar[s] > 0.0).collect();
    let f = |lambda: f64| -> f64 {
        let mut acc = lambda * beta;
        for &st in &supp {
            let inner = v.iter().zip(&metric[st]).map(|(&x, &r)| x + lambda * r).fold(f64::INFINITY, f64::min);
            acc -= pbar[st] * inner;
        }
        acc
    };
    let mut cand = vec![0.0];
    for &st in &supp {
        envelope_breakpoints(v, &metric[st], &mut cand);
    }
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    // f is convex piecewise linear: binary search for the first non-negative forward difference.
    let (mut lo, mut hi) = (0usize, cand.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if f(cand[mid + 1]) >= f(cand[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let lambda = cand[lo];
    let value = f(lambda);
    let (_, worst) = wasserstein_primal(pbar, v, beta, metric)?;
    Ok(DualResult { value, lambda: Some(lambda), worst })
}

/// Primal W1 worst case as a fractional multiple-choice knapsack: every unit of mass at `s̃`
/// may move to `s'` at cost `ρ(s̃, s')` and gain `v(s̃) - v(s')`. Returns `(value, distribution)`.
pub fn wasserstein_primal(pbar: &[f64], v: &[f64], beta: f64, metric: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    check_inputs(pbar, v, beta)?;
    check_metric(metric, v.len())?;
    let n = v.len();
    let mut worst = vec![0.0; n];
    // (efficiency, gain increment, cost increment, source, from, to) for every hull segment.
    let mut segs: Vec<(f64, f64, f64, usize, usize, usize)> = Vec::new();
    let mut start = vec![0usize; n];
    for st in 0..n {
        if pbar[st] == 0.0 {
            continue;
        }
        let mut opts: Vec<(f64, f64, usize)> = (0..n).map(|d| (metric[st][d], v[st] - v[d], d)).collect();
        opts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
        // Upper concave hull of (cost, gain), starting at the best free option.
        let mut hull: Vec<(f64, f64, usize)> = Vec::new();
        for o in opts {
            if let Some(last) = hull.last() {
                if o.1 <= last.1 {
                    continue;
                }
                if o.0 == last.0 {
                    continue;
                }
            }
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                // Drop b if it lies on or below the chord from a to o.
                if (b.1 - a.1) * (o.0 - a.0) <= (o.1 - a.1) * (b.0 - a.0) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(o);
        }
        start[st] = hull[0].2;
        for w in hull.windows(2) {
            let (dc, dg) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            segs.push((dg / dc, dg, dc, st, w[0].2, w[1].2));
        }
    }
    for st in 0..n {
        if pbar[st] > 0.0 {
            worst[start[st]] += pbar[st];
        }
    }
    segs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.3.cmp(&b.3)));
    let mut budget = beta - (0..n).filter(|&s| pbar[s] > 0.0).map(|s| pbar[s] * metric[s][start[s]]).sum::<f64>();
    // Segments of one source are consecutive in efficiency order because the hull is concave.
    for (_, _, dc, st, from, to) in segs {
        if budget <= 0.0 {
            break;
        }
        let full = pbar[st] * dc;
        let frac = if full <= budget { 1.0 } else { budget / full };
        let moved = pbar[st] * frac;
        worst[from] -= moved;
        worst[to] += moved;
        budget -= full * frac;
        if frac < 1.0 {
            break;
        }
    }
    for w in worst.iter_mut() {
        if *w < 0.0 && *w > -1e-15 {
            *w = 0.0;
        }
    }
    Ok((-dot(&worst, v), worst))
}

/// Which route to use when evaluating a TV ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Support function (greedy mass moving for TV).
    Support,
    /// Regularizer side (truncation dual for TV).
    Dual,
}

impl TransitionSet {
    pub fn family(&self) -> &'static str {
        match self {
            TransitionSet::Singleton => "singleton",
            TransitionSet::OpnormBall { .. } => "opnorm_ball",
            TransitionSet::SaTv { .. } => "sa_tv",
            TransitionSet::SaKl { .. } => "sa_kl",
            TransitionSet::SaChi2 { .. } => "sa_chi2",
            TransitionSet::SaWasserstein { .. } => "sa_wasserstein",
        }
    }

    pub fn radii(&self) -> Option<&[f64]> {
        match self {
            TransitionSet::SaTv { beta }
            | TransitionSet::SaKl { beta }
            | TransitionSet::SaChi2 { beta }
            | TransitionSet::SaWasserstein { beta, .. } => Some(beta),
            _ => None,
        }
    }

    pub fn validate(&self, states: usize, joint_actions: usize) -> Result<()> {
        if let Some(b) = self.radii() {
            if b.len() != joint_actions {
                return Err(dim(format!("{} needs {joint_actions} radii, got {}", self.family(), b.len())));
            }
            if let Some(x) = b.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(param(format!("radius {x} must be finite and non-negative")));
            }
        }
        match self {
            TransitionSet::OpnormBall { beta, p, q } => {
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(param(format!("radius {beta} must be finite and non-negative")));
                }
                p.check()?;
                q.check()?;
            }
            TransitionSet::SaWasserstein { metric, .. } => check_metric(metric, states)?,
            _ => {}
        }
        Ok(())
    }

    /// Whether the worst case decomposes over joint actions (bilinear in the policy).
    pub fn is_sa_rectangular(&self) -> bool {
        !matches!(self, TransitionSet::OpnormBall { .. })
    }

    pub fn is_singleton(&self) -> bool {
        match self {
            TransitionSet::Singleton => true,
            TransitionSet::OpnormBall { beta, .. } => *beta == 0.0,
            _ => self.radii().is_some_and(|b| b.iter().all(|&x| x == 0.0)),
        }
    }

    /// `σ_{P_a}(-v)` for joint action `a` of an (s,a)-rectangular set.
    pub fn action_dual(&self, a: usize, pbar: &[f64], v: &[f64], route: Route) -> Result<DualResult> {
        match self {
            TransitionSet::Singleton => Ok(DualResult { value: -dot(pbar, v), lambda: None, worst: pbar.to_vec() }),
            TransitionSet::SaTv { beta } => {
                let mut r = sa_dual_tv(pbar, v, beta[a])?;
                if route == Route::Dual {
                    r.value = tv_truncation_dual(pbar, v, beta[a])?;
                }
                Ok(r)
            }
            TransitionSet::SaKl { beta } => sa_dual_kl(pbar, v, beta[a]),
            TransitionSet::SaChi2 { beta } => sa_dual_chi2(pbar, v, beta[a]),
            TransitionSet::SaWasserstein { beta, metric } => sa_dual_wasserstein(pbar, v, beta[a], metric),
            TransitionSet::OpnormBall { .. } => {
                Err(param("the s-rectangular ball has no per-action support"))
            }
        }
    }

    /// `σ_P(-v μᵀ)` where `rows[a]` is the nominal next-state distribution of joint action `a`.
    pub fn support(&self, rows: &[Vec<f64>], v: &[f64], mu: &[f64], route: Route) -> Result<f64> {
        if rows.len() != mu.len() {
            return Err(dim("one nominal row per joint action is required"));
        }
        match self {
            TransitionSet::OpnormBall { beta, p, q } => {
                let nominal: f64 = rows.iter().zip(mu).map(|(r, m)| m * dot(r, v)).sum();
                Ok(-nominal + beta * norm(v, *p) * norm(mu, *q))
            }
            _ => {
                let mut acc = 0.0;
                for (a, (row, &m)) in rows.iter().zip(mu).enumerate() {
                    if m > 0.0 {
                        acc += m * self.action_dual(a, row, v, route)?.value;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// Worst-case model: one (possibly non-stochastic, for the ball) row per joint action.
    pub fn worst_case_rows(&self, rows: &[Vec<f64>], v: &[f64], mu: &[f64]) -> Result<Vec<Vec<f64>>> {
        match self {
            TransitionSet::OpnormBall { beta, p, q } => {
                let u = dual_vector(v, *p);
                let w = dual_vector(mu, *q);
                Ok(rows
                    .iter()
                    .zip(&w)
                    .map(|(r, &wa)| r.iter().zip(&u).map(|(x, us)| x - beta * us * wa).collect())
                    .collect())
            }
            _ => rows
                .iter()
                .enumerate()
                .map(|(a, r)| {
                    if mu[a] > 0.0 {
                        self.action_dual(a, r, v, Route::Support).map(|d| d.worst)
                    } else {
                        Ok(r.clone())
                    }
                })
                .collect(),
        }
    }

    /// `min_{P ∈ P} E_μ[P v]` through the explicit worst-case model.
    pub fn worst_case_expectation(&self, rows: &[Vec<f64>], v: &[f64], mu: &[f64]) -> Result<f64> {
        let worst = self.worst_case_rows(rows, v, mu)?;
        Ok(worst.iter().zip(mu).filter(|(_, m)| **m > 0.0).map(|(r, m)| m * dot(r, v)).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: [f64; 2] = [0.5, 0.5];
    const V: [f64; 2] = [0.0, 1.0];

    #[test]
    fn tv_example() {
        let r = sa_dual_tv(&P, &V, 0.25).unwrap();
        assert!((r.value + 0.25).abs() < 1e-15);
        assert_eq!(r.worst, vec![0.75, 0.25]);
        assert!((tv_truncation_dual(&P, &V, 0.25).unwrap() + 0.25).abs() < 1e-15);
    }

    #[test]
    fn tv_saturates_at_argmin() {
        let r = sa_dual_tv(&[0.2, 0.3, 0.5], &[2.0, 1.0, 3.0], 5.0).unwrap();
        assert_eq!(r.worst, vec![0.0, 1.0, 0.0]);
        assert_eq!(r.value, -1.0);
    }

    #[test]
    fn tv_greedy_matches_truncation_dual() {
        let mut rng = crate::game::rng(3);
        for _ in 0..200 {
            let n = 1 + (rand::Rng::random::<u32>(&mut rng) % 7) as usize;
            let p = crate::game::random_distribution(&mut rng, n);
            let v: Vec<f64> = (0..n).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let b = rand::Rng::random::<f64>(&mut rng);
            let g = sa_dual_tv(&p, &v, b).unwrap();
            let d = tv_truncation_dual(&p, &v, b).unwrap();
            assert!((g.value - d).abs() < 1e-12, "{p:?} {v:?} {b}: {} vs {d}", g.value);
        }
    }

    #[test]
    fn kl_example() {
        let r = sa_dual_kl(&P, &V, 0.1).unwrap();
        assert!((r.value + 0.280_205_373_838_590_3).abs() < 1e-9, "{}", r.value);
        assert!((r.lambda.unwrap() - 1.0599).abs() < 1e-3);
        let kl: f64 = r.worst.iter().zip(&P).map(|(q, p)| q * (q / p).ln()).sum();
        assert!((kl - 0.1).abs() < 1e-7);
    }

    #[test]
    fn kl_zero_radius_and_boundary() {
        let r = sa_dual_kl(&P, &V, 0.0).unwrap();
        assert_eq!(r.value, -0.5);
        let r = sa_dual_kl(&P, &V, 1.0).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.worst, vec![1.0, 0.0]);
    }

    #[test]
    fn chi2_example() {
        let r = sa_dual_chi2(&P, &V, 0.25).unwrap();
        assert!((r.value + 0.25).abs() < 1e-12, "{}", r.value);
        assert!((r.worst[0] - 0.75).abs() < 1e-9);
    }

    #[test]
    fn wasserstein_discrete_metric_is_tv() {
        let m = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let r = sa_dual_wasserstein(&P, &V, 0.25, &m).unwrap();
        assert!((r.value + 0.25).abs() < 1e-15);
        let (pv, w) = wasserstein_primal(&P, &V, 0.25, &m).unwrap();
        assert!((pv + 0.25).abs() < 1e-15);
        assert_eq!(w, vec![0.75, 0.25]);
    }

    #[test]
    fn wasserstein_primal_matches_dual() {
        let mut rng = crate::game::rng(11);
        for _ in 0..200 {
            let n = 2 + (rand::Rng::random::<u32>(&mut rng) % 5) as usize;
            let pts: Vec<f64> = (0..n).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let m: Vec<Vec<f64>> = pts.iter().map(|a| pts.iter().map(|b| (a - b).abs()).collect()).collect();
            let p = crate::game::random_distribution(&mut rng, n);
            let v: Vec<f64> = (0..n).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let b = 0.5 * rand::Rng::random::<f64>(&mut rng);
            let d = sa_dual_wasserstein(&p, &v, b, &m).unwrap();
            let (pv, _) = wasserstein_primal(&p, &v, b, &m).unwrap();
            assert!((d.value - pv).abs() < 1e-12, "{} vs {pv}", d.value);
        }
    }

    #[test]
    fn ball_worst_rows_attain_support() {
        let rows = vec![vec![0.2, 0.8], vec![0.6, 0.4], vec![0.5, 0.5]];
        let v = [1.0, -0.5];
        let mu = [0.2, 0.3, 0.5];
        let set = TransitionSet::OpnormBall { beta: 0.3, p: NormOrder(3.0), q: NormOrder::TWO };
        let s = set.support(&rows, &v, &mu, Route::Support).unwrap();
        let w = set.worst_case_expectation(&rows, &v, &mu).unwrap();
        assert!((s + w).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_metric() {
        let set = TransitionSet::SaWasserstein { beta: vec![0.1], metric: vec![vec![0.0, -1.0], vec![1.0, 0.0]] };
        assert!(set.validate(2, 1).is_err());
        assert!(sa_dual_tv(&[1.0], &[0.0, 1.0], 0.1).is_err());
        assert!(sa_dual_kl(&P, &V, -0.1).is_err());
    }
}
