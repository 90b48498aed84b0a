//! One-shot (stage) games: regularized best responses, regularized saddle points and
//! equilibria of bimatrix games.

use crate::error::{dim, param, Error, Result};
use crate::linalg::{argmax, dot, dual_vector, log_sum_exp, norm, project_simplex, softmax, solve_linear, uniform, Mat, NormOrder};
use crate::reward::{Kernel, Regularizer};

/// `coef · ||x||_p`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormTerm {
    pub coef: f64,
    pub p: NormOrder,
}

/// Convex penalty on a player's own mixed action: optional kernel term plus norm terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OwnRegularizer {
    pub kernel: Option<(Kernel, f64)>,
    pub norms: Vec<NormTerm>,
}

impl OwnRegularizer {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn shannon(tau: f64) -> Self {
        Self::with_kernel(Kernel::Shannon, tau)
    }

    pub fn with_kernel(kernel: Kernel, tau: f64) -> Self {
        OwnRegularizer { kernel: Some((kernel, tau)), norms: vec![] }
    }

    pub fn pnorm(alpha: f64, p: NormOrder) -> Self {
        OwnRegularizer { kernel: None, norms: vec![NormTerm { coef: alpha, p }] }
    }

    /// Restriction of a separable regularizer; cross-player terms are rejected.
    pub fn from_regularizer(reg: &Regularizer) -> Result<Self> {
        reg.validate()?;
        match reg {
            Regularizer::Zero => Ok(Self::zero()),
            Regularizer::PNormOwn { alpha, p } => Ok(Self::pnorm(*alpha, *p)),
            Regularizer::DecomposableKernel { kernel, tau } => Ok(Self::with_kernel(kernel.clone(), *tau)),
            other => Err(Error::NotDecomposable(format!("{other:?} couples both players"))),
        }
    }

    pub fn validate(&self, actions: usize) -> Result<()> {
        if let Some((k, tau)) = &self.kernel {
            if !(tau.is_finite() && *tau >= 0.0) {
                return Err(param(format!("kernel temperature {tau}")));
            }
            k.validate(actions)?;
        }
        for t in &self.norms {
            t.p.check()?;
            if !(t.coef.is_finite() && t.coef >= 0.0) {
                return Err(param(format!("norm coefficient {}", t.coef)));
            }
        }
        Ok(())
    }

    fn active_kernel(&self) -> Option<(&Kernel, f64)> {
        self.kernel.as_ref().filter(|(_, t)| *t > 0.0).map(|(k, t)| (k, *t))
    }

    fn active_norms(&self) -> impl Iterator<Item = &NormTerm> {
        self.norms.iter().filter(|t| t.coef > 0.0 && t.p.0 != 1.0)
    }

    /// Contribution of ℓ1 terms, constant on the simplex.
    fn constant(&self) -> f64 {
        self.norms.iter().filter(|t| t.p.0 == 1.0).map(|t| t.coef).sum()
    }

    /// Whether the penalty is constant on the simplex.
    pub fn is_constant(&self) -> bool {
        self.active_kernel().is_none() && self.active_norms().next().is_none()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.norms.iter().map(|t| t.coef * norm(x, t.p)).sum::<f64>();
        if let Some((k, tau)) = self.active_kernel() {
            v += tau * k.penalty(x);
        }
        v
    }

    /// Entropic kernel handled in the prox: `(τ, ln μ)` (`ln μ = 0` for Shannon).
    fn entropic(&self, n: usize) -> Option<(f64, Vec<f64>)> {
        match self.active_kernel()? {
            (Kernel::Shannon, tau) => Some((tau, vec![0.0; n])),
            (Kernel::KlReference { reference }, tau) => Some((tau, reference.iter().map(|m| m.ln()).collect())),
            _ => None,
        }
    }

    /// Gradient of everything except an entropic kernel.
    fn smooth_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        if let Some((k, tau)) = self.active_kernel() {
            if !k.is_entropic() {
                for (gi, d) in g.iter_mut().zip(k.penalty_grad(x)) {
                    *gi += tau * d;
                }
            }
        }
        for t in self.active_norms() {
            for (gi, d) in g.iter_mut().zip(dual_vector(x, t.p)) {
                *gi += t.coef * d;
            }
        }
        g
    }

    fn full_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.smooth_grad(x);
        if let Some((k, tau)) = self.active_kernel() {
            if k.is_entropic() {
                for (gi, d) in g.iter_mut().zip(k.penalty_grad(x)) {
                    *gi += tau * d;
                }
            }
        }
        g
    }

    /// Rough curvature scale of the gradient-handled part, used for step sizes.
    fn curvature(&self, n: usize) -> f64 {
        let mut c = 0.0;
        if let Some((k, tau)) = self.active_kernel() {
            c += match k {
                Kernel::Tsallis => tau,
                Kernel::Renyi { q } => tau * (q / (1.0 - q)).abs() * n as f64,
                _ => 0.0,
            };
        }
        for t in self.active_norms() {
            c += t.coef * if t.p.is_inf() { 1.0 } else { (t.p.0 - 1.0).max(1.0) * (n as f64).sqrt() };
        }
        c
    }

    fn closed_form(&self) -> bool {
        if self.active_norms().next().is_none() {
            return !matches!(self.active_kernel(), Some((Kernel::Renyi { .. }, _)));
        }
        self.active_kernel().is_none() && self.active_norms().count() == 1 && self.active_norms().all(|t| t.p.is_inf())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub x: Vec<f64>,
    /// `<x, g> - Ω(x)` at the returned point.
    pub value: f64,
    /// Certified upper bound on the maximum.
    pub upper: f64,
}

fn objective(g: &[f64], reg: &OwnRegularizer, x: &[f64]) -> f64 {
    dot(g, x) - reg.value(x)
}

/// `argmax_x <x, g> - Ω(x)` over the simplex. Closed forms for the zero regularizer, entropy
/// kernels, Tsallis and a lone ℓ∞ term; otherwise mirror or projected-gradient ascent with
/// Armijo steps, stopped on the Frank-Wolfe gap. A warm start is never improved upon by less.
pub fn best_response_regularized(
    g: &[f64],
    reg: &OwnRegularizer,
    tol: f64,
    warm: Option<&[f64]>,
) -> Result<BestResponse> {
    let n = g.len();
    if n == 0 {
        return Err(dim("empty payoff vector"));
    }
    if let Some(w) = warm {
        if w.len() != n {
            return Err(dim("warm start length differs from payoff"));
        }
    }
    reg.validate(n)?;
    let c = reg.constant();
    let mut out = if reg.closed_form() {
        let x = match reg.active_kernel() {
            None => match reg.active_norms().next() {
                None => {
                    let mut x = vec![0.0; n];
                    x[argmax(g)] = 1.0;
                    x
                }
                Some(t) => linf_best_response(g, t.coef),
            },
            Some((Kernel::Shannon, tau)) => softmax(&g.iter().map(|v| v / tau).collect::<Vec<_>>()),
            Some((Kernel::KlReference { reference }, tau)) => {
                softmax(&g.iter().zip(reference).map(|(v, m)| v / tau + m.ln()).collect::<Vec<_>>())
            }
            Some((Kernel::Tsallis, tau)) => project_simplex(&g.iter().map(|v| (v + tau / 2.0) / tau).collect::<Vec<_>>()),
            Some((Kernel::Renyi { .. }, _)) => unreachable!(),
        };
        let value = match reg.active_kernel() {
            Some((Kernel::Shannon, tau)) => tau * log_sum_exp(&g.iter().map(|v| v / tau).collect::<Vec<_>>()) - c,
            Some((Kernel::KlReference { reference }, tau)) => {
                tau * log_sum_exp(&g.iter().zip(reference).map(|(v, m)| v / tau + m.ln()).collect::<Vec<_>>()) - c
            }
            _ => objective(g, reg, &x),
        };
        BestResponse { x, value, upper: value }
    } else {
        iterative_best_response(g, reg, tol, warm)
    };
    if let Some(w) = warm {
        let wv = objective(g, reg, w);
        if wv > out.value {
            out.x = w.to_vec();
            out.value = wv;
            out.upper = out.upper.max(wv);
        }
    }
    Ok(out)
}

/// `max <x, g> - c ||x||_∞`: optimal points are uniform on a top-k set.
fn linf_best_response(g: &[f64], c: f64) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..g.len()).collect();
    idx.sort_by(|&a, &b| g[b].total_cmp(&g[a]).then(a.cmp(&b)));
    let (mut best_k, mut best_v, mut sum) = (1, f64::NEG_INFINITY, 0.0);
    for (k, &i) in idx.iter().enumerate() {
        sum += g[i];
        let v = (sum - c) / (k + 1) as f64;
        if v > best_v + 1e-15 {
            best_v = v;
            best_k = k + 1;
        }
    }
    let mut x = vec![0.0; g.len()];
    for &i in &idx[..best_k] {
        x[i] = 1.0 / best_k as f64;
    }
    x
}

fn iterative_best_response(g: &[f64], reg: &OwnRegularizer, tol: f64, warm: Option<&[f64]>) -> BestResponse {
    let n = g.len();
    let entropic = reg.active_kernel().is_some_and(|(k, _)| k.is_entropic() || matches!(k, Kernel::Renyi { .. }));
    let mut x = match warm {
        Some(w) if entropic => w.iter().map(|v| 0.9 * v + 0.1 / n as f64).collect(),
        Some(w) => w.to_vec(),
        None => uniform(n),
    };
    let mut fx = objective(g, reg, &x);
    let scale = 1.0 + g.iter().fold(0.0f64, |m, v| m.max(v.abs())) + reg.curvature(n);
    let mut eta = 1.0 / scale;
    let mut fw = f64::INFINITY;
    for _ in 0..50_000 {
        let grad: Vec<f64> = g.iter().zip(reg.full_grad(&x)).map(|(a, b)| a - b).collect();
        fw = grad.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - dot(&grad, &x);
        if fw <= tol {
            break;
        }
        let mut moved = false;
        for _ in 0..60 {
            let cand = if entropic {
                let lw: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi.ln() + eta * gi).collect();
                softmax(&lw)
            } else {
                project_simplex(&x.iter().zip(&grad).map(|(xi, gi)| xi + eta * gi).collect::<Vec<_>>())
            };
            let fc = objective(g, reg, &cand);
            let lin: f64 = grad.iter().zip(cand.iter().zip(&x)).map(|(gi, (c, xi))| gi * (c - xi)).sum();
            if fc.is_finite() && fc >= fx + 1e-4 * lin && fc > fx {
                x = cand;
                fx = fc;
                eta *= 1.5;
                moved = true;
                break;
            }
            eta *= 0.5;
        }
        if !moved {
            break;
        }
    }
    BestResponse { value: fx, upper: fx + fw.max(0.0), x }
}

/// Route taken by the saddle solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    Auto,
    MirrorProx,
    SoftmaxFixedPoint,
    SupportPolish,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleOptions {
    pub max_iter: usize,
    pub path: SolverPath,
}

impl Default for SaddleOptions {
    fn default() -> Self {
        SaddleOptions { max_iter: 1_000_000, path: SolverPath::Auto }
    }
}

/// Equilibrium of a regularized two-matrix game where player 1 receives `xᵀ M1 y - Ω1(x)` and
/// player 2 receives `xᵀ M2 y - Ω2(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub values: [f64; 2],
    /// Sum of both players' best-response improvements.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub path: SolverPath,
}

/// Solution of a regularized zero-sum matrix game `max_x min_y xᵀMy - Ω1(x) + Ω2(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub path: SolverPath,
}

/// Best-response improvements of both players in the two-matrix game.
pub fn nash_gap(
    m1: &Mat,
    m2: &Mat,
    r1: &OwnRegularizer,
    r2: &OwnRegularizer,
    x: &[f64],
    y: &[f64],
    tol: f64,
) -> Result<[f64; 2]> {
    let g1 = m1.mul_vec(y);
    let g2 = m2.tmul_vec(x);
    let b1 = best_response_regularized(&g1, r1, tol, Some(x))?;
    let b2 = best_response_regularized(&g2, r2, tol, Some(y))?;
    Ok([
        (b1.value - objective(&g1, r1, x)).max(0.0),
        (b2.value - objective(&g2, r2, y)).max(0.0),
    ])
}

/// Duality gap of `(x, y)` in the regularized zero-sum game; never negative.
pub fn exploitability(m: &Mat, r1: &OwnRegularizer, r2: &OwnRegularizer, x: &[f64], y: &[f64]) -> Result<f64> {
    check_game(m, m, x, y)?;
    let g = nash_gap(m, &m.scale(-1.0), r1, r2, x, y, 1e-12)?;
    Ok(g[0] + g[1])
}

fn check_game(m1: &Mat, m2: &Mat, x: &[f64], y: &[f64]) -> Result<()> {
    if m1.rows != m2.rows || m1.cols != m2.cols {
        return Err(dim("payoff matrices differ in shape"));
    }
    if x.len() != m1.rows || y.len() != m1.cols {
        return Err(dim(format!("strategies {}×{} for a {}×{} game", x.len(), y.len(), m1.rows, m1.cols)));
    }
    if m1.data.iter().chain(&m2.data).any(|v| !v.is_finite()) {
        return Err(param("payoff matrix has non-finite entries"));
    }
    Ok(())
}

/// Solves the regularized zero-sum game to duality gap `eps`.
pub fn solve_zs_regularized(
    m: &Mat,
    r1: &OwnRegularizer,
    r2: &OwnRegularizer,
    eps: f64,
    opts: &SaddleOptions,
) -> Result<SaddleResult> {
    let sol = solve_regularized_bimatrix(m, &m.scale(-1.0), r1, r2, eps, opts)?;
    let value = m.bilinear(&sol.x, &sol.y) - r1.value(&sol.x) + r2.value(&sol.y);
    Ok(SaddleResult {
        x: sol.x,
        y: sol.y,
        value,
        duality_gap: sol.gap,
        iterations: sol.iterations,
        converged: sol.converged,
        path: sol.path,
    })
}

struct Tracker {
    best: Option<(f64, Vec<f64>, Vec<f64>, SolverPath)>,
}

impl Tracker {
    fn offer(&mut self, gap: f64, x: &[f64], y: &[f64], path: SolverPath) -> bool {
        let better = self.best.as_ref().is_none_or(|b| gap < b.0);
        if better {
            self.best = Some((gap, x.to_vec(), y.to_vec(), path));
        }
        better
    }

    fn gap(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.0)
    }
}

/// Equilibrium of the regularized two-matrix game by mirror-prox (entropic prox with the
/// Shannon/KL kernel folded in), an optional softmax fixed-point iteration for Shannon
/// regularizers, and an exact support polish when both penalties are constant.
pub fn solve_regularized_bimatrix(
    m1: &Mat,
    m2: &Mat,
    r1: &OwnRegularizer,
    r2: &OwnRegularizer,
    eps: f64,
    opts: &SaddleOptions,
) -> Result<StageSolution> {
    let (n, k) = (m1.rows, m1.cols);
    check_game(m1, m2, &uniform(n), &uniform(k))?;
    r1.validate(n)?;
    r2.validate(k)?;
    if !(eps > 0.0) {
        return Err(param(format!("tolerance must be positive, got {eps}")));
    }
    let br_tol = (eps * 1e-3).max(1e-15);
    let gap_of = |x: &[f64], y: &[f64]| -> Result<f64> {
        let g = nash_gap(m1, m2, r1, r2, x, y, br_tol)?;
        Ok(g[0] + g[1])
    };
    let polishable = r1.is_constant() && r2.is_constant();
    let mut tracker = Tracker { best: None };
    let mut iterations = 0usize;

    let x0 = uniform(n);
    let y0 = uniform(k);
    tracker.offer(gap_of(&x0, &y0)?, &x0, &y0, SolverPath::MirrorProx);

    let shannon = |r: &OwnRegularizer| match r.active_kernel() {
        Some((Kernel::Shannon, t)) if r.active_norms().next().is_none() => Some(t),
        _ => None,
    };
    let lmax = m1.max_abs().max(m2.max_abs());
    let try_fixed_point = match opts.path {
        SolverPath::SoftmaxFixedPoint => shannon(r1).is_some() && shannon(r2).is_some(),
        SolverPath::Auto => matches!((shannon(r1), shannon(r2)), (Some(a), Some(b)) if a.min(b) >= lmax),
        _ => false,
    };
    if try_fixed_point && tracker.gap() > eps {
        let (t1, t2) = (shannon(r1).unwrap(), shannon(r2).unwrap());
        let (mut x, mut y) = (x0.clone(), y0.clone());
        let mut stale = 0;
        let cap = opts.max_iter.min(100_000);
        while iterations < cap {
            iterations += 1;
            let bx = softmax(&m1.mul_vec(&y).iter().map(|v| v / t1).collect::<Vec<_>>());
            let by = softmax(&m2.tmul_vec(&x).iter().map(|v| v / t2).collect::<Vec<_>>());
            for (xi, b) in x.iter_mut().zip(bx) {
                *xi = 0.5 * *xi + 0.5 * b;
            }
            for (yi, b) in y.iter_mut().zip(by) {
                *yi = 0.5 * *yi + 0.5 * b;
            }
            let gap = gap_of(&x, &y)?;
            if tracker.offer(gap, &x, &y, SolverPath::SoftmaxFixedPoint) {
                stale = 0;
            } else {
                stale += 1;
            }
            if tracker.gap() <= eps || stale >= 100 {
                break;
            }
        }
    }

    if tracker.gap() > eps {
        let (ent1, ent2) = (r1.entropic(n), r2.entropic(k));
        let lip = lmax + r1.curvature(n).max(r2.curvature(k));
        let eta = if lip > 0.0 { 1.0 / (2.0 * lip) } else { 1.0 };
        let step = |l: &[f64], g: &[f64], smooth: &[f64], ent: &Option<(f64, Vec<f64>)>| -> Vec<f64> {
            let mut out: Vec<f64> = match ent {
                Some((tau, lr)) => l
                    .iter()
                    .zip(g.iter().zip(smooth))
                    .zip(lr)
                    .map(|((li, (gi, si)), lri)| (li + eta * (gi - si) + eta * tau * lri) / (1.0 + eta * tau))
                    .collect(),
                None => l.iter().zip(g.iter().zip(smooth)).map(|(li, (gi, si))| li + eta * (gi - si)).collect(),
            };
            let z = log_sum_exp(&out);
            for o in out.iter_mut() {
                *o -= z;
            }
            out
        };
        let (mut lx, mut ly) = (vec![-(n as f64).ln(); n], vec![-(k as f64).ln(); k]);
        let (mut ax, mut ay) = (vec![0.0; n], vec![0.0; k]);
        let mut count = 0.0;
        let closed = r1.closed_form() && r2.closed_form();
        let every = if closed { 10 } else { 100 };
        let mut checks = 0usize;
        while iterations < opts.max_iter {
            iterations += 1;
            let x = softmax(&lx);
            let y = softmax(&ly);
            let lxh = step(&lx, &m1.mul_vec(&y), &r1.smooth_grad(&x), &ent1);
            let lyh = step(&ly, &m2.tmul_vec(&x), &r2.smooth_grad(&y), &ent2);
            let (xh, yh) = (softmax(&lxh), softmax(&lyh));
            lx = step(&lx, &m1.mul_vec(&yh), &r1.smooth_grad(&xh), &ent1);
            ly = step(&ly, &m2.tmul_vec(&xh), &r2.smooth_grad(&yh), &ent2);
            count += 1.0;
            for (a, v) in ax.iter_mut().zip(&xh) {
                *a += (v - *a) / count;
            }
            for (a, v) in ay.iter_mut().zip(&yh) {
                *a += (v - *a) / count;
            }
            if iterations % every != 0 && iterations < opts.max_iter {
                continue;
            }
            checks += 1;
            let (x, y) = (softmax(&lx), softmax(&ly));
            tracker.offer(gap_of(&x, &y)?, &x, &y, SolverPath::MirrorProx);
            tracker.offer(gap_of(&ax, &ay)?, &ax, &ay, SolverPath::MirrorProx);
            if polishable && tracker.gap() > eps * 1e-3 && (checks % 10 == 1 || tracker.gap() <= eps) {
                for (px, py) in polish_candidates(m1, m2, &x, &y).into_iter().chain(polish_candidates(m1, m2, &ax, &ay)) {
                    let gp = gap_of(&px, &py)?;
                    tracker.offer(gp, &px, &py, SolverPath::SupportPolish);
                }
            }
            if tracker.gap() <= eps {
                break;
            }
        }
    }

    let (gap, x, y, path) = tracker.best.expect("at least one candidate");
    let values = [m1.bilinear(&x, &y) - r1.value(&x), m2.bilinear(&x, &y) - r2.value(&y)];
    Ok(StageSolution { x, y, values, gap, iterations, converged: gap <= eps, path })
}

fn top_k(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Solves the indifference conditions on supports `rows × cols` of equal size.
fn indifference(m1: &Mat, m2: &Mat, rows: &[usize], cols: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let k = rows.len();
    // y on cols: (M1 y)_i = u for i in rows, Σ y = 1.
    let mut a = vec![vec![0.0; k + 1]; k + 1];
    let mut b = vec![0.0; k + 1];
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            a[r][c] = m1.get(i, j);
        }
        a[r][k] = -1.0;
    }
    for c in 0..k {
        a[k][c] = 1.0;
    }
    b[k] = 1.0;
    let ys = solve_linear(a, b)?;
    let mut a = vec![vec![0.0; k + 1]; k + 1];
    let mut b = vec![0.0; k + 1];
    for (c, &j) in cols.iter().enumerate() {
        for (r, &i) in rows.iter().enumerate() {
            a[c][r] = m2.get(i, j);
        }
        a[c][k] = -1.0;
    }
    for r in 0..k {
        a[k][r] = 1.0;
    }
    b[k] = 1.0;
    let xs = solve_linear(a, b)?;
    let mut x = vec![0.0; m1.rows];
    let mut y = vec![0.0; m1.cols];
    for (r, &i) in rows.iter().enumerate() {
        x[i] = xs[r];
    }
    for (c, &j) in cols.iter().enumerate() {
        y[j] = ys[c];
    }
    Some((x, y))
}

fn polish_candidates(m1: &Mat, m2: &Mat, x: &[f64], y: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    for k in 1..=m1.rows.min(m1.cols) {
        let (rows, cols) = (top_k(x, k), top_k(y, k));
        if let Some((px, py)) = indifference(m1, m2, &rows, &cols) {
            if px.iter().chain(&py).all(|v| *v >= -1e-12) {
                let clean = |v: Vec<f64>| {
                    let v: Vec<f64> = v.into_iter().map(|a| a.max(0.0)).collect();
                    let s: f64 = v.iter().sum();
                    v.into_iter().map(|a| a / s).collect::<Vec<f64>>()
                };
                out.push((clean(px), clean(py)));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub payoffs: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SupportEnumeration {
    pub equilibria: Vec<Equilibrium>,
    /// Support pairs whose indifference system was singular (skipped).
    pub degenerate_pairs: usize,
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// All equilibria of the bimatrix game `(A, B)` found on equal-size support pairs, in order of
/// support size and then lexicographic supports.
pub fn solve_general_sum_support_enum(a: &Mat, b: &Mat) -> Result<SupportEnumeration> {
    check_game(a, b, &uniform(a.rows), &uniform(a.cols))?;
    const LIMIT: usize = 10;
    if a.rows > LIMIT || a.cols > LIMIT {
        return Err(Error::TooLarge { what: "actions per player", size: a.rows.max(a.cols), limit: LIMIT });
    }
    let tol = 1e-9 * (1.0 + a.max_abs().max(b.max_abs()));
    let mut out = SupportEnumeration::default();
    for k in 1..=a.rows.min(a.cols) {
        for rows in combinations(a.rows, k) {
            for cols in combinations(a.cols, k) {
                let Some((x, y)) = indifference(a, b, &rows, &cols) else {
                    out.degenerate_pairs += 1;
                    continue;
                };
                if x.iter().chain(&y).any(|v| *v < -1e-12) {
                    continue;
                }
                let x: Vec<f64> = x.into_iter().map(|v| v.max(0.0)).collect();
                let y: Vec<f64> = y.into_iter().map(|v| v.max(0.0)).collect();
                let ay = a.mul_vec(&y);
                let xb = b.tmul_vec(&x);
                let (u, w) = (dot(&x, &ay), dot(&xb, &y));
                if ay.iter().any(|v| *v > u + tol) || xb.iter().any(|v| *v > w + tol) {
                    continue;
                }
                let dup = out.equilibria.iter().any(|e| {
                    e.x.iter().zip(&x).chain(e.y.iter().zip(&y)).all(|(p, q)| (p - q).abs() < 1e-9)
                });
                if !dup {
                    out.equilibria.push(Equilibrium { x, y, payoffs: [u, w] });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(r: &[&[f64]]) -> Mat {
        Mat::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn shannon_best_response_example() {
        let br = best_response_regularized(&[1.0, 0.0], &OwnRegularizer::shannon(0.5), 1e-12, None).unwrap();
        assert!((br.x[0] - 0.880_797_077_977_882_3).abs() < 1e-12);
        assert!((br.x[1] - 0.119_202_922_022_117_6).abs() < 1e-12);
    }

    #[test]
    fn shannon_stage_value_on_zero_payoff() {
        let br = best_response_regularized(&[0.0, 0.0], &OwnRegularizer::shannon(1.0), 1e-12, None).unwrap();
        assert!((br.value - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn iterative_best_response_matches_grid() {
        let reg = OwnRegularizer::pnorm(0.7, NormOrder::TWO);
        let g = [0.3, 0.5, -0.1];
        let br = best_response_regularized(&g, &reg, 1e-12, None).unwrap();
        let mut best = f64::NEG_INFINITY;
        let res = 400;
        for i in 0..=res {
            for j in 0..=res - i {
                let x = [i as f64 / res as f64, j as f64 / res as f64, (res - i - j) as f64 / res as f64];
                best = best.max(objective(&g, &reg, &x));
            }
        }
        assert!(br.value >= best - 1e-12, "{} < {best}", br.value);
        assert!(br.value - best < 1e-4);
        assert!(br.upper - br.value < 1e-9);
    }

    #[test]
    fn linf_closed_form_matches_iterative_bound() {
        let g = [1.0, 0.9, 0.2];
        let x = linf_best_response(&g, 0.5);
        assert_eq!(x, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn unregularized_saddle_example() {
        let m = mat(&[&[2.0, 0.0], &[0.0, 1.0]]);
        let z = OwnRegularizer::zero();
        let r = solve_zs_regularized(&m, &z, &z, 1e-8, &SaddleOptions::default()).unwrap();
        assert!(r.converged);
        for (a, b) in r.x.iter().chain(&r.y).zip([1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((r.value - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn fixed_point_and_mirror_prox_agree() {
        let m = mat(&[&[1.0, -0.5, 0.2], &[-0.3, 0.4, 0.1]]);
        let r = OwnRegularizer::shannon(2.0);
        let fp = solve_zs_regularized(&m, &r, &r, 1e-11, &SaddleOptions { path: SolverPath::SoftmaxFixedPoint, ..Default::default() })
            .unwrap();
        let mp = solve_zs_regularized(&m, &r, &r, 1e-11, &SaddleOptions { path: SolverPath::MirrorProx, ..Default::default() })
            .unwrap();
        assert_eq!(fp.path, SolverPath::SoftmaxFixedPoint);
        assert_eq!(mp.path, SolverPath::MirrorProx);
        assert!((fp.value - mp.value).abs() < 1e-9);
    }

    #[test]
    fn fixed_point_falls_back_when_oscillating() {
        let m = mat(&[&[10.0, -10.0], &[-10.0, 10.0]]);
        let r = OwnRegularizer::shannon(0.05);
        let s = solve_zs_regularized(&m, &r, &r, 1e-8, &SaddleOptions { path: SolverPath::SoftmaxFixedPoint, ..Default::default() })
            .unwrap();
        assert!(s.converged);
        assert!((s.x[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn exploitability_is_nonnegative_and_zero_at_equilibrium() {
        let m = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let z = OwnRegularizer::zero();
        assert!(exploitability(&m, &z, &z, &[0.5, 0.5], &[0.5, 0.5]).unwrap().abs() < 1e-15);
        assert!((exploitability(&m, &z, &z, &[1.0, 0.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(exploitability(&m, &z, &z, &[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn battle_of_sexes_has_three_equilibria() {
        let a = mat(&[&[2.0, 0.0], &[0.0, 1.0]]);
        let b = mat(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let r = solve_general_sum_support_enum(&a, &b).unwrap();
        assert_eq!(r.equilibria.len(), 3);
        let mixed = &r.equilibria[2];
        assert!((mixed.x[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((mixed.y[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn prisoners_dilemma_unique_equilibrium() {
        let a = mat(&[&[-1.0, -3.0], &[0.0, -2.0]]);
        let b = a.transpose();
        let r = solve_general_sum_support_enum(&a, &b).unwrap();
        assert_eq!(r.equilibria.len(), 1);
        assert_eq!(r.equilibria[0].x, vec![0.0, 1.0]);
        assert_eq!(r.equilibria[0].y, vec![0.0, 1.0]);
    }

    #[test]
    fn degenerate_pairs_are_counted() {
        let a = mat(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let r = solve_general_sum_support_enum(&a, &a).unwrap();
        assert!(r.degenerate_pairs > 0);
        assert!(!r.equilibria.is_empty());
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(combinations(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }
}
