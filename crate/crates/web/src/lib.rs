//! Browser bindings. Every entry point takes and returns JSON text so the page needs no glue
//! beyond `JSON.parse`.

use rmg_core::linalg::Mat;
use rmg_core::reductions::{gensum_ne_gap, instance_gap, reduce, Bimatrix, Variant};
use rmg_core::stage::{solve_zs_regularized, OwnRegularizer, SaddleOptions};
use rmg_core::transition::{sa_dual_chi2, sa_dual_kl, sa_dual_tv, sa_dual_wasserstein, DualResult};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Deserialize)]
struct DualRequest {
    family: String,
    pbar: Vec<f64>,
    v: Vec<f64>,
    beta_max: f64,
    points: usize,
}

#[derive(Serialize)]
struct DualPoint {
    beta: f64,
    value: f64,
    worst: Vec<f64>,
}

#[derive(Deserialize)]
struct SaddleRequest {
    matrix: Vec<Vec<f64>>,
    taus: Vec<f64>,
}

#[derive(Serialize)]
struct SaddlePoint {
    tau: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    value: f64,
    duality_gap: f64,
}

#[derive(Deserialize)]
struct GapRequest {
    game: Bimatrix,
    x: Vec<f64>,
    y: Vec<f64>,
    variant: Variant,
}

#[derive(Serialize)]
struct GapAnswer {
    bimatrix_gap: f64,
    instance_gap: f64,
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("bad request: {e}"))
}

fn emit<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn line_metric(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| (i as f64 - j as f64).abs()).collect()).collect()
}

/// Adversarial value `max_p -pᵀv` over a divergence ball of growing radius around `pbar`.
/// Families: `tv`, `kl`, `chi2`, `w1` (states on a line, unit spacing).
#[wasm_bindgen]
pub fn dual_curve(request: &str) -> Result<String, String> {
    let req: DualRequest = parse(request)?;
    if req.points < 2 || req.points > 1000 {
        return Err(format!("points must lie in 2..=1000, got {}", req.points));
    }
    if !(req.beta_max.is_finite() && req.beta_max >= 0.0) {
        return Err(format!("beta_max must be finite and non-negative, got {}", req.beta_max));
    }
    if !matches!(req.family.as_str(), "tv" | "kl" | "chi2" | "w1") {
        return Err(format!("unknown family {}", req.family));
    }
    let metric = line_metric(req.pbar.len());
    let solve = |beta: f64| -> rmg_core::error::Result<DualResult> {
        match req.family.as_str() {
            "tv" => sa_dual_tv(&req.pbar, &req.v, beta),
            "kl" => sa_dual_kl(&req.pbar, &req.v, beta),
            "chi2" => sa_dual_chi2(&req.pbar, &req.v, beta),
            _ => sa_dual_wasserstein(&req.pbar, &req.v, beta, &metric),
        }
    };
    let mut out = Vec::with_capacity(req.points);
    for k in 0..req.points {
        let beta = req.beta_max * k as f64 / (req.points - 1) as f64;
        let d = solve(beta).map_err(|e| e.to_string())?;
        out.push(DualPoint { beta, value: d.value, worst: d.worst });
    }
    emit(&out)
}

/// Entropy-regularized saddle point of a zero-sum matrix game for each temperature.
#[wasm_bindgen]
pub fn saddle_path(request: &str) -> Result<String, String> {
    let req: SaddleRequest = parse(request)?;
    let m = Mat::from_rows(&req.matrix).map_err(|e| e.to_string())?;
    if m.rows * m.cols > 400 {
        return Err("matrix is limited to 400 entries".into());
    }
    let mut out = Vec::with_capacity(req.taus.len());
    for &tau in &req.taus {
        let reg = OwnRegularizer::shannon(tau);
        let s = solve_zs_regularized(&m, &reg, &reg, 1e-9, &SaddleOptions { max_iter: 200_000, ..Default::default() })
            .map_err(|e| e.to_string())?;
        out.push(SaddlePoint { tau, x: s.x, y: s.y, value: s.value, duality_gap: s.duality_gap });
    }
    emit(&out)
}

/// Nash gap of a bimatrix profile next to the robust Nash gap of its zero-sum reduction.
#[wasm_bindgen]
pub fn reduction_gap(request: &str) -> Result<String, String> {
    let req: GapRequest = parse(request)?;
    let (a, b) = req.game.matrices().map_err(|e| e.to_string())?;
    if a.rows * a.cols > 64 {
        return Err("bimatrix is limited to 64 cells".into());
    }
    for (s, n, who) in [(&req.x, a.rows, "x"), (&req.y, a.cols, "y")] {
        rmg_core::linalg::check_distribution(s, 1e-9, who).map_err(|e| e.to_string())?;
        if s.len() != n {
            return Err(format!("{who} has {} entries, expected {n}", s.len()));
        }
    }
    let inst = reduce(&a, &b, req.variant).map_err(|e| e.to_string())?;
    let answer = GapAnswer {
        bimatrix_gap: gensum_ne_gap(&a, &b, &req.x, &req.y),
        instance_gap: instance_gap(&inst, &req.x, &req.y).map_err(|e| e.to_string())?,
    };
    emit(&answer)
}
