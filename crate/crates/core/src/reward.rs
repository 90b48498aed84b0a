//! Reward uncertainty sets, their support functions, and the equivalent policy regularizers.
//!
//! All supports are evaluated at the rank-one argument `y = -π_i π_{-i}ᵀ`, laid out either as an
//! `A_i × A_{-i}` matrix (operator-norm balls) or over joint actions (intervals).

use serde::{Deserialize, Serialize};

use crate::error::{dim, param, Error, Result};
use crate::game::{random_distribution, rng, JointActions};
use crate::linalg::{dual_vector, norm, xlogx, NormOrder};

/// Per-action kernel ω defining a policy-dependent reward set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// ω(x) = ln x
    Shannon,
    /// ω_a(x) = ln(x / μ_a)
    KlReference { reference: Vec<f64> },
    /// ω(x) = (x - 1) / 2
    Tsallis,
    /// Not separable: the penalty is -ln(Σ π^q) / (1 - q).
    Renyi { q: f64 },
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Shannon => "shannon",
            Kernel::KlReference { .. } => "kl_reference",
            Kernel::Tsallis => "tsallis",
            Kernel::Renyi { .. } => "renyi",
        }
    }

    pub fn validate(&self, actions: usize) -> Result<()> {
        match self {
            Kernel::KlReference { reference } => {
                if reference.len() != actions {
                    return Err(dim(format!(
                        "kl reference has {} entries for {actions} actions",
                        reference.len()
                    )));
                }
                crate::linalg::check_distribution(reference, 1e-9, "kl reference")?;
                if reference.iter().any(|&m| m <= 0.0) {
                    return Err(param("kl reference must be strictly positive"));
                }
                Ok(())
            }
            Kernel::Renyi { q } => {
                if !(q.is_finite() && *q > 0.0 && *q != 1.0) {
                    return Err(param(format!("renyi order must be positive and not 1, got {q}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// ω evaluated at probability `x` of `action`.
    pub fn omega(&self, action: usize, x: f64) -> Result<f64> {
        Ok(match self {
            Kernel::Shannon => x.ln(),
            Kernel::KlReference { reference } => (x / reference[action]).ln(),
            Kernel::Tsallis => (x - 1.0) / 2.0,
            Kernel::Renyi { .. } => return Err(Error::NonSeparableKernel("renyi")),
        })
    }

    /// Derivative of ω in `x`.
    pub fn omega_grad(&self, _action: usize, x: f64) -> Result<f64> {
        Ok(match self {
            Kernel::Shannon | Kernel::KlReference { .. } => 1.0 / x,
            Kernel::Tsallis => 0.5,
            Kernel::Renyi { .. } => return Err(Error::NonSeparableKernel("renyi")),
        })
    }

    /// `Σ_a π(a) ω_a(π(a))` with `0 ω(0) = 0`; for Rényi the whole-distribution penalty.
    pub fn penalty(&self, pi: &[f64]) -> f64 {
        match self {
            Kernel::Shannon => pi.iter().map(|&x| xlogx(x)).sum(),
            Kernel::KlReference { reference } => pi
                .iter()
                .zip(reference)
                .map(|(&x, &m)| if x > 0.0 { x * (x / m).ln() } else { 0.0 })
                .sum(),
            Kernel::Tsallis => pi.iter().map(|&x| x * (x - 1.0) / 2.0).sum(),
            Kernel::Renyi { q } => {
                let s: f64 = pi.iter().filter(|&&x| x > 0.0).map(|x| x.powf(*q)).sum();
                -s.ln() / (1.0 - q)
            }
        }
    }

    /// Gradient of [`Kernel::penalty`]. Entropy-type kernels diverge at zero probabilities.
    pub fn penalty_grad(&self, pi: &[f64]) -> Vec<f64> {
        match self {
            Kernel::Shannon => pi.iter().map(|&x| x.ln() + 1.0).collect(),
            Kernel::KlReference { reference } => {
                pi.iter().zip(reference).map(|(&x, &m)| (x / m).ln() + 1.0).collect()
            }
            Kernel::Tsallis => pi.iter().map(|&x| x - 0.5).collect(),
            Kernel::Renyi { q } => {
                let s: f64 = pi.iter().filter(|&&x| x > 0.0).map(|x| x.powf(*q)).sum();
                pi.iter().map(|&x| -q * x.powf(q - 1.0) / (s * (1.0 - q))).collect()
            }
        }
    }

    /// Whether the penalty is handled inside the entropic prox (rather than by its gradient).
    pub fn is_entropic(&self) -> bool {
        matches!(self, Kernel::Shannon | Kernel::KlReference { .. })
    }
}

/// Spot-checks midpoint convexity of `τ · penalty` on random interior points.
pub fn check_kernel_convex(kernel: &Kernel, tau: f64, actions: usize, seed: u64) -> Result<()> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::NonConvex(format!("temperature {tau} must be finite and non-negative")));
    }
    kernel.validate(actions)?;
    if actions < 2 || tau == 0.0 {
        return Ok(());
    }
    let mut r = rng(seed);
    for _ in 0..256 {
        let x = random_distribution(&mut r, actions);
        let y = random_distribution(&mut r, actions);
        let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let (fx, fy, fm) = (kernel.penalty(&x), kernel.penalty(&y), kernel.penalty(&m));
        if fm > 0.5 * (fx + fy) + 1e-12 * (1.0 + fx.abs() + fy.abs()) {
            return Err(Error::NonConvex(format!(
                "{} kernel fails midpoint convexity on {actions} actions",
                kernel.name()
            )));
        }
    }
    Ok(())
}

/// Reward uncertainty set attached to one `(player, step, state)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RewardSet {
    Singleton,
    /// Box `lo(a) <= R(a) <= hi(a)` over joint actions.
    Interval { lo: Vec<f64>, hi: Vec<f64> },
    /// `{R ∈ R^{A_i × A_{-i}} : ||R||_{q→p*} <= α}`.
    OpnormBall { alpha: f64, p: NormOrder, q: NormOrder },
    /// Interval `[-τ ω(π_i(a_i)), max(·, 0)]` that depends on the evaluated policy.
    KernelPolicyDependent { kernel: Kernel, tau: f64 },
}

/// Policy regularizer equivalent to a reward uncertainty set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    Zero,
    /// α ||π_i||_p ||π_{-i}||_q, `q != 1`.
    LpLqNorm { alpha: f64, p: NormOrder, q: NormOrder },
    /// α ||π_i||_p
    PNormOwn { alpha: f64, p: NormOrder },
    /// τ Σ π_i ω(π_i)
    DecomposableKernel { kernel: Kernel, tau: f64 },
    /// Support function evaluated numerically (interval sets).
    NumericOnly { set: RewardSet },
}

fn check_radius(x: f64, what: &str) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(param(format!("{what} must be finite and non-negative, got {x}")));
    }
    Ok(())
}

/// `σ(y) = Σ hi·max(y, 0) + lo·min(y, 0)`; zero coordinates contribute nothing.
pub fn support_interval(lo: &[f64], hi: &[f64], y: &[f64]) -> Result<f64> {
    if lo.len() != y.len() || hi.len() != y.len() {
        return Err(dim("interval bounds and argument differ in length"));
    }
    let mut s = 0.0;
    for ((&l, &h), &v) in lo.iter().zip(hi).zip(y) {
        if v > 0.0 {
            s += h * v;
        } else if v < 0.0 {
            s += l * v;
        }
    }
    Ok(s)
}

/// Support of the `q→p*` operator-norm ball at `±x yᵀ`: `α ||x||_p ||y||_q`.
pub fn support_opnorm_ball(alpha: f64, p: NormOrder, q: NormOrder, x: &[f64], y: &[f64]) -> Result<f64> {
    check_radius(alpha, "alpha")?;
    p.check()?;
    q.check()?;
    Ok(alpha * norm(x, p) * norm(y, q))
}

/// Member `R` of the ball minimizing `xᵀ R y`; attains `-α ||x||_p ||y||_q`.
pub fn opnorm_minimizer(alpha: f64, p: NormOrder, q: NormOrder, x: &[f64], y: &[f64]) -> crate::linalg::Mat {
    let u = dual_vector(x, p);
    let w = dual_vector(y, q);
    crate::linalg::Mat::from_fn(x.len(), y.len(), |i, j| -alpha * u[i] * w[j])
}

/// `σ_{kernel}(-π_i π_{-i}ᵀ) = τ Σ π_i ω(π_i)`.
pub fn support_kernel(kernel: &Kernel, tau: f64, pi_i: &[f64]) -> Result<f64> {
    check_radius(tau, "tau")?;
    Ok(tau * kernel.penalty(pi_i))
}

/// Lower interval endpoint of a kernel set at action `ai`.
fn kernel_lo(kernel: &Kernel, tau: f64, pi_i: &[f64], ai: usize) -> f64 {
    match kernel {
        Kernel::Renyi { .. } => -tau * kernel.penalty(pi_i),
        k => {
            let x = pi_i[ai];
            if tau == 0.0 {
                0.0
            } else {
                -tau * k.omega(ai, x).expect("separable kernel")
            }
        }
    }
}

impl RewardSet {
    pub fn family(&self) -> &'static str {
        match self {
            RewardSet::Singleton => "singleton",
            RewardSet::Interval { .. } => "interval",
            RewardSet::OpnormBall { .. } => "opnorm_ball",
            RewardSet::KernelPolicyDependent { .. } => "kernel_policy_dependent",
        }
    }

    pub fn validate(&self, player: usize, joint: &JointActions) -> Result<()> {
        match self {
            RewardSet::Singleton => Ok(()),
            RewardSet::Interval { lo, hi } => {
                if lo.len() != joint.total() || hi.len() != joint.total() {
                    return Err(dim(format!(
                        "interval needs {} joint-action bounds, got {}/{}",
                        joint.total(),
                        lo.len(),
                        hi.len()
                    )));
                }
                for (a, (l, h)) in lo.iter().zip(hi).enumerate() {
                    if !(l.is_finite() && h.is_finite() && l <= h) {
                        return Err(param(format!("interval bound at action {a}: lo {l} > hi {h}")));
                    }
                }
                Ok(())
            }
            RewardSet::OpnormBall { alpha, p, q } => {
                check_radius(*alpha, "alpha")?;
                p.check()?;
                q.check()?;
                Ok(())
            }
            RewardSet::KernelPolicyDependent { kernel, tau } => {
                check_radius(*tau, "tau")?;
                kernel.validate(joint.sizes()[player])
            }
        }
    }

    /// Whether the nominal reward belongs to the set.
    pub fn contains_nominal(&self) -> bool {
        !matches!(self, RewardSet::KernelPolicyDependent { .. })
    }

    /// Whether the worst case is bilinear in the joint distribution.
    pub fn is_bilinear(&self) -> bool {
        matches!(self, RewardSet::Singleton | RewardSet::Interval { .. })
    }

    /// Support function at `-π_i π_{-i}ᵀ` for the product policy `dists`.
    pub fn support(&self, player: usize, joint: &JointActions, dists: &[&[f64]]) -> Result<f64> {
        match self {
            RewardSet::Singleton => Ok(0.0),
            RewardSet::Interval { lo, hi } => {
                let y: Vec<f64> = joint.product(dists).into_iter().map(|m| -m).collect();
                support_interval(lo, hi, &y)
            }
            RewardSet::OpnormBall { alpha, p, q } => {
                let others = joint.product_except(dists, player);
                support_opnorm_ball(*alpha, *p, *q, dists[player], &others)
            }
            RewardSet::KernelPolicyDependent { kernel, tau } => support_kernel(kernel, *tau, dists[player]),
        }
    }

    /// Explicit worst-case perturbation over joint actions for the product policy `dists`.
    ///
    /// Entries at joint actions of probability zero are irrelevant and may be infinite.
    pub fn worst_case_perturbation(&self, player: usize, joint: &JointActions, dists: &[&[f64]]) -> Vec<f64> {
        let n = joint.total();
        match self {
            RewardSet::Singleton => vec![0.0; n],
            // y = -μ <= 0, so the lower corner is active.
            RewardSet::Interval { lo, .. } => lo.clone(),
            RewardSet::OpnormBall { alpha, p, q } => {
                let others = joint.product_except(dists, player);
                let r = opnorm_minimizer(*alpha, *p, *q, dists[player], &others);
                (0..n).map(|a| r.get(joint.component(a, player), joint.others_index(a, player))).collect()
            }
            RewardSet::KernelPolicyDependent { kernel, tau } => {
                (0..n).map(|a| kernel_lo(kernel, *tau, dists[player], joint.component(a, player))).collect()
            }
        }
    }

    /// `min_{R ∈ U} E_μ[r* + R]`, computed through the attaining member of the set.
    pub fn worst_case_expectation(
        &self,
        player: usize,
        joint: &JointActions,
        dists: &[&[f64]],
        nominal: &[f64],
    ) -> f64 {
        let mu = joint.product(dists);
        let pert = self.worst_case_perturbation(player, joint, dists);
        mu.iter()
            .zip(nominal)
            .zip(&pert)
            .filter(|((m, _), _)| **m > 0.0)
            .map(|((m, r), d)| m * (r + d))
            .sum()
    }

    /// Interval materialization of a policy-dependent kernel set at `dists`.
    pub fn materialize(&self, player: usize, joint: &JointActions, dists: &[&[f64]]) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            RewardSet::Interval { lo, hi } => Some((lo.clone(), hi.clone())),
            RewardSet::KernelPolicyDependent { kernel, tau } => {
                let lo: Vec<f64> = (0..joint.total())
                    .map(|a| kernel_lo(kernel, *tau, dists[player], joint.component(a, player)))
                    .collect();
                let hi = lo.iter().map(|&l| l.max(0.0)).collect();
                Some((lo, hi))
            }
            _ => None,
        }
    }
}

impl Regularizer {
    pub fn validate(&self) -> Result<()> {
        match self {
            Regularizer::Zero => Ok(()),
            Regularizer::LpLqNorm { alpha, p, q } => {
                check_radius(*alpha, "alpha")?;
                p.check()?;
                q.check()?;
                if q.0 == 1.0 {
                    return Err(param("lp_lq_norm with q = 1 is spelled p_norm_own"));
                }
                Ok(())
            }
            Regularizer::PNormOwn { alpha, p } => {
                check_radius(*alpha, "alpha")?;
                p.check().map(|_| ())
            }
            Regularizer::DecomposableKernel { tau, kernel } => {
                check_radius(*tau, "tau")?;
                if let Kernel::Renyi { q } = kernel {
                    if !(q.is_finite() && *q > 0.0 && *q != 1.0) {
                        return Err(param("bad renyi order"));
                    }
                }
                Ok(())
            }
            Regularizer::NumericOnly { set } => match set {
                RewardSet::Interval { .. } => Ok(()),
                other => Err(param(format!("numeric_only wraps interval sets, got {}", other.family()))),
            },
        }
    }

    /// Ω_i(π) for the product policy `dists`.
    pub fn eval(&self, player: usize, joint: &JointActions, dists: &[&[f64]]) -> Result<f64> {
        match self {
            Regularizer::Zero => Ok(0.0),
            Regularizer::LpLqNorm { alpha, p, q } => {
                let others = joint.product_except(dists, player);
                Ok(alpha * norm(dists[player], *p) * norm(&others, *q))
            }
            Regularizer::PNormOwn { alpha, p } => Ok(alpha * norm(dists[player], *p)),
            Regularizer::DecomposableKernel { kernel, tau } => Ok(tau * kernel.penalty(dists[player])),
            Regularizer::NumericOnly { set } => set.support(player, joint, dists),
        }
    }

    /// Whether Ω_i depends on the player's own policy only.
    pub fn is_separable(&self) -> bool {
        matches!(self, Regularizer::Zero | Regularizer::PNormOwn { .. } | Regularizer::DecomposableKernel { .. })
    }
}

/// Maps an uncertainty set to its equivalent regularizer.
pub fn regularizer_from_uncertainty(set: &RewardSet) -> Result<Regularizer> {
    Ok(match set {
        RewardSet::Singleton => Regularizer::Zero,
        RewardSet::Interval { .. } => Regularizer::NumericOnly { set: set.clone() },
        RewardSet::OpnormBall { alpha, p, q } => {
            if q.0 == 1.0 {
                Regularizer::PNormOwn { alpha: *alpha, p: *p }
            } else {
                Regularizer::LpLqNorm { alpha: *alpha, p: *p, q: *q }
            }
        }
        RewardSet::KernelPolicyDependent { kernel, tau } => {
            Regularizer::DecomposableKernel { kernel: kernel.clone(), tau: *tau }
        }
    })
}

/// Maps a regularizer back to an uncertainty set that induces it.
pub fn uncertainty_from_regularizer(reg: &Regularizer) -> Result<RewardSet> {
    reg.validate()?;
    Ok(match reg {
        Regularizer::Zero => RewardSet::Singleton,
        Regularizer::LpLqNorm { alpha, p, q } => RewardSet::OpnormBall { alpha: *alpha, p: *p, q: *q },
        Regularizer::PNormOwn { alpha, p } => RewardSet::OpnormBall { alpha: *alpha, p: *p, q: NormOrder::ONE },
        Regularizer::DecomposableKernel { kernel, tau } => {
            RewardSet::KernelPolicyDependent { kernel: kernel.clone(), tau: *tau }
        }
        Regularizer::NumericOnly { set } => set.clone(),
    })
}
