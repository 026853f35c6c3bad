//! The self-scaled Broyden quasi-Newton family in inverse-Hessian form,
//! deterministic and stochastic-gated, plus the AdamW first-order baseline.
//!
//! The update kept throughout is
//!
//! ```text
//! H⁺ = (1/τ)[H − (Hy)(Hy)ᵀ/(yᵀHy) + φ vvᵀ] + ssᵀ/(yᵀs),
//! v  = √(yᵀHy) [ s/(yᵀs) − Hy/(yᵀHy) ]
//! ```
//!
//! with `(τ,φ) = (1,1)` giving BFGS, `(1,0)` giving DFP, the
//! Oren-Luenberger choice `τ = min(1, yᵀs/sᵀBs)` giving the self-scaled
//! BFGS, and the Al-Baali/Khalfan `(τ⁽²⁾, η⁽²⁾)` pair giving the self-scaled
//! Broyden method. The B-side parameter η relates to the H-side φ through
//! `η = (1−φ)/(1+aφ)` with `a = hb − 1 ≥ 0`.

use std::cell::RefCell;


use thiserror::Error;

use crate::globalization::{
    self, LineSearchConfig, LineSearchError, TrustRegionState,
};
use crate::linalg::{self, SymMat};
use crate::objective::{BatchObjective, Objective};

#[derive(Debug, Error)]
pub enum QnError {
    #[error("curvature condition violated (yᵀs = {ys:.3e})")]
    CurvatureViolated { ys: f64 },
    #[error("degenerate denominator in quasi-Newton update")]
    DegenerateDenominator,
    #[error(transparent)]
    LineSearch(#[from] LineSearchError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// Guard below which yᵀs / yᵀHy are considered degenerate and the update is
/// skipped rather than divided through.
const DENOM_GUARD: f64 = 1e-300;

// ---------------------------------------------------------------------------
// secant data and scaling scalars
// ---------------------------------------------------------------------------

/// A step/gradient-difference pair recorded after an accepted step.
#[derive(Debug, Clone)]
pub struct SecantPair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
}

impl SecantPair {
    pub fn new(s: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(s.len(), y.len());
        Self { s, y }
    }

    pub fn ys(&self) -> f64 {
        linalg::dot(&self.y, &self.s)
    }
}

/// The three inner products every scaling rule is built from.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureNumbers {
    /// yᵀs
    pub ys: f64,
    /// sᵀBs with B = H⁻¹
    pub s_bs: f64,
    /// yᵀHy
    pub y_hy: f64,
}

impl CurvatureNumbers {
    /// Exact route: solves `H z = s` by Cholesky for `sᵀBs`. Cubic in n, so
    /// meant for tests and small problems.
    pub fn from_matrix(pair: &SecantPair, h: &SymMat) -> Result<Self, QnError> {
        let z = linalg::cholesky_solve(h, &pair.s)?;
        Ok(Self {
            ys: pair.ys(),
            s_bs: linalg::dot(&pair.s, &z),
            y_hy: h.quad_form(&pair.y),
        })
    }

    /// Trajectory route: along an actual quasi-Newton step `s = α d` with
    /// `d = −H g`, we have `Bs = −α g`, hence `sᵀBs = −α² gᵀd`. This is the
    /// line-search identity `τᴼᴸ = −yᵀs/(α sᵀg)` and avoids any solve.
    pub fn from_step(pair: &SecantPair, h: &SymMat, alpha: f64, gd: f64) -> Self {
        Self {
            ys: pair.ys(),
            s_bs: -alpha * alpha * gd,
            y_hy: h.quad_form(&pair.y),
        }
    }
}

/// The scalar family parameters of one update, as produced by a scaling rule.
#[derive(Debug, Clone, Copy)]
pub struct ScalingScalars {
    pub tau: f64,
    pub phi: f64,
    pub eta: f64,
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub sigma: f64,
    pub eta_minus: f64,
    pub eta_plus: f64,
    pub rho_minus: f64,
    pub c: f64,
}

impl ScalingScalars {
    /// SPD-preservation bound η* = −1/a (−∞ at a = 0).
    pub fn eta_star(&self) -> f64 {
        if self.a > 0.0 {
            -1.0 / self.a
        } else {
            f64::NEG_INFINITY
        }
    }
}

fn base_scalars(nums: &CurvatureNumbers) -> Result<(f64, f64, f64), QnError> {
    if nums.ys <= 0.0 {
        return Err(QnError::CurvatureViolated { ys: nums.ys });
    }
    if nums.ys < DENOM_GUARD || nums.y_hy < DENOM_GUARD || nums.s_bs < DENOM_GUARD {
        return Err(QnError::DegenerateDenominator);
    }
    let b = nums.s_bs / nums.ys;
    let h = nums.y_hy / nums.ys;
    let a_raw = h * b - 1.0;
    // Cauchy-Schwarz: a ≥ 0 whenever H is SPD; tolerate rounding only.
    assert!(a_raw >= -1e-12 * (1.0 + h * b), "a = {a_raw} violates Cauchy-Schwarz");
    Ok((b, h, a_raw.max(0.0)))
}

fn abk_bounds(a: f64, h: f64) -> (f64, f64, f64, f64) {
    let c = (a / (a + 1.0)).sqrt();
    let rho_minus = 1.0_f64.min(h * (1.0 - c));
    let eta_plus = 1.0 / rho_minus;
    let eta_minus = if a > 1e-14 {
        (rho_minus - 1.0) / a
    } else if rho_minus >= 1.0 - 1e-14 {
        0.0
    } else {
        f64::NEG_INFINITY
    };
    (c, rho_minus, eta_minus, eta_plus)
}

/// φ recovered from the B-side η by inverting η = (1−φ)/(1+aφ).
fn phi_from_eta(eta: f64, a: f64) -> f64 {
    (1.0 - eta) / (1.0 + a * eta)
}

/// Oren-Luenberger scaling: τ = min(1, τᴼᴸ) with τᴼᴸ = yᵀs/(sᵀBs) = 1/b,
/// paired with the BFGS update (φ = 1).
pub fn scaling_oren_luenberger(
    pair: &SecantPair,
    h_mat: &SymMat,
) -> Result<ScalingScalars, QnError> {
    scaling_ol_from_numbers(&CurvatureNumbers::from_matrix(pair, h_mat)?)
}

pub fn scaling_ol_from_numbers(nums: &CurvatureNumbers) -> Result<ScalingScalars, QnError> {
    let (b, h, a) = base_scalars(nums)?;
    let (c, rho_minus, eta_minus, eta_plus) = abk_bounds(a, h);
    let tau_ol = 1.0 / b;
    Ok(ScalingScalars {
        tau: tau_ol.min(1.0),
        phi: 1.0,
        eta: 0.0,
        a,
        b,
        h,
        sigma: 1.0,
        eta_minus,
        eta_plus,
        rho_minus,
        c,
    })
}

/// Al-Baali/Khalfan two-parameter scaling: picks the B-side η⁽²⁾ clamped to
/// `[η⁻, η⁺]` (always above η*, so positive definiteness is preserved) and
/// the matching τ⁽²⁾ with the `σ^{-1/(n-1)}` correction.
pub fn scaling_albaali_khalfan(
    pair: &SecantPair,
    h_mat: &SymMat,
    n_params: usize,
) -> Result<ScalingScalars, QnError> {
    scaling_abk_from_numbers(&CurvatureNumbers::from_matrix(pair, h_mat)?, n_params)
}

pub fn scaling_abk_from_numbers(
    nums: &CurvatureNumbers,
    n_params: usize,
) -> Result<ScalingScalars, QnError> {
    assert!(n_params >= 2, "Al-Baali/Khalfan scaling needs n ≥ 2 (exponent 1/(n-1))");
    let (b, h, a) = base_scalars(nums)?;
    let (c, rho_minus, eta_minus, eta_plus) = abk_bounds(a, h);
    let eta = eta_minus.max(eta_plus.min((1.0 - b) / b));
    let sigma = 1.0 + a * eta;
    debug_assert!(sigma > 0.0, "sigma = {sigma} must be positive");
    let tau1 = 1.0_f64.min(1.0 / b);
    let pow = sigma.powf(-1.0 / (n_params as f64 - 1.0));
    let tau = if eta > 0.0 {
        tau1 * pow.min(1.0 / eta)
    } else {
        (tau1 * pow).min(sigma)
    };
    Ok(ScalingScalars {
        tau,
        phi: phi_from_eta(eta, a),
        eta,
        a,
        b,
        h,
        sigma,
        eta_minus,
        eta_plus,
        rho_minus,
        c,
    })
}

/// Fixed-(τ,φ) member of the family; fills the derived scalars for logging.
pub fn scaling_fixed(
    tau: f64,
    phi: f64,
    nums: &CurvatureNumbers,
) -> Result<ScalingScalars, QnError> {
    let (b, h, a) = base_scalars(nums)?;
    let (c, rho_minus, eta_minus, eta_plus) = abk_bounds(a, h);
    let eta = if phi == 1.0 { 0.0 } else { (1.0 - phi) / (1.0 + a * phi) };
    Ok(ScalingScalars {
        tau,
        phi,
        eta,
        a,
        b,
        h,
        sigma: 1.0 + a * eta,
        eta_minus,
        eta_plus,
        rho_minus,
        c,
    })
}

// ---------------------------------------------------------------------------
// inverse-Hessian state and update
// ---------------------------------------------------------------------------

/// Which member of the family computes (τ, φ) at each update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Bfgs,
    Dfp,
    /// Oren-Luenberger self-scaled BFGS.
    SsbfgsOl,
    /// Al-Baali/Khalfan self-scaled Broyden.
    SsbroydenAbk,
    Fixed { tau: f64, phi: f64 },
}

impl Strategy {
    pub fn scalars(
        &self,
        nums: &CurvatureNumbers,
        n_params: usize,
    ) -> Result<ScalingScalars, QnError> {
        match *self {
            Strategy::Bfgs => scaling_fixed(1.0, 1.0, nums),
            Strategy::Dfp => scaling_fixed(1.0, 0.0, nums),
            Strategy::SsbfgsOl => scaling_ol_from_numbers(nums),
            Strategy::SsbroydenAbk => scaling_abk_from_numbers(nums, n_params),
            Strategy::Fixed { tau, phi } => scaling_fixed(tau, phi, nums),
        }
    }
}

/// Dense inverse-Hessian approximation plus iteration counter.
#[derive(Debug, Clone)]
pub struct InverseHessianState {
    pub h: SymMat,
    pub k: usize,
    pub strategy: Strategy,
}

impl InverseHessianState {
    /// H₀ = I.
    pub fn identity(n: usize, strategy: Strategy) -> Self {
        Self { h: SymMat::identity(n), k: 0, strategy }
    }
}

/// Apply the self-scaled Broyden update for the given scalars. The new
/// matrix satisfies the secant condition `H⁺ y = s` by construction.
pub fn update_inverse_hessian(
    state: &mut InverseHessianState,
    pair: &SecantPair,
    scalars: &ScalingScalars,
) -> Result<(), QnError> {
    let ys = pair.ys();
    if ys <= 0.0 {
        return Err(QnError::CurvatureViolated { ys });
    }
    let hy = state.h.matvec(&pair.y);
    let y_hy = linalg::dot(&pair.y, &hy);
    if ys < DENOM_GUARD || y_hy < DENOM_GUARD {
        return Err(QnError::DegenerateDenominator);
    }
    let n = pair.s.len();
    let mut v = vec![0.0; n];
    let sqrt_yhy = y_hy.sqrt();
    for i in 0..n {
        v[i] = sqrt_yhy * (pair.s[i] / ys - hy[i] / y_hy);
    }
    state.h.sym_rank_updates(&[(-1.0 / y_hy, &hy), (scalars.phi, &v)]);
    state.h.scale_in_place(1.0 / scalars.tau);
    state.h.sym_rank_updates(&[(1.0 / ys, &pair.s)]);
    state.k += 1;
    Ok(())
}

// ---------------------------------------------------------------------------
// deterministic full-batch optimizer step
// ---------------------------------------------------------------------------

/// Globalization strategy selected per stage.
#[derive(Debug, Clone)]
pub enum Globalizer {
    Armijo(LineSearchConfig),
    Wolfe(LineSearchConfig),
    Zoom(LineSearchConfig),
    TrustRegion(TrustRegionState),
}

/// What happened to the curvature model during one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateDecision {
    Updated,
    SkippedCurvature,
    SkippedDegenerate,
    Rejected,
    Converged,
    First,
}

impl UpdateDecision {
    pub fn as_str(&self) -> &'static str {
        match self {
            UpdateDecision::Updated => "update",
            UpdateDecision::SkippedCurvature => "skip",
            UpdateDecision::SkippedDegenerate => "skip-degenerate",
            UpdateDecision::Rejected => "reject",
            UpdateDecision::Converged => "converged",
            UpdateDecision::First => "first",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepInfo {
    pub loss: f64,
    pub grad_inf: f64,
    pub alpha: f64,
    pub decision: UpdateDecision,
    pub converged: bool,
}

/// Full-batch quasi-Newton driver: direction `d = −Hg`, a configured
/// globalizer, and the family update applied on accepted steps with
/// positive curvature. A Wolfe-accepted step guarantees `yᵀs > 0`; if the
/// trust region accepts a step with `yᵀs ≤ 0` the update is skipped with the
/// same semantics as the stochastic gate.
pub struct QuasiNewton {
    pub state: InverseHessianState,
    pub globalizer: Globalizer,
    trust: TrustRegionState,
    cache: Option<(f64, Vec<f64>)>,
    pub skip_count: usize,
    pub update_count: usize,
}

impl QuasiNewton {
    pub fn new(n: usize, strategy: Strategy, globalizer: Globalizer) -> Self {
        let trust = match &globalizer {
            Globalizer::TrustRegion(t) => t.clone(),
            _ => TrustRegionState::default(),
        };
        Self {
            state: InverseHessianState::identity(n, strategy),
            globalizer,
            trust,
            cache: None,
            skip_count: 0,
            update_count: 0,
        }
    }

    /// Drop the cached gradient (call when θ changes externally).
    pub fn invalidate_cache(&mut self) {
        self.cache = None;
    }

    pub fn step(&mut self, obj: &dyn Objective, theta: &mut Vec<f64>) -> Result<StepInfo, QnError> {
        let (f0, g0) = match self.cache.take() {
            Some(c) => c,
            None => obj.value_grad(theta),
        };
        let g_inf = linalg::norm_inf(&g0);
        if g_inf == 0.0 {
            self.cache = Some((f0, g0));
            return Ok(StepInfo {
                loss: f0,
                grad_inf: 0.0,
                alpha: 0.0,
                decision: UpdateDecision::Converged,
                converged: true,
            });
        }

        let mut d = self.state.h.matvec(&g0);
        linalg::scale(&mut d, -1.0);
        let mut gd = linalg::dot(&g0, &d);
        if gd >= 0.0 {
            // curvature model lost positive definiteness numerically: reset
            self.state.h = SymMat::identity(theta.len());
            d = g0.iter().map(|x| -x).collect();
            gd = -linalg::dot(&g0, &g0);
        }

        let outcome = self.globalize(obj, theta, f0, &g0, &d, gd)?;
        let (alpha, f_new, g_new) = match outcome {
            Some(t) => t,
            None => {
                // trust-region rejection: x unchanged, radius already shrunk
                self.cache = Some((f0, g0));
                return Ok(StepInfo {
                    loss: f0,
                    grad_inf: g_inf,
                    alpha: 0.0,
                    decision: UpdateDecision::Rejected,
                    converged: false,
                });
            }
        };

        let s: Vec<f64> = d.iter().map(|di| alpha * di).collect();
        for (t, si) in theta.iter_mut().zip(&s) {
            *t += si;
        }
        let y = linalg::sub(&g_new, &g0);
        let pair = SecantPair::new(s, y);
        let nums = CurvatureNumbers::from_step(&pair, &self.state.h, alpha, gd);

        let decision = if nums.ys <= 0.0 {
            self.skip_count += 1;
            UpdateDecision::SkippedCurvature
        } else {
            match self
                .state
                .strategy
                .scalars(&nums, theta.len())
                .and_then(|sc| update_inverse_hessian(&mut self.state, &pair, &sc))
            {
                Ok(()) => {
                    self.update_count += 1;
                    UpdateDecision::Updated
                }
                Err(QnError::DegenerateDenominator) => {
                    self.skip_count += 1;
                    UpdateDecision::SkippedDegenerate
                }
                Err(e) => return Err(e),
            }
        };

        let grad_inf = linalg::norm_inf(&g_new);
        self.cache = Some((f_new, g_new));
        Ok(StepInfo {
            loss: f_new,
            grad_inf,
            alpha,
            decision,
            converged: false,
        })
    }

    /// Run the configured globalizer. Returns `None` on a trust-region
    /// rejection; line-search failure is an error.
    #[allow(clippy::too_many_arguments)]
    fn globalize(
        &mut self,
        obj: &dyn Objective,
        theta: &[f64],
        f0: f64,
        g0: &[f64],
        d: &[f64],
        gd: f64,
    ) -> Result<Option<(f64, f64, Vec<f64>)>, QnError> {
        match &self.globalizer {
            Globalizer::Armijo(cfg) => {
                let alpha =
                    globalization::armijo_backtrack(
                        |a| obj.value(&linalg::add_scaled(theta, a, d)),
                        f0,
                        gd,
                        cfg,
                    )?;
                let trial = linalg::add_scaled(theta, alpha, d);
                let (f_new, g_new) = obj.value_grad(&trial);
                Ok(Some((alpha, f_new, g_new)))
            }
            Globalizer::Wolfe(cfg) | Globalizer::Zoom(cfg) => {
                let last: RefCell<Option<(f64, f64, Vec<f64>)>> = RefCell::new(None);
                let eval = |a: f64| {
                    let trial = linalg::add_scaled(theta, a, d);
                    let (v, g) = obj.value_grad(&trial);
                    let dv = linalg::dot(&g, d);
                    *last.borrow_mut() = Some((a, v, g));
                    (v, dv)
                };
                let alpha = match &self.globalizer {
                    Globalizer::Wolfe(_) => globalization::wolfe_backtrack(eval, f0, gd, cfg)?,
                    _ => globalization::zoom_strong_wolfe(eval, f0, gd, cfg)?,
                };
                let cached = last.into_inner();
                let (f_new, g_new) = match cached {
                    Some((a, v, g)) if a == alpha => (v, g),
                    _ => {
                        let trial = linalg::add_scaled(theta, alpha, d);
                        obj.value_grad(&trial)
                    }
                };
                Ok(Some((alpha, f_new, g_new)))
            }
            Globalizer::TrustRegion(_) => {
                let out = globalization::trust_region_step_along(
                    |x| obj.value(x),
                    theta,
                    f0,
                    g0,
                    d,
                    &self.trust,
                );
                let accepted = out.accepted;
                let scale = linalg::norm2(&out.step) / linalg::norm2(d);
                self.trust = out.state;
                if !accepted {
                    return Ok(None);
                }
                let trial = linalg::add_scaled(theta, scale, d);
                let (f_new, g_new) = obj.value_grad(&trial);
                Ok(Some((scale, f_new, g_new)))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// gated stochastic quasi-Newton (lazy mini-batch variant)
// ---------------------------------------------------------------------------

/// Batched curvature gate `yᵀs ≥ τ‖s‖²` with bookkeeping counters.
#[derive(Debug, Clone)]
pub struct GateConfig {
    pub tau_gate: f64,
    pub skip_count: usize,
    pub accept_count: usize,
}

impl Default for GateConfig {
    fn default() -> Self {
        // the threshold is only required to be a small positive constant
        Self { tau_gate: 1e-8, skip_count: 0, accept_count: 0 }
    }
}

impl GateConfig {
    pub fn with_threshold(tau_gate: f64) -> Self {
        assert!(tau_gate > 0.0);
        Self { tau_gate, ..Default::default() }
    }

    pub fn passes(&self, ys: f64, s_norm2_sq: f64) -> bool {
        ys >= self.tau_gate * s_norm2_sq
    }
}

/// Lazy stochastic self-scaled quasi-Newton for mini-batch training:
/// the Hessian approximation is updated only when the previous
/// (step, gradient-difference) pair passes the curvature gate; otherwise it
/// is carried over unchanged. The parameter step `Δθ = −lr·H·g` is taken
/// every iteration.
pub struct StochasticQn {
    pub state: InverseHessianState,
    pub gate: GateConfig,
    pub lr: f64,
    prev_grad: Option<Vec<f64>>,
    prev_step: Option<Vec<f64>>,
}

impl StochasticQn {
    pub fn new(n: usize, strategy: Strategy, gate: GateConfig, lr: f64) -> Self {
        assert!(lr > 0.0);
        Self {
            state: InverseHessianState::identity(n, strategy),
            gate,
            lr,
            prev_grad: None,
            prev_step: None,
        }
    }

    pub fn step(
        &mut self,
        obj: &dyn BatchObjective,
        theta: &mut Vec<f64>,
        batch: &[usize],
    ) -> (f64, UpdateDecision) {
        assert!(!batch.is_empty(), "empty mini-batch");
        let (loss, g) = obj.batch_value_grad(theta, batch);
        let mut decision = UpdateDecision::First;
        if let (Some(gp), Some(sp)) = (self.prev_grad.as_ref(), self.prev_step.as_ref()) {
            let y = linalg::sub(&g, gp);
            let ys = linalg::dot(&y, sp);
            let ss = linalg::dot(sp, sp);
            if self.gate.passes(ys, ss) {
                let pair = SecantPair::new(sp.clone(), y);
                // along the lazy step s = −lr·H·g_prev we have Bs = −lr·g_prev
                let nums = CurvatureNumbers {
                    ys,
                    s_bs: -self.lr * linalg::dot(sp, gp),
                    y_hy: self.state.h.quad_form(&pair.y),
                };
                decision = match self
                    .state
                    .strategy
                    .scalars(&nums, theta.len())
                    .and_then(|sc| update_inverse_hessian(&mut self.state, &pair, &sc))
                {
                    Ok(()) => {
                        self.gate.accept_count += 1;
                        UpdateDecision::Updated
                    }
                    Err(_) => {
                        self.gate.skip_count += 1;
                        UpdateDecision::SkippedDegenerate
                    }
                };
            } else {
                self.gate.skip_count += 1;
                decision = UpdateDecision::SkippedCurvature;
            }
        }
        let mut step = self.state.h.matvec(&g);
        linalg::scale(&mut step, -self.lr);
        for (t, d) in theta.iter_mut().zip(&step) {
            *t += d;
        }
        self.prev_grad = Some(g);
        self.prev_step = Some(step);
        (loss, decision)
    }
}

// ---------------------------------------------------------------------------
// AdamW baseline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub lr: f64,
    pub t: usize,
}

impl AdamState {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            lr,
            t: 0,
        }
    }
}

/// One AdamW update with bias-corrected moments and decoupled weight decay:
/// `θ ← θ − α m̂/(√v̂+ε) − αλθ`. With λ = 0 this is plain Adam.
pub fn adamw_step(state: &mut AdamState, g: &[f64], theta: &mut [f64]) {
    assert!(state.lr > 0.0);
    state.t += 1;
    let b1t = 1.0 - state.beta1.powi(state.t as i32);
    let b2t = 1.0 - state.beta2.powi(state.t as i32);
    for i in 0..theta.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
        let m_hat = state.m[i] / b1t;
        let v_hat = state.v[i] / b2t;
        theta[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps)
            + state.lr * state.weight_decay * theta[i];
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    /// Textbook BFGS inverse update via the product form
    /// (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ — an independent route to the same
    /// matrix as the family at (τ,φ) = (1,1).
    fn bfgs_textbook(h: &SymMat, s: &[f64], y: &[f64]) -> SymMat {
        let n = s.len();
        let rho = 1.0 / linalg::dot(y, s);
        // A = I - rho s yᵀ
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = if i == j { 1.0 } else { 0.0 } - rho * s[i] * y[j];
            }
        }
        // T = A H
        let mut t = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += a[i][k] * h.get(k, j);
                }
                t[i][j] = acc;
            }
        }
        // R = T Aᵀ + rho s sᵀ
        let mut r = SymMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += t[i][k] * a[j][k];
                }
                if j >= i {
                    r.set_sym(i, j, acc + rho * s[i] * s[j]);
                }
            }
        }
        r
    }

    /// Textbook DFP inverse update: H − HyyᵀH/(yᵀHy) + ssᵀ/(yᵀs).
    fn dfp_textbook(h: &SymMat, s: &[f64], y: &[f64]) -> SymMat {
        let hy = h.matvec(y);
        let yhy = linalg::dot(y, &hy);
        let ys = linalg::dot(y, s);
        let mut r = h.clone();
        r.sym_rank_updates(&[(-1.0 / yhy, &hy), (1.0 / ys, s)]);
        r
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SymMat {
        let mut m = crate::linalg::Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        let mut a = m.gram();
        a.add_diag(0.3);
        a
    }

    /// Secant pairs as produced by steps on a convex function: y = A·s for
    /// a random SPD curvature matrix A, so yᵀs ≥ λ_min(A)‖s‖² > 0.
    fn random_pair_with_curvature(rng: &mut ChaCha8Rng, n: usize) -> SecantPair {
        let a = random_spd(rng, n);
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = a.matvec(&s);
        SecantPair::new(s, y)
    }

    #[test]
    fn ol_scaling_direct_substitution() {
        let h = SymMat::identity(2);
        // s=(1,0), y=(2,0), B=I: τᴼᴸ = 2 → τ = 1
        let sc = scaling_oren_luenberger(
            &SecantPair::new(vec![1.0, 0.0], vec![2.0, 0.0]),
            &h,
        )
        .unwrap();
        assert_eq!(sc.tau, 1.0);
        assert_eq!(sc.phi, 1.0);
        // s=(1,0), y=(0.5,0): τᴼᴸ = 0.5 → τ = 0.5
        let sc = scaling_oren_luenberger(
            &SecantPair::new(vec![1.0, 0.0], vec![0.5, 0.0]),
            &h,
        )
        .unwrap();
        assert!((sc.tau - 0.5).abs() < 1e-15);
        // exact step on f = θᵀθ/2 from e1: s = y = −e1, τᴼᴸ = 1
        let sc = scaling_oren_luenberger(
            &SecantPair::new(vec![-1.0, 0.0], vec![-1.0, 0.0]),
            &h,
        )
        .unwrap();
        assert_eq!(sc.tau, 1.0);
    }

    #[test]
    fn ol_rejects_nonpositive_curvature() {
        let h = SymMat::identity(2);
        let err = scaling_oren_luenberger(
            &SecantPair::new(vec![1.0, 0.0], vec![-1.0, 0.0]),
            &h,
        )
        .unwrap_err();
        assert!(matches!(err, QnError::CurvatureViolated { .. }));
    }

    #[test]
    fn abk_bfgs_recovered_at_perfect_curvature() {
        // H = I, s = y: b = h = 1, a = 0 → η = 0, φ = 1, τ = 1
        let h = SymMat::identity(3);
        let s = vec![0.3, -0.2, 0.9];
        let sc = scaling_albaali_khalfan(&SecantPair::new(s.clone(), s), &h, 3).unwrap();
        assert!((sc.eta - 0.0).abs() < 1e-14);
        assert!((sc.phi - 1.0).abs() < 1e-14);
        assert!((sc.tau - 1.0).abs() < 1e-14);
    }

    #[test]
    fn abk_parallel_s_hy_branch() {
        // s ∥ Hy forces a = 0: with s = c·Hy, b = c, h = 1/c.
        let h = SymMat::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]);
        let y = vec![1.0, -1.0];
        let hy = h.matvec(&y);
        let c_par = 0.5;
        let s: Vec<f64> = hy.iter().map(|x| c_par * x).collect();
        let sc = scaling_albaali_khalfan(&SecantPair::new(s, y), &h, 2).unwrap();
        assert!(sc.a < 1e-12);
        // b = 0.5, h = 2: ρ⁻ = min(1, 2) = 1, η⁻ = 0, η⁺ = 1,
        // clamp((1−b)/b = 1) → 1, φ = 1 − η = 0
        assert!((sc.eta - 1.0).abs() < 1e-12);
        assert!(sc.phi.abs() < 1e-12);
    }

    #[test]
    fn abk_bounds_hold_over_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10_000 {
            let n = 4;
            let h = random_spd(&mut rng, n);
            let pair = random_pair_with_curvature(&mut rng, n);
            let sc = scaling_albaali_khalfan(&pair, &h, n).unwrap();
            assert!(sc.eta >= sc.eta_minus - 1e-12 && sc.eta <= sc.eta_plus + 1e-12);
            assert!(sc.sigma > 0.0);
            assert!(sc.tau > 0.0);
            assert!(sc.a >= 0.0);
            assert!(sc.eta > sc.eta_star());
        }
    }

    #[test]
    fn update_noop_when_secant_already_holds() {
        let mut st = InverseHessianState::identity(2, Strategy::Bfgs);
        let pair = SecantPair::new(e(2, 0), e(2, 0));
        let nums = CurvatureNumbers::from_matrix(&pair, &st.h).unwrap();
        let sc = scaling_fixed(1.0, 1.0, &nums).unwrap();
        update_inverse_hessian(&mut st, &pair, &sc).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((st.h.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn update_2x2_hand_expansion() {
        let mut st = InverseHessianState::identity(2, Strategy::Bfgs);
        let pair = SecantPair::new(vec![1.0, 0.0], vec![2.0, 0.0]);
        let nums = CurvatureNumbers::from_matrix(&pair, &st.h).unwrap();
        let sc = scaling_fixed(1.0, 1.0, &nums).unwrap();
        update_inverse_hessian(&mut st, &pair, &sc).unwrap();
        assert!((st.h.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((st.h.get(1, 1) - 1.0).abs() < 1e-15);
        let hy = st.h.matvec(&pair.y);
        assert!((hy[0] - 1.0).abs() < 1e-15 && hy[1].abs() < 1e-15);
    }

    #[test]
    fn secant_condition_on_random_updates() {
        // fresh random SPD base per draw, per strategy
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for strategy in [Strategy::Bfgs, Strategy::Dfp, Strategy::SsbfgsOl, Strategy::SsbroydenAbk]
        {
            let n = 6;
            for _ in 0..300 {
                let mut st =
                    InverseHessianState { h: random_spd(&mut rng, n), k: 0, strategy };
                let pair = random_pair_with_curvature(&mut rng, n);
                let nums = CurvatureNumbers::from_matrix(&pair, &st.h).unwrap();
                let sc = st.strategy.scalars(&nums, n).unwrap();
                update_inverse_hessian(&mut st, &pair, &sc).unwrap();
                let hy = st.h.matvec(&pair.y);
                let resid = linalg::norm2(&linalg::sub(&hy, &pair.s));
                assert!(resid <= 1e-9 * linalg::norm2(&pair.s).max(1e-30));
                // positive curvature + admissible η keep the update SPD
                assert!(st.h.cholesky().is_ok());
            }
        }
    }

    #[test]
    fn chained_updates_stay_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for strategy in [Strategy::Bfgs, Strategy::SsbfgsOl, Strategy::SsbroydenAbk] {
            let n = 5;
            let mut st = InverseHessianState::identity(n, strategy);
            for _ in 0..50 {
                let pair = random_pair_with_curvature(&mut rng, n);
                let nums = CurvatureNumbers::from_matrix(&pair, &st.h).unwrap();
                let sc = st.strategy.scalars(&nums, n).unwrap();
                update_inverse_hessian(&mut st, &pair, &sc).unwrap();
                assert!(st.h.cholesky().is_ok());
            }
        }
    }

    #[test]
    fn family_recovers_textbook_bfgs_and_dfp() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let n = 5;
            let h = random_spd(&mut rng, n);
            let pair = random_pair_with_curvature(&mut rng, n);
            let nums = CurvatureNumbers::from_matrix(&pair, &h).unwrap();

            let mut st = InverseHessianState { h: h.clone(), k: 0, strategy: Strategy::Bfgs };
            let sc = scaling_fixed(1.0, 1.0, &nums).unwrap();
            update_inverse_hessian(&mut st, &pair, &sc).unwrap();
            let oracle = bfgs_textbook(&h, &pair.s, &pair.y);
            let scale_ref = oracle.fro_norm().max(1.0);
            for i in 0..n {
                for j in 0..n {
                    assert!(
                        (st.h.get(i, j) - oracle.get(i, j)).abs() <= 1e-12 * scale_ref,
                        "BFGS mismatch at ({i},{j})"
                    );
                }
            }

            let mut st = InverseHessianState { h: h.clone(), k: 0, strategy: Strategy::Dfp };
            let sc = scaling_fixed(1.0, 0.0, &nums).unwrap();
            update_inverse_hessian(&mut st, &pair, &sc).unwrap();
            let oracle = dfp_textbook(&h, &pair.s, &pair.y);
            for i in 0..n {
                for j in 0..n {
                    assert!(
                        (st.h.get(i, j) - oracle.get(i, j)).abs() <= 1e-12 * scale_ref,
                        "DFP mismatch at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn self_scaling_is_scale_then_update() {
        // FIXED(τ,1) equals textbook BFGS applied to H/τ.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let n = 4;
            let h = random_spd(&mut rng, n);
            let pair = random_pair_with_curvature(&mut rng, n);
            let tau = rng.gen_range(0.2..2.0);
            let nums = CurvatureNumbers::from_matrix(&pair, &h).unwrap();
            let sc = scaling_fixed(tau, 1.0, &nums).unwrap();
            let mut st =
                InverseHessianState { h: h.clone(), k: 0, strategy: Strategy::Fixed { tau, phi: 1.0 } };
            update_inverse_hessian(&mut st, &pair, &sc).unwrap();

            let mut scaled = h.clone();
            scaled.scale_in_place(1.0 / tau);
            let oracle = bfgs_textbook(&scaled, &pair.s, &pair.y);
            let scale_ref = oracle.fro_norm().max(1.0);
            for i in 0..n {
                for j in 0..n {
                    assert!((st.h.get(i, j) - oracle.get(i, j)).abs() <= 1e-12 * scale_ref);
                }
            }
        }
    }

    // -- full quasi-Newton driver -----------------------------------------

    struct Quadratic {
        diag: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.diag.len()
        }
        fn value(&self, th: &[f64]) -> f64 {
            0.5 * th.iter().zip(&self.diag).map(|(x, d)| d * x * x).sum::<f64>()
        }
        fn value_grad(&self, th: &[f64]) -> (f64, Vec<f64>) {
            (self.value(th), th.iter().zip(&self.diag).map(|(x, d)| d * x).collect())
        }
    }

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, th: &[f64]) -> f64 {
            let (x, y) = (th[0], th[1]);
            100.0 * (y - x * x) * (y - x * x) + (1.0 - x) * (1.0 - x)
        }
        fn value_grad(&self, th: &[f64]) -> (f64, Vec<f64>) {
            let (x, y) = (th[0], th[1]);
            let g = vec![
                -400.0 * (y - x * x) * x - 2.0 * (1.0 - x),
                200.0 * (y - x * x),
            ];
            (self.value(th), g)
        }
    }

    #[test]
    fn bfgs_finite_termination_on_quadratic() {
        // zoom with a tight curvature constant is an effectively exact line
        // search on a quadratic, so BFGS terminates in two iterations.
        let obj = Quadratic { diag: vec![1.0, 10.0] };
        let cfg = LineSearchConfig { c1: 1e-12, c2: 1e-10, max_evals: 100, ..Default::default() };
        let mut qn = QuasiNewton::new(2, Strategy::Bfgs, Globalizer::Zoom(cfg));
        let mut theta = vec![1.0, 1.0];
        for _ in 0..2 {
            qn.step(&obj, &mut theta).unwrap();
        }
        assert!(linalg::norm2(&theta) <= 1e-10, "theta = {theta:?}");
    }

    #[test]
    fn ssbfgs_zoom_solves_rosenbrock() {
        let obj = Rosenbrock;
        let mut qn = QuasiNewton::new(
            2,
            Strategy::SsbfgsOl,
            Globalizer::Zoom(LineSearchConfig::default()),
        );
        let mut theta = vec![-1.2, 1.0];
        let mut converged_at = None;
        for it in 0..200 {
            let info = qn.step(&obj, &mut theta).unwrap();
            if linalg::norm2(&linalg::sub(&theta, &[1.0, 1.0])) <= 1e-6 {
                converged_at = Some(it);
                break;
            }
            if info.converged {
                break;
            }
        }
        assert!(converged_at.is_some(), "did not reach (1,1): {theta:?}");
    }

    #[test]
    fn zero_gradient_is_converged_zero_step() {
        let obj = Quadratic { diag: vec![1.0, 1.0] };
        let mut qn =
            QuasiNewton::new(2, Strategy::Bfgs, Globalizer::Wolfe(LineSearchConfig::default()));
        let mut theta = vec![0.0, 0.0];
        let info = qn.step(&obj, &mut theta).unwrap();
        assert!(info.converged);
        assert_eq!(info.alpha, 0.0);
        assert_eq!(theta, vec![0.0, 0.0]);
    }

    #[test]
    fn trust_region_globalizer_makes_progress() {
        let obj = Rosenbrock;
        let mut qn = QuasiNewton::new(
            2,
            Strategy::SsbroydenAbk,
            Globalizer::TrustRegion(TrustRegionState::default()),
        );
        let mut theta = vec![-1.2, 1.0];
        for _ in 0..400 {
            qn.step(&obj, &mut theta).unwrap();
        }
        assert!(
            linalg::norm2(&linalg::sub(&theta, &[1.0, 1.0])) <= 1e-5,
            "theta = {theta:?}"
        );
    }

    // -- stochastic gate ----------------------------------------------------

    struct BatchQuadratic {
        scale: f64,
        n_samples: usize,
        noise: f64,
    }

    impl Objective for BatchQuadratic {
        fn dim(&self) -> usize {
            3
        }
        fn value(&self, th: &[f64]) -> f64 {
            0.5 * self.scale * linalg::dot(th, th)
        }
        fn value_grad(&self, th: &[f64]) -> (f64, Vec<f64>) {
            (self.value(th), th.iter().map(|x| self.scale * x).collect())
        }
    }

    impl BatchObjective for BatchQuadratic {
        fn num_samples(&self) -> usize {
            self.n_samples
        }
        fn batch_value_grad(&self, th: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
            // deterministic per-sample perturbation so batch gradients differ
            let mut g: Vec<f64> = th.iter().map(|x| self.scale * x).collect();
            let bias: f64 =
                batch.iter().map(|&i| ((i as f64) * 0.7).sin()).sum::<f64>() / batch.len() as f64;
            for gi in g.iter_mut() {
                *gi += self.noise * bias;
            }
            (self.value(th), g)
        }
    }

    #[test]
    fn gate_passes_on_uniformly_convex_quadratic() {
        // Hessian = 2I: yᵀs = 2‖s‖² ≥ τ‖s‖² for τ ≤ 2; the threshold sits a
        // hair below 2 so rounding in θ-updates cannot flip the comparison.
        let obj = BatchQuadratic { scale: 2.0, n_samples: 16, noise: 0.0 };
        let tau = 2.0 * (1.0 - 1e-12);
        let mut opt =
            StochasticQn::new(3, Strategy::SsbfgsOl, GateConfig::with_threshold(tau), 0.2);
        let mut theta = vec![1.0, -0.5, 0.25];
        let batch: Vec<usize> = (0..8).collect();
        let (_, d0) = opt.step(&obj, &mut theta, &batch);
        assert_eq!(d0, UpdateDecision::First);
        for _ in 0..20 {
            let (_, d) = opt.step(&obj, &mut theta, &batch);
            assert_eq!(d, UpdateDecision::Updated);
        }
        assert_eq!(opt.gate.skip_count, 0);
    }

    #[test]
    fn gate_skips_on_negative_curvature_and_h_stays_spd() {
        let obj = BatchQuadratic { scale: 1.0, n_samples: 16, noise: 0.0 };
        let mut opt =
            StochasticQn::new(3, Strategy::SsbfgsOl, GateConfig::default(), 0.1);
        let mut theta = vec![1.0, 1.0, 1.0];
        let batch: Vec<usize> = (0..4).collect();
        opt.step(&obj, &mut theta, &batch);
        // forge an adversarial history with yᵀs < 0
        opt.prev_step = Some(vec![1.0, 0.0, 0.0]);
        opt.prev_grad = Some(vec![1e3, 0.0, 0.0]); // next y = g - gp strongly negative
        let h_before = opt.state.h.clone();
        let (_, d) = opt.step(&obj, &mut theta, &batch);
        assert_eq!(d, UpdateDecision::SkippedCurvature);
        assert_eq!(opt.state.h, h_before);
        assert!(opt.state.h.cholesky().is_ok());
    }

    // -- AdamW ---------------------------------------------------------------

    #[test]
    fn adamw_zero_gradient_fixed_point() {
        let mut st = AdamState::new(2, 0.1);
        let mut theta = vec![0.3, -0.7];
        for _ in 0..10 {
            adamw_step(&mut st, &[0.0, 0.0], &mut theta);
        }
        assert_eq!(theta, vec![0.3, -0.7]);
    }

    #[test]
    fn adamw_constant_gradient_step_magnitude() {
        let mut st = AdamState::new(1, 0.01);
        let mut theta = vec![100.0];
        let mut last = theta[0];
        for _ in 0..5000 {
            last = theta[0];
            adamw_step(&mut st, &[3.7], &mut theta);
        }
        let update = (theta[0] - last).abs();
        assert!((update - st.lr).abs() < 1e-6, "update = {update}");
    }

    #[test]
    fn adamw_pure_decay_with_weight_decay() {
        let mut st = AdamState::new(1, 0.1);
        st.weight_decay = 0.5;
        let mut theta = vec![2.0];
        adamw_step(&mut st, &[0.0], &mut theta);
        assert!((theta[0] - 2.0 * (1.0 - 0.1 * 0.5)).abs() < 1e-15);
    }
}
