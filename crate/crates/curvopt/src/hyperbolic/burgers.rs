//! Analytical entropy solution of the inviscid Burgers equation with
//! `u(x,0) = -sin(πx)` on `[-1,1]`, plus the entropy-pair residual, shock
//! speed, shock-region detection, and the gradient-annihilation factor.
//!
//! The characteristic map is `x = ξ − t·sin(πξ)`; it stays invertible up to
//! `t = 1/π`. Past that time the footpoint interval `(-ξ_s, ξ_s)` around the
//! stationary shock at `x = 0` is excluded and the inversion is restricted
//! to the admissible side. Out-of-range points return NaN — the sentinel,
//! not an error.

use std::f64::consts::PI;

/// Initial condition `u₀(x) = −sin(πx)`.
pub fn initial_condition(x: f64) -> f64 {
    -(PI * x).sin()
}

/// `CharMap(ξ, t) = ξ − t·sin(πξ)`.
pub fn char_map(xi: f64, t: f64) -> f64 {
    xi - t * (PI * xi).sin()
}

/// Characteristics first cross at `t = 1/π`.
pub const T_SHOCK: f64 = 1.0 / PI;

const BISECT_TOL: f64 = 1e-12;
const SCAN_CELLS: usize = 2048;

/// Bisection to `1e-12` after locating a sign change by scanning `cells`
/// uniform subintervals of `[lo, hi]`.
fn bisect_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Option<f64> {
    let mut a = lo;
    let mut fa = f(a);
    if fa == 0.0 {
        return Some(a);
    }
    let step = (hi - lo) / cells as f64;
    let mut bracket = None;
    for i in 1..=cells {
        let b = if i == cells { hi } else { lo + step * i as f64 };
        let fb = f(b);
        if fb == 0.0 {
            return Some(b);
        }
        if fa * fb < 0.0 {
            bracket = Some((a, b, fa));
            break;
        }
        a = b;
        fa = fb;
    }
    let (mut a, mut b, mut fa) = bracket?;
    while b - a > BISECT_TOL {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Some(0.5 * (a + b))
}

/// Entropy solution `u(x,t)`; NaN outside the characteristic range and in
/// the excluded interval around the shock.
pub fn burgers_entropy_solution(x: f64, t: f64) -> f64 {
    assert!(t >= 0.0, "time must be nonnegative");
    if t == 0.0 {
        if !(-1.0..=1.0).contains(&x) {
            return f64::NAN;
        }
        return initial_condition(x);
    }
    let x_min = char_map(-1.0, t);
    let x_max = char_map(1.0, t);
    // tolerance keeps the endpoints usable despite sin(π) rounding
    if x < x_min - 1e-12 || x > x_max + 1e-12 {
        return f64::NAN;
    }
    let x = x.clamp(x_min, x_max);
    if t <= T_SHOCK {
        // single-valued branch: the map is monotone on [-1, 1]
        match bisect_root(|xi| char_map(xi, t) - x, -1.0, 1.0, SCAN_CELLS) {
            Some(xi) => initial_condition(xi),
            None => f64::NAN,
        }
    } else {
        // critical footpoint: positive root of CharMap(ξ_s, t) = 0
        let lo = 1e-12;
        let xi_s = match bisect_root(|xi| char_map(xi, t), lo, 1.0, SCAN_CELLS) {
            Some(v) => v,
            None => return f64::NAN,
        };
        let x_s = char_map(xi_s, t);
        if x_s < x && x < -x_s {
            return f64::NAN;
        }
        let xi = if x <= x_s {
            bisect_root(|xi| char_map(xi, t) - x, -1.0, -xi_s, SCAN_CELLS)
        } else {
            bisect_root(|xi| char_map(xi, t) - x, xi_s, 1.0, SCAN_CELLS)
        };
        match xi {
            Some(v) => initial_condition(v),
            None => f64::NAN,
        }
    }
}

/// Tadmor entropy-pair residual `∂η/∂t + ∂ψ/∂x` with `η = u²/2`, `ψ = u³/3`,
/// i.e. `u·u_t + u²·u_x`.
pub fn entropy_residual(u: f64, u_t: f64, u_x: f64) -> f64 {
    u * u_t + u * u * u_x
}

/// Penalized (positive part of the) entropy residual.
pub fn entropy_penalty(residual: f64) -> f64 {
    residual.max(0.0)
}

/// Rankine-Hugoniot shock speed for the `u²/2` flux: `s = (u_L + u_R)/2`.
pub fn burgers_shock_speed(u_left: f64, u_right: f64) -> f64 {
    0.5 * (u_left + u_right)
}

/// Shock detection and gradient-annihilation hyperparameters.
#[derive(Debug, Clone)]
pub struct ShockDetectConfig {
    /// Threshold: a point is in the shock set when `∂u/∂x ≤ −m`.
    pub m: f64,
    /// Left/right probe offset for evaluating the flanking states.
    pub h: f64,
    /// Gradient-annihilation hyperparameter (0 disables).
    pub a_ga: f64,
}

impl ShockDetectConfig {
    /// Defaults used for the Sod tube runs: (M, h, a) = (0.001, 0.0175, 0.01).
    pub fn euler_defaults() -> Self {
        Self { m: 0.001, h: 0.0175, a_ga: 0.01 }
    }

    /// Burgers default: only the probe offset carries over, the threshold is
    /// problem-scale.
    pub fn burgers_defaults() -> Self {
        Self { m: 1.0, h: 0.0175, a_ga: 0.0 }
    }
}

/// True iff the point is inside the candidate shock set `∂u/∂x ≤ −m`
/// (boundary included).
pub fn shock_region_mask(u_x_values: &[f64], cfg: &ShockDetectConfig) -> Vec<bool> {
    u_x_values.iter().map(|&ux| ux <= -cfg.m).collect()
}

/// Residual-homogenization factor `α = 1/(a·|∂u/∂x| + 1) ∈ (0, 1]`.
pub fn gradient_annihilation(u_x: f64, a_ga: f64) -> f64 {
    assert!(a_ga >= 0.0);
    1.0 / (a_ga * u_x.abs() + 1.0)
}
