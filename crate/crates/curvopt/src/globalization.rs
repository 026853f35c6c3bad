//! Step-size and step-acceptance strategies: Armijo backtracking, Wolfe,
//! strong-Wolfe zoom, and a linear trust region.
//!
//! Line searches operate on the one-dimensional restriction
//! `phi(alpha) = f(x + alpha d)`; callers provide `phi` (and its slope where
//! required) as closures. A NaN/Inf trial value is treated as a failed
//! sufficient-decrease test, so the searches back away from blow-up regions.

use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum LineSearchError {
    #[error("search direction is not a descent direction (gᵀd = {0:.3e})")]
    NotDescent(f64),
    #[error("line search failed after {evals} evaluations")]
    Failed { evals: usize },
}

#[derive(Debug, Clone)]
pub struct LineSearchConfig {
    pub c1: f64,
    pub c2: f64,
    pub alpha0: f64,
    pub backtrack_factor: f64,
    pub max_evals: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self { c1: 1e-4, c2: 0.9, alpha0: 1.0, backtrack_factor: 0.5, max_evals: 50 }
    }
}

impl LineSearchConfig {
    pub fn validated(self) -> Result<Self, String> {
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return Err(format!("c1 must be in (0,1), got {}", self.c1));
        }
        if !(self.c2 > self.c1 && self.c2 < 1.0) {
            return Err(format!("c2 must be in (c1,1), got {}", self.c2));
        }
        if !(self.alpha0 > 0.0) {
            return Err("alpha0 must be positive".into());
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err("backtrack_factor must be in (0,1)".into());
        }
        Ok(self)
    }
}

#[inline]
fn armijo_ok(phi_a: f64, phi0: f64, dphi0: f64, c1: f64, alpha: f64) -> bool {
    // NaN-safe: a non-finite value never passes.
    phi_a <= phi0 + c1 * alpha * dphi0
}

/// Armijo backtracking: the smallest `j` with
/// `phi(alpha0 * factor^j)` satisfying sufficient decrease.
pub fn armijo_backtrack(
    mut phi: impl FnMut(f64) -> f64,
    phi0: f64,
    dphi0: f64,
    cfg: &LineSearchConfig,
) -> Result<f64, LineSearchError> {
    if dphi0 >= 0.0 {
        return Err(LineSearchError::NotDescent(dphi0));
    }
    let mut alpha = cfg.alpha0;
    for eval in 1..=cfg.max_evals {
        let v = phi(alpha);
        if armijo_ok(v, phi0, dphi0, cfg.c1, alpha) {
            return Ok(alpha);
        }
        if eval == cfg.max_evals {
            break;
        }
        alpha *= cfg.backtrack_factor;
    }
    Err(LineSearchError::Failed { evals: cfg.max_evals })
}

/// Wolfe search: sufficient decrease plus the curvature condition
/// `phi'(alpha) >= c2 phi'(0)`. Backtracks on an Armijo failure and extends
/// on a curvature failure, bisecting once both sides of a bracket are known.
/// An accepted step guarantees `yᵀs > 0` for the subsequent quasi-Newton
/// update.
pub fn wolfe_backtrack(
    mut obj: impl FnMut(f64) -> (f64, f64),
    phi0: f64,
    dphi0: f64,
    cfg: &LineSearchConfig,
) -> Result<f64, LineSearchError> {
    if dphi0 >= 0.0 {
        return Err(LineSearchError::NotDescent(dphi0));
    }
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let mut alpha = cfg.alpha0;
    for _ in 0..cfg.max_evals {
        let (v, dv) = obj(alpha);
        if !armijo_ok(v, phi0, dphi0, cfg.c1, alpha) {
            hi = alpha;
            alpha = 0.5 * (lo + hi);
        } else if dv < cfg.c2 * dphi0 {
            lo = alpha;
            alpha = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * alpha };
        } else {
            return Ok(alpha);
        }
    }
    Err(LineSearchError::Failed { evals: cfg.max_evals })
}

/// Strong-Wolfe search via bracket-then-zoom with cubic interpolation and a
/// bisection fallback. Both strong-Wolfe inequalities hold for the returned
/// step.
pub fn zoom_strong_wolfe(
    mut obj: impl FnMut(f64) -> (f64, f64),
    phi0: f64,
    dphi0: f64,
    cfg: &LineSearchConfig,
) -> Result<f64, LineSearchError> {
    if dphi0 >= 0.0 {
        return Err(LineSearchError::NotDescent(dphi0));
    }
    let mut evals = 0usize;
    let mut a_prev = 0.0_f64;
    let mut f_prev = phi0;
    let mut d_prev = dphi0;
    let mut alpha = cfg.alpha0;
    let mut first = true;
    while evals < cfg.max_evals {
        let (v, dv) = obj(alpha);
        evals += 1;
        if !armijo_ok(v, phi0, dphi0, cfg.c1, alpha) || (!first && v >= f_prev) {
            return zoom(
                &mut obj, phi0, dphi0, cfg, &mut evals,
                Bracket { a: a_prev, f: f_prev, d: d_prev },
                Bracket { a: alpha, f: v, d: dv },
            );
        }
        if dv.abs() <= -cfg.c2 * dphi0 {
            return Ok(alpha);
        }
        if dv >= 0.0 {
            return zoom(
                &mut obj, phi0, dphi0, cfg, &mut evals,
                Bracket { a: alpha, f: v, d: dv },
                Bracket { a: a_prev, f: f_prev, d: d_prev },
            );
        }
        a_prev = alpha;
        f_prev = v;
        d_prev = dv;
        alpha *= 2.0;
        first = false;
    }
    Err(LineSearchError::Failed { evals })
}

#[derive(Clone, Copy)]
struct Bracket {
    a: f64,
    f: f64,
    d: f64,
}

fn zoom(
    obj: &mut impl FnMut(f64) -> (f64, f64),
    phi0: f64,
    dphi0: f64,
    cfg: &LineSearchConfig,
    evals: &mut usize,
    mut lo: Bracket,
    mut hi: Bracket,
) -> Result<f64, LineSearchError> {
    while *evals < cfg.max_evals {
        let alpha = interpolate(lo, hi);
        let (v, dv) = obj(alpha);
        *evals += 1;
        if !armijo_ok(v, phi0, dphi0, cfg.c1, alpha) || v >= lo.f {
            hi = Bracket { a: alpha, f: v, d: dv };
        } else {
            if dv.abs() <= -cfg.c2 * dphi0 {
                return Ok(alpha);
            }
            if dv * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = Bracket { a: alpha, f: v, d: dv };
        }
        if (hi.a - lo.a).abs() < 1e-16 * (1.0 + lo.a.abs()) {
            break;
        }
    }
    Err(LineSearchError::Failed { evals: *evals })
}

/// Cubic minimizer of the Hermite interpolant on the bracket, falling back
/// to bisection when the minimizer leaves the bracket or crowds an endpoint.
fn interpolate(lo: Bracket, hi: Bracket) -> f64 {
    let (x1, f1, g1) = (lo.a, lo.f, lo.d);
    let (x2, f2, g2) = (hi.a, hi.f, hi.d);
    let mid = 0.5 * (x1 + x2);
    if (x2 - x1).abs() < 1e-300 {
        return mid;
    }
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let disc = d1 * d1 - g1 * g2;
    if disc < 0.0 || !disc.is_finite() {
        return mid;
    }
    let d2 = disc.sqrt() * (x2 - x1).signum();
    let denom = g2 - g1 + 2.0 * d2;
    if denom.abs() < 1e-300 {
        return mid;
    }
    let cand = x2 - (x2 - x1) * (g2 + d2 - d1) / denom;
    let (a_min, a_max) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
    let margin = 1e-3 * (a_max - a_min);
    if !cand.is_finite() || cand < a_min + margin || cand > a_max - margin {
        return mid;
    }
    cand
}

// ---------------------------------------------------------------------------
// linear trust region
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrustRegionState {
    pub delta: f64,
    pub delta_max: f64,
    pub eta_accept: f64,
    pub shrink_threshold: f64,
    pub grow_threshold: f64,
    pub shrink_factor: f64,
    pub grow_factor: f64,
}

impl Default for TrustRegionState {
    fn default() -> Self {
        Self {
            delta: 1.0,
            delta_max: 100.0,
            eta_accept: 0.1,
            shrink_threshold: 0.25,
            grow_threshold: 0.75,
            shrink_factor: 0.25,
            grow_factor: 2.0,
        }
    }
}

#[derive(Debug)]
pub struct TrustRegionOutcome {
    pub step: Vec<f64>,
    pub accepted: bool,
    pub rho: f64,
    pub state: TrustRegionState,
}

impl TrustRegionState {
    fn updated_radius(&self, rho: f64, at_boundary: bool) -> f64 {
        if rho < self.shrink_threshold {
            self.delta * self.shrink_factor
        } else if rho > self.grow_threshold && at_boundary {
            (self.delta * self.grow_factor).min(self.delta_max)
        } else {
            self.delta
        }
    }
}

/// One step of the linear (first-order model) trust region: the steepest
/// descent direction truncated to the boundary, `p = -Δ g/‖g‖`, accepted by
/// the actual-vs-predicted reduction ratio. Rejected steps leave `x`
/// unchanged; only the radius shrinks.
pub fn trust_region_step(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    fx: f64,
    g: &[f64],
    state: &TrustRegionState,
) -> TrustRegionOutcome {
    let gn = linalg::norm2(g);
    assert!(gn > 0.0, "trust_region_step requires a nonzero gradient");
    let p: Vec<f64> = g.iter().map(|gi| -state.delta * gi / gn).collect();
    let predicted = state.delta * gn; // m(0) - m(p) = -gᵀp
    let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + pi).collect();
    let actual = fx - f(&trial);
    let rho = if actual.is_finite() { actual / predicted } else { f64::NEG_INFINITY };
    let accepted = rho >= state.eta_accept;
    let mut next = state.clone();
    next.delta = state.updated_radius(rho, true);
    TrustRegionOutcome { step: p, accepted, rho, state: next }
}

/// Trust-region acceptance along an externally supplied direction (the
/// quasi-Newton step): the direction is truncated to the radius, never
/// inflated, and judged with the same linear-model ratio. The radius grows
/// only when the step actually sat on the boundary.
pub fn trust_region_step_along(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    fx: f64,
    g: &[f64],
    d: &[f64],
    state: &TrustRegionState,
) -> TrustRegionOutcome {
    let dn = linalg::norm2(d);
    assert!(dn > 0.0, "direction must be nonzero");
    let scale = (state.delta / dn).min(1.0);
    let p: Vec<f64> = d.iter().map(|di| scale * di).collect();
    let predicted = -linalg::dot(g, &p);
    let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + pi).collect();
    let actual = fx - f(&trial);
    let rho = if predicted > 0.0 && actual.is_finite() {
        actual / predicted
    } else {
        f64::NEG_INFINITY
    };
    let accepted = rho >= state.eta_accept;
    let mut next = state.clone();
    next.delta = state.updated_radius(rho, scale < 1.0);
    TrustRegionOutcome { step: p, accepted, rho, state: next }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad1d() -> (impl FnMut(f64) -> (f64, f64), f64, f64) {
        // phi(a) = 1/2 (1-a)^2 along x=1, d=-1 for f = x^2/2
        let obj = |a: f64| (0.5 * (1.0 - a) * (1.0 - a), -(1.0 - a));
        (obj, 0.5, -1.0)
    }

    #[test]
    fn armijo_hand_case() {
        // f = x^2 at x=1 along d=-2: phi(a) = (1-2a)^2, dphi0 = -4
        let cfg = LineSearchConfig::default();
        let alpha =
            armijo_backtrack(|a| (1.0 - 2.0 * a) * (1.0 - 2.0 * a), 1.0, -4.0, &cfg).unwrap();
        assert_eq!(alpha, 0.5);
    }

    #[test]
    fn armijo_accepts_exact_minimizer_first() {
        // phi(a) = (1-a)^2: alpha0 = 1 lands at the minimum
        let cfg = LineSearchConfig::default();
        let alpha = armijo_backtrack(|a| (1.0 - a) * (1.0 - a), 1.0, -2.0, &cfg).unwrap();
        assert_eq!(alpha, 1.0);
    }

    #[test]
    fn armijo_rejects_ascent() {
        let cfg = LineSearchConfig::default();
        let err = armijo_backtrack(|_| 0.0, 1.0, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, LineSearchError::NotDescent(_)));
    }

    #[test]
    fn wolfe_quadratic_exact_step() {
        let (obj, phi0, dphi0) = quad1d();
        let cfg = LineSearchConfig::default();
        let alpha = wolfe_backtrack(obj, phi0, dphi0, &cfg).unwrap();
        assert_eq!(alpha, 1.0); // phi'(1) = 0 >= -0.9
    }

    #[test]
    fn wolfe_extends_from_tiny_alpha0() {
        let (obj, phi0, dphi0) = quad1d();
        let cfg = LineSearchConfig { alpha0: 0.01, ..Default::default() };
        let alpha = wolfe_backtrack(obj, phi0, dphi0, &cfg).unwrap();
        // both conditions must hold at the returned step
        let (v, dv) = (0.5 * (1.0 - alpha) * (1.0 - alpha), -(1.0 - alpha));
        assert!(v <= phi0 + cfg.c1 * alpha * dphi0);
        assert!(dv >= cfg.c2 * dphi0);
        assert!(alpha > 0.01);
    }

    #[test]
    fn wolfe_fails_on_linear_descent() {
        let cfg = LineSearchConfig::default();
        let err = wolfe_backtrack(|a| (-a, -1.0), 0.0, -1.0, &cfg).unwrap_err();
        assert!(matches!(err, LineSearchError::Failed { .. }));
    }

    #[test]
    fn zoom_quadratic_takes_unit_step() {
        let (obj, phi0, dphi0) = quad1d();
        let cfg = LineSearchConfig::default();
        let alpha = zoom_strong_wolfe(obj, phi0, dphi0, &cfg).unwrap();
        assert_eq!(alpha, 1.0);
    }

    #[test]
    fn zoom_quartic_lands_in_strong_wolfe_region() {
        // f(x) = x^4 - x from x = 0 along d = 1
        let obj = |a: f64| (a * a * a * a - a, 4.0 * a * a * a - 1.0);
        let cfg = LineSearchConfig::default();
        let alpha = zoom_strong_wolfe(obj, 0.0, -1.0, &cfg).unwrap();
        let slope = 4.0 * alpha * alpha * alpha - 1.0;
        assert!(slope.abs() <= cfg.c2, "strong curvature violated: {slope}");
        assert!(alpha * alpha * alpha * alpha - alpha <= -cfg.c1 * alpha);
        // near the stationary point of the restriction
        assert!((alpha - 0.63).abs() < 0.4);
    }

    #[test]
    fn zoom_region_contains_strong_region() {
        // c2 -> 1 limit: every strong-Wolfe point is a plain Wolfe point.
        let phi = |a: f64| 0.5 * (1.0 - a) * (1.0 - a);
        let dphi = |a: f64| -(1.0 - a);
        let (c1, c2) = (1e-4, 0.9);
        for i in 1..200 {
            let a = i as f64 * 0.02;
            let armijo = phi(a) <= phi(0.0) + c1 * a * (-1.0);
            let strong = dphi(a).abs() <= c2;
            let weak = dphi(a) >= -c2;
            if armijo && strong {
                assert!(weak, "strong point not in weak region at a={a}");
            }
        }
    }

    #[test]
    fn trust_region_linear_model_exact() {
        // f = gᵀx: the model is exact, rho = 1, accept and grow.
        let g = vec![1.0, -2.0];
        let x = vec![0.0, 0.0];
        let state = TrustRegionState::default();
        let f = |p: &[f64]| p[0] - 2.0 * p[1];
        let fx = 0.0;
        let out = trust_region_step(f, &x, fx, &g, &state);
        assert!((out.rho - 1.0).abs() < 1e-14);
        assert!(out.accepted);
        assert_eq!(out.state.delta, 2.0);
    }

    #[test]
    fn trust_region_quarter_ratio_accepts_at_boundary_eta() {
        // f = x²/2 at x = 2 with Δ = 3: p = −3, predicted = Δ‖g‖ = 6,
        // actual = f(2) − f(−1) = 2 − 0.5 = 1.5, ρ = 0.25 exactly (all values
        // binary-exact). Accepted at η = 0.25; radius held (ρ is not < 0.25
        // and not > 0.75).
        let x = vec![2.0];
        let g = vec![2.0];
        let f = |p: &[f64]| 0.5 * p[0] * p[0];
        let state = TrustRegionState {
            delta: 3.0,
            eta_accept: 0.25,
            ..Default::default()
        };
        let out = trust_region_step(f, &x, f(&x), &g, &state);
        assert_eq!(out.rho, 0.25);
        assert!(out.accepted);
        assert_eq!(out.state.delta, 3.0);
    }

    #[test]
    fn trust_region_rejects_and_shrinks_on_increase() {
        // moving downhill in the model but f increases: rho < 0
        let x = vec![1.0];
        let g = vec![-1.0]; // model says decrease toward +x
        let f = |p: &[f64]| (p[0] - 1.0) * (p[0] - 1.0); // increases away from x
        let state = TrustRegionState::default();
        let out = trust_region_step(f, &x, 0.0, &g, &state);
        assert!(out.rho < 0.0);
        assert!(!out.accepted);
        assert_eq!(out.state.delta, 0.25);
    }

    #[test]
    fn trust_region_radius_stays_bounded() {
        let mut state = TrustRegionState { delta: 80.0, ..Default::default() };
        let g = vec![1.0];
        let x = vec![0.0];
        for _ in 0..5 {
            let out = trust_region_step(|p: &[f64]| p[0], &x, 0.0, &g, &state);
            state = out.state;
            assert!(state.delta > 0.0 && state.delta <= state.delta_max);
        }
        assert_eq!(state.delta, 100.0);
    }
}
