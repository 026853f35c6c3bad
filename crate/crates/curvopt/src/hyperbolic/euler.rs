//! 1D compressible Euler kit: primitive/conserved state conversions, Roe
//! averages and the Roe-averaged quasilinear Jacobian, the HLLC approximate
//! Riemann flux, and the viscous-regularization residuals used during
//! warm-up training.

use thiserror::Error;

pub const GAMMA_DEFAULT: f64 = 1.4;

#[derive(Debug, Error, PartialEq)]
pub enum EulerError {
    #[error("non-physical state: {0}")]
    NonPhysical(String),
}

/// Primitive variables (ρ, u, p) with the ratio of specific heats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
    pub gamma: f64,
}

impl PrimitiveState {
    pub fn new(rho: f64, u: f64, p: f64) -> Self {
        Self { rho, u, p, gamma: GAMMA_DEFAULT }
    }

    pub fn validate(&self) -> Result<(), EulerError> {
        if !(self.rho > 0.0 && self.p > 0.0 && self.gamma > 1.0) {
            return Err(EulerError::NonPhysical(format!(
                "rho = {}, p = {}, gamma = {}",
                self.rho, self.p, self.gamma
            )));
        }
        Ok(())
    }

    /// Sound speed `a = √(γp/ρ)`.
    pub fn sound_speed(&self) -> f64 {
        (self.gamma * self.p / self.rho).sqrt()
    }

    /// Total energy density `E = ½ρu² + p/(γ−1)` (ideal adiabatic gas).
    pub fn energy(&self) -> f64 {
        0.5 * self.rho * self.u * self.u + self.p / (self.gamma - 1.0)
    }

    /// Total specific enthalpy `H = (E+p)/ρ = a²/(γ−1) + u²/2`.
    pub fn enthalpy(&self) -> f64 {
        (self.energy() + self.p) / self.rho
    }

    pub fn to_conserved(&self) -> ConservedState {
        ConservedState {
            rho: self.rho,
            mom: self.rho * self.u,
            e: self.energy(),
            gamma: self.gamma,
        }
    }
}

/// Conserved variables (ρ, ρu, E).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedState {
    pub rho: f64,
    pub mom: f64,
    pub e: f64,
    pub gamma: f64,
}

impl ConservedState {
    pub fn velocity(&self) -> f64 {
        self.mom / self.rho
    }

    /// `p = (γ−1)(E − ½ρu²)`
    pub fn pressure(&self) -> f64 {
        let u = self.velocity();
        (self.gamma - 1.0) * (self.e - 0.5 * self.rho * u * u)
    }

    pub fn to_primitive(&self) -> PrimitiveState {
        PrimitiveState { rho: self.rho, u: self.velocity(), p: self.pressure(), gamma: self.gamma }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.rho, self.mom, self.e]
    }
}

/// Physical flux `F(U) = (ρu, ρu² + p, u(E + p))`.
pub fn euler_flux(state: &PrimitiveState) -> [f64; 3] {
    let e = state.energy();
    [
        state.rho * state.u,
        state.rho * state.u * state.u + state.p,
        state.u * (e + state.p),
    ]
}

/// Roe-averaged velocity, enthalpy, and sound speed.
#[derive(Debug, Clone, Copy)]
pub struct RoeAverages {
    pub u: f64,
    pub h: f64,
    pub a: f64,
}

/// √ρ-weighted Roe averages; fails if the averaged sound speed would be
/// imaginary.
pub fn roe_average(left: &PrimitiveState, right: &PrimitiveState) -> Result<RoeAverages, EulerError> {
    left.validate()?;
    right.validate()?;
    let gamma = left.gamma;
    let (wl, wr) = (left.rho.sqrt(), right.rho.sqrt());
    let u = (wl * left.u + wr * right.u) / (wl + wr);
    let h = (wl * left.enthalpy() + wr * right.enthalpy()) / (wl + wr);
    let a_sq = (gamma - 1.0) * (h - 0.5 * u * u);
    if a_sq <= 0.0 {
        return Err(EulerError::NonPhysical(format!("H̃ = {h} ≤ ũ²/2 = {}", 0.5 * u * u)));
    }
    Ok(RoeAverages { u, h, a: a_sq.sqrt() })
}

/// Quasilinear Jacobian `A(U) = ∂F/∂U` in terms of velocity and total
/// specific enthalpy:
///
/// ```text
/// ⎡ 0                       1                γ−1 ⎤' row layout below
/// A = ⎢ (γ−3)/2·u²          −(γ−3)u           γ−1 ⎥
///     ⎣ u(−H + (γ−1)/2·u²)   H − (γ−1)u²      γu  ⎦
/// ```
pub fn roe_jacobian(u: f64, h: f64, gamma: f64) -> [[f64; 3]; 3] {
    [
        [0.0, 1.0, 0.0],
        [
            0.5 * (gamma - 3.0) * u * u,
            -(gamma - 3.0) * u,
            gamma - 1.0,
        ],
        [
            u * (-h + 0.5 * (gamma - 1.0) * u * u),
            h - (gamma - 1.0) * u * u,
            gamma * u,
        ],
    ]
}

/// The Roe matrix `Ã = A(Ũ)` for a left/right pair.
pub fn roe_matrix(
    left: &PrimitiveState,
    right: &PrimitiveState,
) -> Result<[[f64; 3]; 3], EulerError> {
    let avg = roe_average(left, right)?;
    Ok(roe_jacobian(avg.u, avg.h, left.gamma))
}

/// Wave-speed estimates for HLLC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveSpeedEstimate {
    /// `S_L = min(u_L−a_L, u_R−a_R)`, `S_R = max(u_L+a_L, u_R+a_R)`.
    Davis,
    /// Davis bounds widened by the Roe-averaged wave speeds.
    Einfeldt,
}

/// HLLC flux for the 1D Euler equations. The three-wave structure restores
/// the contact discontinuity: cases select on the signs of `(S_L, S*, S_R)`
/// and the star states follow the `ρ_K (S_K − u_K)/(S_K − S*)` form.
pub fn hllc_flux(
    left: &PrimitiveState,
    right: &PrimitiveState,
    estimate: WaveSpeedEstimate,
) -> Result<[f64; 3], EulerError> {
    left.validate()?;
    right.validate()?;
    let (al, ar) = (left.sound_speed(), right.sound_speed());
    let (mut s_l, mut s_r) = (
        (left.u - al).min(right.u - ar),
        (left.u + al).max(right.u + ar),
    );
    if estimate == WaveSpeedEstimate::Einfeldt {
        let avg = roe_average(left, right)?;
        s_l = s_l.min(avg.u - avg.a);
        s_r = s_r.max(avg.u + avg.a);
    }
    if s_l >= s_r {
        return Err(EulerError::NonPhysical(format!("wave speeds collapsed: {s_l} >= {s_r}")));
    }
    let s_star = contact_speed(left, right, s_l, s_r);

    if s_l >= 0.0 {
        return Ok(euler_flux(left));
    }
    if s_r <= 0.0 {
        return Ok(euler_flux(right));
    }
    if s_star >= 0.0 {
        let f = euler_flux(left);
        let u = left.to_conserved().as_array();
        let u_star = star_state(left, s_l, s_star);
        Ok([
            f[0] + s_l * (u_star[0] - u[0]),
            f[1] + s_l * (u_star[1] - u[1]),
            f[2] + s_l * (u_star[2] - u[2]),
        ])
    } else {
        let f = euler_flux(right);
        let u = right.to_conserved().as_array();
        let u_star = star_state(right, s_r, s_star);
        Ok([
            f[0] + s_r * (u_star[0] - u[0]),
            f[1] + s_r * (u_star[1] - u[1]),
            f[2] + s_r * (u_star[2] - u[2]),
        ])
    }
}

/// Contact wave speed
/// `S* = [p_R−p_L + ρ_L u_L(S_L−u_L) − ρ_R u_R(S_R−u_R)]
///       / [ρ_L(S_L−u_L) − ρ_R(S_R−u_R)]`.
pub fn contact_speed(left: &PrimitiveState, right: &PrimitiveState, s_l: f64, s_r: f64) -> f64 {
    let num = right.p - left.p + left.rho * left.u * (s_l - left.u)
        - right.rho * right.u * (s_r - right.u);
    let den = left.rho * (s_l - left.u) - right.rho * (s_r - right.u);
    num / den
}

/// Intermediate (star) state for side K:
/// `U*_K = ρ_K (S_K−u_K)/(S_K−S*) · (1, S*, E_K/ρ_K + (S*−u_K)(S* + p_K/(ρ_K(S_K−u_K))))`.
pub fn star_state(state: &PrimitiveState, s_k: f64, s_star: f64) -> [f64; 3] {
    let e = state.energy();
    let factor = state.rho * (s_k - state.u) / (s_k - s_star);
    let e_star = e / state.rho
        + (s_star - state.u) * (s_star + state.p / (state.rho * (s_k - state.u)));
    [factor, factor * s_star, factor * e_star]
}

/// Point values and derivatives feeding the viscous-regularization residuals.
#[derive(Debug, Clone, Copy, Default)]
pub struct ViscousFields {
    pub rho: f64,
    pub rho_t: f64,
    pub rho_x: f64,
    pub rho_xx: f64,
    pub u: f64,
    pub u_t: f64,
    pub u_x: f64,
    pub u_xx: f64,
    pub p: f64,
    pub p_t: f64,
    pub p_x: f64,
    pub p_xx: f64,
    pub gamma: f64,
}

/// Primitive-form viscous approximation residuals:
///
/// ```text
/// R₀ = ρ_t + u ρ_x + ρ u_x − ν ρ_xx
/// R₁ = ρ u_t + ρ u u_x + p_x − ν (ρ u_xx + 2 ρ_x u_x)
/// R₂ = p_t + u p_x + γ p u_x − ν (p_xx + ρ(γ−1) u_x²)
/// ```
pub fn viscous_euler_residuals(f: &ViscousFields, nu: f64) -> [f64; 3] {
    let r0 = f.rho_t + f.u * f.rho_x + f.rho * f.u_x - nu * f.rho_xx;
    let r1 = f.rho * f.u_t + f.rho * f.u * f.u_x + f.p_x
        - nu * (f.rho * f.u_xx + 2.0 * f.rho_x * f.u_x);
    let r2 = f.p_t + f.u * f.p_x + f.gamma * f.p * f.u_x
        - nu * (f.p_xx + f.rho * (f.gamma - 1.0) * f.u_x * f.u_x);
    [r0, r1, r2]
}
