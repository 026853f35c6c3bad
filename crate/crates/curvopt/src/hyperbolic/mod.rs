//! Shock-aware numerics: the Burgers entropy oracle and entropy pair, Roe
//! averages/Jacobian, shock-region detection, gradient annihilation, and the
//! HLLC flux for the 1D Euler equations.

pub mod burgers;
pub mod euler;

pub use burgers::{
    burgers_entropy_solution, burgers_shock_speed, char_map, entropy_penalty, entropy_residual,
    gradient_annihilation, initial_condition, shock_region_mask, ShockDetectConfig, T_SHOCK,
};
pub use euler::{
    contact_speed, euler_flux, hllc_flux, roe_average, roe_jacobian, roe_matrix, star_state,
    viscous_euler_residuals, ConservedState, EulerError, PrimitiveState, RoeAverages,
    ViscousFields, WaveSpeedEstimate, GAMMA_DEFAULT,
};
