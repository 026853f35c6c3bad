//! Curvature-aware optimization for nonlinear least-squares training problems.
//!
//! The crate bundles three optimizer families behind a common objective
//! abstraction, together with the differentiation machinery and benchmark
//! problems used to exercise them:
//!
//! * [`quasinewton`] — the self-scaled Broyden family (BFGS, DFP, SSBFGS,
//!   SSBroyden) in inverse-Hessian form, a gated stochastic variant for
//!   mini-batch training, and an AdamW baseline.
//! * [`natgrad`] — Gauss-Newton / natural-gradient directions with
//!   Levenberg-Marquardt damping, Jacobi equilibration, the kernel-space
//!   (push-through) solve, and SPRING momentum.
//! * [`globalization`] — Armijo, Wolfe, strong-Wolfe zoom and a linear
//!   trust region.
//! * [`net`] — a small tanh MLP with Fourier-feature embeddings and exact
//!   derivatives (inputs up to second order, parameters via a scalar tape).
//! * [`hyperbolic`] — shock-aware numerics: the Burgers entropy oracle,
//!   Roe averages/Jacobian, and the HLLC flux.
//! * [`problems`] — collocation-based residual problems (Poisson, Helmholtz,
//!   Burgers, Euler/Sod, PK-PD) plus synthetic optimizer smoke tests.
//! * [`diagnostics`] — error metrics, loss-landscape slices, the roofline
//!   calculator, and run logging.
//! * [`driver`] — run orchestration: optimizer chains, curriculum stages,
//!   and artifact emission.

pub mod diagnostics;
pub mod driver;
pub mod globalization;
pub mod hyperbolic;
pub mod linalg;
pub mod natgrad;
pub mod net;
pub mod objective;
pub mod problems;
pub mod quasinewton;

mod parallel;

pub use objective::{BatchObjective, Objective, ResidualProblem};
