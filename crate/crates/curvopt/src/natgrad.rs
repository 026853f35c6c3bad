//! Gauss-Newton / natural-gradient directions for nonlinear least squares:
//! Levenberg-Marquardt damped solves in parameter space or (through the
//! push-through identity) in sample space, optional Jacobi equilibration,
//! and SPRING momentum for the linearized subproblem.
//!
//! Parameter space: `(JᵀJ + λI) δ = Jᵀr`,  sample space:
//! `δ = Jᵀ (JJᵀ + λI)⁻¹ r` — algebraically identical, with the sample-space
//! form cubic in N instead of P (the regime N < P is the common one here).

use thiserror::Error;

use crate::globalization::{self, LineSearchConfig};
use crate::linalg::{self, LinalgError, Mat, SymMat};
use crate::objective::ResidualProblem;
use crate::quasinewton::UpdateDecision;

#[derive(Debug, Error)]
pub enum NgError {
    #[error("damped least-squares solve failed after {attempts} damping escalations")]
    SolveFailed { attempts: usize },
    #[error("line search failed in natural-gradient step")]
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgMode {
    ParamSpace,
    KernelSpace,
    /// Kernel space iff N < P.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaSchedule {
    Fixed,
    /// Grow ×10 on a rejected step or failed factorization, shrink ×0.1 when
    /// the actual-vs-predicted ratio exceeds 0.75.
    TrustAdaptive,
}

#[derive(Debug, Clone)]
pub struct NgConfig {
    pub lambda: f64,
    pub lambda_min: f64,
    pub schedule: LambdaSchedule,
    pub jacobi: bool,
    pub mode: NgMode,
    /// SPRING momentum; 0 disables the recursion entirely.
    pub momentum_mu: f64,
    /// None: fixed unit step. Some(cfg): Armijo backtracking on the true loss.
    pub line_search: Option<LineSearchConfig>,
}

impl Default for NgConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-8,
            lambda_min: 1e-14,
            schedule: LambdaSchedule::TrustAdaptive,
            jacobi: false,
            mode: NgMode::Auto,
            momentum_mu: 0.0,
            line_search: Some(LineSearchConfig::default()),
        }
    }
}

/// Gauss-Newton matrix `G = JᵀJ`.
pub fn assemble_gramian(j: &Mat) -> SymMat {
    j.gram()
}

/// Jacobi equilibration of `K`: returns the diagonal `D` (clamped below at
/// 1e-30 so dead parameters cannot zero a pivot) and `K̃ = D^{-1/2} K D^{-1/2}`
/// with unit diagonal.
pub fn jacobi_scaled(k: &SymMat) -> (Vec<f64>, SymMat) {
    let n = k.n();
    let d: Vec<f64> = k.diag().iter().map(|x| x.max(1e-30)).collect();
    let dsqrt_inv: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut kt = SymMat::zeros(n);
    for i in 0..n {
        for j in i..n {
            kt.set_sym(i, j, k.get(i, j) * dsqrt_inv[i] * dsqrt_inv[j]);
        }
    }
    (d, kt)
}

const MAX_DAMPING_ESCALATIONS: usize = 6;

/// Parameter-space LM direction: solves `(JᵀJ + λI) δ = Jᵀr`, optionally on
/// the Jacobi-equilibrated system. A failed factorization escalates λ by ×10
/// up to six times before giving up.
pub fn ng_direction_param(
    j: &Mat,
    r: &[f64],
    lambda: f64,
    jacobi: bool,
) -> Result<Vec<f64>, NgError> {
    assert!(lambda > 0.0);
    let mut k = j.gram();
    let rhs = j.tr_matvec(r);
    let mut lam = lambda;
    for attempt in 0..=MAX_DAMPING_ESCALATIONS {
        let mut kd = k.clone();
        kd.add_diag(lam);
        let solve = if jacobi {
            let (d, kt) = jacobi_scaled(&kd);
            debug_assert!(kt.diag().iter().all(|x| (x - 1.0).abs() < 1e-14));
            let scaled_rhs: Vec<f64> =
                rhs.iter().zip(&d).map(|(v, di)| v / di.sqrt()).collect();
            linalg::cholesky_solve(&kt, &scaled_rhs).map(|z| {
                z.iter().zip(&d).map(|(zi, di)| zi / di.sqrt()).collect::<Vec<f64>>()
            })
        } else {
            linalg::cholesky_solve(&kd, &rhs)
        };
        match solve {
            Ok(delta) => return Ok(delta),
            Err(LinalgError::NotSpd { .. }) if attempt < MAX_DAMPING_ESCALATIONS => {
                lam *= 10.0;
            }
            Err(_) => break,
        }
    }
    // k left in scope for symmetry with the retry loop above
    k.add_diag(0.0);
    Err(NgError::SolveFailed { attempts: MAX_DAMPING_ESCALATIONS })
}

/// Sample-space (kernel) LM direction via the push-through identity:
/// `δ = Jᵀ (JJᵀ + λI)⁻¹ r`.
pub fn ng_direction_kernel(j: &Mat, r: &[f64], lambda: f64) -> Result<Vec<f64>, NgError> {
    assert!(lambda > 0.0);
    let mut a = j.kernel_gram();
    let mut lam = lambda;
    for attempt in 0..=MAX_DAMPING_ESCALATIONS {
        let mut ad = a.clone();
        ad.add_diag(lam);
        match linalg::cholesky_solve(&ad, r) {
            Ok(z) => return Ok(j.tr_matvec(&z)),
            Err(LinalgError::NotSpd { .. }) if attempt < MAX_DAMPING_ESCALATIONS => {
                lam *= 10.0;
            }
            Err(_) => break,
        }
    }
    a.add_diag(0.0);
    Err(NgError::SolveFailed { attempts: MAX_DAMPING_ESCALATIONS })
}

/// Momentum state for the SPRING recursion (previous accelerated direction).
#[derive(Debug, Clone, PartialEq)]
pub struct SpringState {
    pub phi_dir: Vec<f64>,
}

impl SpringState {
    pub fn zeros(p: usize) -> Self {
        Self { phi_dir: vec![0.0; p] }
    }
}

/// One SPRING recursion step:
/// `φ = μ φ_prev + Jᵀ(JJᵀ + λI)⁻¹ (r − μ J φ_prev)`.
/// With μ = 0 this takes exactly the plain kernel path, bit for bit.
pub fn spring_direction(
    j: &Mat,
    r: &[f64],
    lambda: f64,
    mu: f64,
    state: &SpringState,
) -> Result<(Vec<f64>, SpringState), NgError> {
    assert!((0.0..=1.0).contains(&mu));
    if mu == 0.0 {
        let phi = ng_direction_kernel(j, r, lambda)?;
        return Ok((phi.clone(), SpringState { phi_dir: phi }));
    }
    let j_phi = j.matvec(&state.phi_dir);
    let rhs: Vec<f64> = r.iter().zip(&j_phi).map(|(ri, ji)| ri - mu * ji).collect();
    let base = ng_direction_kernel(j, &rhs, lambda)?;
    let phi: Vec<f64> =
        state.phi_dir.iter().zip(&base).map(|(p, b)| mu * p + b).collect();
    Ok((phi.clone(), SpringState { phi_dir: phi }))
}

/// Outcome of one damped Gauss-Newton / SPRING step.
#[derive(Debug, Clone)]
pub struct NgStepInfo {
    pub loss: f64,
    pub grad_inf: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub decision: UpdateDecision,
    pub converged: bool,
}

/// Driver holding the adaptive damping parameter and SPRING momentum.
pub struct NaturalGradient {
    pub config: NgConfig,
    pub lambda: f64,
    spring: Option<SpringState>,
}

impl NaturalGradient {
    pub fn new(config: NgConfig) -> Self {
        let lambda = config.lambda;
        Self { config, lambda, spring: None }
    }

    fn direction(
        &mut self,
        j: &Mat,
        r: &[f64],
        p: usize,
    ) -> Result<Vec<f64>, NgError> {
        let n = j.rows();
        let kernel = match self.config.mode {
            NgMode::ParamSpace => false,
            NgMode::KernelSpace => true,
            NgMode::Auto => n < p,
        };
        if self.config.momentum_mu > 0.0 {
            let state = self
                .spring
                .get_or_insert_with(|| SpringState::zeros(p))
                .clone();
            let (phi, next) =
                spring_direction(j, r, self.lambda, self.config.momentum_mu, &state)?;
            self.spring = Some(next);
            Ok(phi)
        } else if kernel {
            ng_direction_kernel(j, r, self.lambda)
        } else {
            ng_direction_param(j, r, self.lambda, self.config.jacobi)
        }
    }

    /// One damped Gauss-Newton update `θ ← θ − α δ` with the configured step
    /// rule. On a line-search failure the damping grows and the direction is
    /// recomputed (up to three attempts) before the step errors out.
    pub fn step(
        &mut self,
        problem: &dyn ResidualProblem,
        theta: &mut Vec<f64>,
    ) -> Result<NgStepInfo, NgError> {
        let p = theta.len();
        let (r, j) = problem.residuals_and_jacobian(theta);
        let loss0 = 0.5 * linalg::dot(&r, &r);
        let grad = j.tr_matvec(&r);
        let grad_inf = linalg::norm_inf(&grad);
        if grad_inf == 0.0 {
            return Ok(NgStepInfo {
                loss: loss0,
                grad_inf,
                alpha: 0.0,
                lambda: self.lambda,
                decision: UpdateDecision::Converged,
                converged: true,
            });
        }
        for _attempt in 0..3 {
            let delta = self.direction(&j, &r, p)?;
            let g_delta = linalg::dot(&grad, &delta);
            if g_delta <= 0.0 {
                // damping too weak to produce a descent direction
                self.lambda *= 10.0;
                continue;
            }
            let alpha = match &self.config.line_search {
                None => 1.0,
                Some(cfg) => {
                    match globalization::armijo_backtrack(
                        |a| {
                            let trial = linalg::add_scaled(theta, -a, &delta);
                            problem.value(&trial)
                        },
                        loss0,
                        -g_delta,
                        cfg,
                    ) {
                        Ok(a) => a,
                        Err(_) => {
                            if self.config.schedule == LambdaSchedule::TrustAdaptive {
                                self.lambda *= 10.0;
                                continue;
                            } else {
                                return Err(NgError::LineSearchFailed);
                            }
                        }
                    }
                }
            };
            let trial = linalg::add_scaled(theta, -alpha, &delta);
            let loss1 = problem.value(&trial);
            if self.config.schedule == LambdaSchedule::TrustAdaptive {
                let predicted = alpha * (1.0 - 0.5 * alpha) * g_delta;
                let rho = if predicted > 0.0 { (loss0 - loss1) / predicted } else { 0.0 };
                if rho > 0.75 {
                    self.lambda = (self.lambda * 0.1).max(self.config.lambda_min);
                } else if rho < 0.25 {
                    self.lambda *= 10.0;
                }
            }
            if !loss1.is_finite() || loss1 > loss0 {
                // rejected: grow damping and retry from the same point
                self.lambda *= 10.0;
                if self.spring.is_some() {
                    self.spring = Some(SpringState::zeros(p));
                }
                continue;
            }
            *theta = trial;
            return Ok(NgStepInfo {
                loss: loss1,
                grad_inf,
                alpha,
                lambda: self.lambda,
                decision: UpdateDecision::Updated,
                converged: false,
            });
        }
        Err(NgError::SolveFailed { attempts: 3 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Objective;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        let mut m = Mat::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        m
    }

    #[test]
    fn gramian_hand_cases() {
        let mut j = Mat::zeros(2, 2);
        j.set(0, 0, 1.0);
        j.set(1, 1, 1.0);
        let g = assemble_gramian(&j);
        assert_eq!(g, SymMat::identity(2));

        let j = Mat::from_rows(&[vec![1.0, 1.0]]);
        let g = assemble_gramian(&j);
        for i in 0..2 {
            for k in 0..2 {
                assert_eq!(g.get(i, k), 1.0);
            }
        }
    }

    #[test]
    fn gramian_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let j = random_mat(&mut rng, 7, 5);
            let g = assemble_gramian(&j);
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q = g.quad_form(&x);
            assert!(q >= -1e-12 * linalg::dot(&x, &x).max(1.0));
        }
    }

    #[test]
    fn jacobi_scaling_hand_case() {
        let k = SymMat::from_rows(&[vec![4.0, 2.0], vec![2.0, 9.0]]);
        let (d, kt) = jacobi_scaled(&k);
        assert_eq!(d, vec![4.0, 9.0]);
        assert!((kt.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((kt.get(1, 1) - 1.0).abs() < 1e-15);
        assert!((kt.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn param_direction_identity_case() {
        // J = I, r = b, λ = 1: (I + I) δ = b → δ = b/2
        let mut j = Mat::zeros(3, 3);
        for i in 0..3 {
            j.set(i, i, 1.0);
        }
        let d = ng_direction_param(&j, &[2.0, 4.0, -6.0], 1.0, false).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-14);
        assert!((d[1] - 2.0).abs() < 1e-14);
        assert!((d[2] + 3.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_direction_wide_hand_case() {
        // J = [[1,1]], r = (1), λ = 1: JJᵀ = 2, δ = Jᵀ(1/3) = (1/3, 1/3)
        let j = Mat::from_rows(&[vec![1.0, 1.0]]);
        let d = ng_direction_kernel(&j, &[1.0], 1.0).unwrap();
        assert!((d[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((d[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn push_through_identity_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..100 {
            let n = rng.gen_range(2..30);
            let p = rng.gen_range(2..40);
            let j = random_mat(&mut rng, n, p);
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lambda = 10f64.powf(rng.gen_range(-6.0..1.0));
            let a = ng_direction_param(&j, &r, lambda, false).unwrap();
            let b = ng_direction_kernel(&j, &r, lambda).unwrap();
            let diff = linalg::norm2(&linalg::sub(&a, &b));
            let scale = linalg::norm2(&a).max(1e-30);
            assert!(diff <= 1e-8 * scale, "push-through violated: {}", diff / scale);
        }
    }

    #[test]
    fn jacobi_equals_unscaled_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..50 {
            let j = random_mat(&mut rng, 12, 8);
            let r: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lambda = 1e-3;
            let plain = ng_direction_param(&j, &r, lambda, false).unwrap();
            let scaled = ng_direction_param(&j, &r, lambda, true).unwrap();
            let diff = linalg::norm2(&linalg::sub(&plain, &scaled));
            assert!(diff <= 1e-10 * linalg::norm2(&plain).max(1e-30));
        }
    }

    #[test]
    fn spring_mu_zero_is_kernel_direction_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let j = random_mat(&mut rng, 6, 14);
        let r: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let state = SpringState { phi_dir: (0..14).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let (phi, _) = spring_direction(&j, &r, 0.5, 0.0, &state).unwrap();
        let kernel = ng_direction_kernel(&j, &r, 0.5).unwrap();
        assert_eq!(phi, kernel, "mu = 0 must reduce exactly to the kernel path");
    }

    #[test]
    fn spring_zero_history_matches_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let j = random_mat(&mut rng, 5, 9);
        let r: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (phi, _) = spring_direction(&j, &r, 0.3, 0.9, &SpringState::zeros(9)).unwrap();
        let kernel = ng_direction_kernel(&j, &r, 0.3).unwrap();
        let diff = linalg::norm2(&linalg::sub(&phi, &kernel));
        assert!(diff <= 1e-14 * linalg::norm2(&kernel).max(1e-30));
    }

    #[test]
    fn spring_fixed_point_satisfies_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let j = random_mat(&mut rng, 8, 12);
        let r: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (mu, lambda) = (0.9, 1.0);
        let mut state = SpringState::zeros(12);
        let mut phi = vec![0.0; 12];
        for _ in 0..2000 {
            let (next, st) = spring_direction(&j, &r, lambda, mu, &state).unwrap();
            let delta = linalg::norm2(&linalg::sub(&next, &phi));
            phi = next;
            state = st;
            if delta < 1e-14 {
                break;
            }
        }
        // fixed point of the recursion: (JᵀJ + λI) φ* = Jᵀr + λ μ φ*
        let lhs = {
            let mut k = j.gram();
            k.add_diag(lambda);
            k.matvec(&phi)
        };
        let mut rhs = j.tr_matvec(&r);
        linalg::axpy(lambda * mu, &phi, &mut rhs);
        let resid = linalg::norm2(&linalg::sub(&lhs, &rhs));
        assert!(resid <= 1e-10 * linalg::norm2(&rhs).max(1e-30), "resid {resid}");
    }

    // -- full step on synthetic residual problems ----------------------------

    struct LinearResidual {
        a: Mat,
        b: Vec<f64>,
    }

    impl Objective for LinearResidual {
        fn dim(&self) -> usize {
            self.a.cols()
        }
        fn value(&self, th: &[f64]) -> f64 {
            let r = linalg::sub(&self.a.matvec(th), &self.b);
            0.5 * linalg::dot(&r, &r)
        }
        fn value_grad(&self, th: &[f64]) -> (f64, Vec<f64>) {
            let r = linalg::sub(&self.a.matvec(th), &self.b);
            (0.5 * linalg::dot(&r, &r), self.a.tr_matvec(&r))
        }
    }

    impl ResidualProblem for LinearResidual {
        fn num_residuals(&self) -> usize {
            self.a.rows()
        }
        fn residuals(&self, th: &[f64]) -> Vec<f64> {
            linalg::sub(&self.a.matvec(th), &self.b)
        }
        fn residuals_and_jacobian(&self, th: &[f64]) -> (Vec<f64>, Mat) {
            (self.residuals(th), self.a.clone())
        }
    }

    struct RosenbrockResidual;

    impl Objective for RosenbrockResidual {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, th: &[f64]) -> f64 {
            let r = self.residuals(th);
            0.5 * linalg::dot(&r, &r)
        }
        fn value_grad(&self, th: &[f64]) -> (f64, Vec<f64>) {
            let (r, j) = self.residuals_and_jacobian(th);
            (0.5 * linalg::dot(&r, &r), j.tr_matvec(&r))
        }
    }

    impl ResidualProblem for RosenbrockResidual {
        fn num_residuals(&self) -> usize {
            2
        }
        fn residuals(&self, th: &[f64]) -> Vec<f64> {
            let s = 200.0_f64.sqrt();
            vec![s * (th[1] - th[0] * th[0]), 2.0_f64.sqrt() * (1.0 - th[0])]
        }
        fn residuals_and_jacobian(&self, th: &[f64]) -> (Vec<f64>, Mat) {
            let s = 200.0_f64.sqrt();
            let mut j = Mat::zeros(2, 2);
            j.set(0, 0, -2.0 * s * th[0]);
            j.set(0, 1, s);
            j.set(1, 0, -(2.0_f64.sqrt()));
            (self.residuals(th), j)
        }
    }

    #[test]
    fn gauss_newton_exact_on_linear_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let a = random_mat(&mut rng, 10, 4);
        let x_star: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&x_star);
        let prob = LinearResidual { a, b };
        let mut ng = NaturalGradient::new(NgConfig {
            lambda: 1e-12,
            schedule: LambdaSchedule::Fixed,
            line_search: None,
            ..Default::default()
        });
        let mut theta = vec![0.0; 4];
        ng.step(&prob, &mut theta).unwrap();
        let err = linalg::norm2(&linalg::sub(&theta, &x_star));
        assert!(err < 1e-6, "one-step GN error {err}");
    }

    #[test]
    fn gauss_newton_solves_rosenbrock_residuals() {
        let prob = RosenbrockResidual;
        let mut ng = NaturalGradient::new(NgConfig::default());
        let mut theta = vec![-1.2, 1.0];
        for _ in 0..50 {
            ng.step(&prob, &mut theta).unwrap();
        }
        let err = linalg::norm2(&linalg::sub(&theta, &[1.0, 1.0]));
        assert!(err <= 1e-8, "theta = {theta:?}");
    }
}
