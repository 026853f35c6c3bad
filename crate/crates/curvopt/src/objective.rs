//! Objective abstractions shared by the optimizer modules.

use crate::linalg::Mat;

/// A smooth scalar objective with gradient access. Implementations must be
/// pure functions of `theta` (and, for batched objectives, of the batch
/// index set), so evaluations can be repeated and parallelized freely.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64]) -> f64;
    fn value_grad(&self, theta: &[f64]) -> (f64, Vec<f64>);

    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        self.value_grad(theta).1
    }
}

/// An objective that can be evaluated on a mini-batch of its samples.
/// `batch` holds sample indices in `0..num_samples()`.
pub trait BatchObjective: Objective {
    fn num_samples(&self) -> usize;
    fn batch_value_grad(&self, theta: &[f64], batch: &[usize]) -> (f64, Vec<f64>);
}

/// A weighted least-squares objective `L(θ) = ½‖r(θ)‖²` exposing its
/// residual vector and per-sample Jacobian rows for Gauss-Newton /
/// natural-gradient solvers.
pub trait ResidualProblem: Objective {
    fn num_residuals(&self) -> usize;
    fn residuals(&self, theta: &[f64]) -> Vec<f64>;
    /// Residuals and the dense Jacobian with row `i` equal to `∂rᵢ/∂θ`.
    fn residuals_and_jacobian(&self, theta: &[f64]) -> (Vec<f64>, Mat);
}
