//! Benchmark residual problems: collocation sets, the least-squares
//! assembly engine, and the concrete PDE/ODE problems built on it.
//!
//! Every problem is a weighted nonlinear least-squares objective
//! `L(θ) = ½‖r(θ)‖²` where each residual block contributes rows
//! `√(λ/N_block)·(raw residual)`, matching the `1/(2N)` collocation loss
//! convention. Problems expose residual vectors and exact Jacobian rows
//! (through the tape) for the Gauss-Newton solvers, batched gradients for
//! the stochastic quasi-Newton path, and reference solutions for metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::Mat;
use crate::net::{forward_on_tape, init_params, JetOut, JetReq, MlpSpec, NodeId, Tape};
use crate::objective::{BatchObjective, Objective, ResidualProblem};
use crate::parallel;

pub mod burgers_entropy;
pub mod burgers_roe;
pub mod euler_sod;
pub mod helmholtz;
pub mod pkpd;
pub mod poisson;
pub mod synthetic;
pub mod viscous_burgers;

pub use burgers_entropy::burgers_entropy_problem;
pub use burgers_roe::burgers_roe_problem;
pub use euler_sod::{euler_sod_hllc_problem, euler_sod_roe_problem};
pub use helmholtz::helmholtz_problem;
pub use pkpd::{pk_concentration, pkpd_problem, PkpdParams};
pub use poisson::poisson1d_problem;
pub use synthetic::{quadratic_problem, rosenbrock_problem};
pub use viscous_burgers::viscous_burgers_problem;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("point {0:?} lies outside the problem domain")]
    DomainError(Vec<f64>),
    #[error("bad problem configuration: {0}")]
    ConfigError(String),
}

/// Which loss term a residual block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockTag {
    Interior,
    Boundary,
    Initial,
    /// Tadmor entropy-inequality penalty.
    Entropy,
    /// Algebraic flux-relaxation constraint (F − f(u)).
    FluxConstraint,
    /// Viscosity-output penalty during Euler warm-up.
    ViscosityPenalty,
}

impl BlockTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlockTag::Interior => "interior",
            BlockTag::Boundary => "boundary",
            BlockTag::Initial => "initial",
            BlockTag::Entropy => "entropy",
            BlockTag::FluxConstraint => "flux",
            BlockTag::ViscosityPenalty => "viscosity",
        }
    }
}

/// One block of collocation points sharing a tag and a term weight λ.
#[derive(Debug, Clone)]
pub struct PointBlock {
    pub tag: BlockTag,
    pub points: Vec<Vec<f64>>,
    pub lambda: f64,
}

impl PointBlock {
    pub fn new(tag: BlockTag, points: Vec<Vec<f64>>, lambda: f64) -> Self {
        assert!(lambda > 0.0, "block weights must be positive");
        Self { tag, points, lambda }
    }

    /// Per-residual multiplier √(λ/N).
    pub fn weight(&self) -> f64 {
        (self.lambda / self.points.len() as f64).sqrt()
    }
}

/// How interior points are redrawn during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    Uniform,
    /// Importance redraw from a 4× uniform candidate pool with probability
    /// ∝ residual² + floor.
    ResidualWeighted,
}

#[derive(Debug, Clone)]
pub struct CollocationSet {
    pub blocks: Vec<PointBlock>,
    pub seed: u64,
    pub resample_every: usize,
    pub resample_mode: ResampleMode,
}

impl CollocationSet {
    pub fn new(blocks: Vec<PointBlock>, seed: u64) -> Self {
        Self { blocks, seed, resample_every: 0, resample_mode: ResampleMode::Uniform }
    }

    pub fn n_points(&self) -> usize {
        self.blocks.iter().map(|b| b.points.len()).sum()
    }
}

/// Curriculum knobs a problem may support (domain growth, frequency warm-up).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurriculumAction {
    DomainScale(f64),
    Frequencies(f64, f64),
}

/// Per-point tape context handed to residual builders: wraps the tape and
/// knows where each network's parameter leaves live.
pub struct PointCtx<'a> {
    pub tape: &'a mut Tape,
    specs: &'a [MlpSpec],
    bases: &'a [NodeId],
}

impl<'a> PointCtx<'a> {
    /// Forward network `net` at `x` with the given jet requests.
    pub fn forward(&mut self, net: usize, x: &[f64], reqs: &[JetReq]) -> Vec<JetOut> {
        forward_on_tape(&self.specs[net], self.tape, self.bases[net], x, reqs)
    }
}

/// Problem-specific residual construction over a shared assembly engine.
pub trait ResidualBuilder: Sync + Send {
    /// Residual components per point for the given block tag.
    fn residual_dim(&self, tag: BlockTag) -> usize;
    /// Build the residual nodes (length `residual_dim(tag)`) at one point.
    fn build(&self, ctx: &mut PointCtx, tag: BlockTag, point: &[f64]) -> Vec<NodeId>;
    /// Draw one interior point from the (current) domain.
    fn domain_sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Is the point inside the (current) domain?
    fn contains(&self, point: &[f64]) -> bool;

    /// Switch training phase (e.g. viscous warm-up → inviscid). Default: none.
    fn set_phase(&mut self, _phase: usize) {}
    /// Apply a curriculum action; returns false when unsupported.
    fn apply(&mut self, _action: &CurriculumAction) -> bool {
        false
    }
}

/// Full benchmark interface used by the run driver: objective + residuals
/// plus reference solutions, prediction, resampling, and phase control.
pub trait Benchmark: ResidualProblem + BatchObjective {
    fn name(&self) -> &str;
    /// Concatenated initial parameters for all networks.
    fn init_theta(&self) -> Vec<f64>;
    /// Primary-field prediction at the points.
    fn predict(&self, theta: &[f64], points: &[Vec<f64>]) -> Vec<f64>;
    /// Reference solution at the points, when one exists. NaN entries mark
    /// points the reference declines to define.
    fn reference(&self, points: &[Vec<f64>]) -> Option<Vec<f64>>;
    /// Standard evaluation grid for error metrics.
    fn eval_grid(&self) -> Vec<Vec<f64>>;
    /// Collocation access (dump/resample bookkeeping).
    fn collocation(&self) -> &CollocationSet;
    /// Redraw interior points (uniform or residual-weighted).
    fn resample(&mut self, _theta: &[f64]) {}
    fn set_phase(&mut self, _phase: usize) {}
    fn apply_curriculum(&mut self, _action: &CurriculumAction) -> bool {
        false
    }
    /// Rows `∇_θ ℓᵢ(θ)` of the per-sample gradient matrix (ℓᵢ = ½rᵢ²).
    fn per_sample_grad_matrix(&self, theta: &[f64]) -> Mat {
        let (r, mut j) = self.residuals_and_jacobian(theta);
        for (i, ri) in r.iter().enumerate() {
            let row = j.row_mut(i);
            for v in row.iter_mut() {
                *v *= ri;
            }
        }
        j
    }
}

// ---------------------------------------------------------------------------
// the assembly engine
// ---------------------------------------------------------------------------

/// Collocation-based least-squares problem: one or more networks, a set of
/// residual blocks, and a [`ResidualBuilder`] that knows the physics.
pub struct CollocationProblem {
    pub label: String,
    pub nets: Vec<MlpSpec>,
    pub colloc: CollocationSet,
    builder: Box<dyn ResidualBuilder>,
    reference_fn: Option<Box<dyn Fn(&[f64]) -> f64 + Sync + Send>>,
    grid: Vec<Vec<f64>>,
    resample_counter: u64,
}

impl CollocationProblem {
    pub fn new(
        label: impl Into<String>,
        nets: Vec<MlpSpec>,
        colloc: CollocationSet,
        builder: Box<dyn ResidualBuilder>,
        reference_fn: Option<Box<dyn Fn(&[f64]) -> f64 + Sync + Send>>,
        grid: Vec<Vec<f64>>,
    ) -> Result<Self, ProblemError> {
        for spec in &nets {
            spec.validate().map_err(ProblemError::ConfigError)?;
        }
        for block in &colloc.blocks {
            if block.points.is_empty() {
                return Err(ProblemError::ConfigError(format!(
                    "empty {} block",
                    block.tag.as_str()
                )));
            }
            if block.tag == BlockTag::Interior {
                for p in &block.points {
                    if !builder.contains(p) {
                        return Err(ProblemError::DomainError(p.clone()));
                    }
                }
            }
        }
        Ok(Self {
            label: label.into(),
            nets,
            colloc,
            builder,
            reference_fn,
            grid,
            resample_counter: 0,
        })
    }

    fn param_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.nets
            .iter()
            .map(|s| {
                let o = off;
                off += s.param_count();
                o
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.nets.iter().map(|s| s.param_count()).sum()
    }

    /// Evaluate a closure per point of one block, with a per-chunk tape whose
    /// parameter prefix is pushed once and rewound between points.
    fn with_point_ctx<T, F>(&self, theta: &[f64], block: &PointBlock, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut PointCtx, &[f64]) -> T + Sync + Send,
    {
        let offsets = self.param_offsets();
        let nets = &self.nets;
        parallel::chunked_map_reduce(
            block.points.len(),
            |range| {
                let mut tape = Tape::new();
                let mut bases = Vec::with_capacity(nets.len());
                for (spec, off) in nets.iter().zip(&offsets) {
                    let slice = &theta[*off..*off + spec.param_count()];
                    bases.push(tape.params_contiguous(slice, *off));
                }
                let mark = tape.len();
                let mut out = Vec::with_capacity(range.len());
                for idx in range {
                    tape.truncate(mark);
                    let mut ctx = PointCtx { tape: &mut tape, specs: nets, bases: &bases };
                    out.push(f(&mut ctx, &block.points[idx]));
                }
                out
            },
            Vec::new(),
            |mut a, mut b| {
                a.append(&mut b);
                a
            },
        )
    }

    /// Loss and gradient restricted to `batch` indices of the first block
    /// (all other blocks enter in full). `None` batch = full loss.
    fn loss_grad_impl(&self, theta: &[f64], batch: Option<&[usize]>) -> (f64, Vec<f64>) {
        let p = theta.len();
        let offsets = self.param_offsets();
        let nets = &self.nets;
        let mut total = 0.0;
        let mut grad = vec![0.0; p];
        for (bi, block) in self.colloc.blocks.iter().enumerate() {
            let subset: Option<&[usize]> = if bi == 0 { batch } else { None };
            let n_eff = subset.map_or(block.points.len(), |b| b.len());
            let w = (block.lambda / n_eff as f64).sqrt();
            let builder = &self.builder;
            let (loss_b, grad_b) = parallel::chunked_map_reduce(
                n_eff,
                |range| {
                    let mut tape = Tape::new();
                    let mut bases = Vec::with_capacity(nets.len());
                    for (spec, off) in nets.iter().zip(&offsets) {
                        let slice = &theta[*off..*off + spec.param_count()];
                        bases.push(tape.params_contiguous(slice, *off));
                    }
                    let mark = tape.len();
                    let mut loss = 0.0;
                    let mut g = vec![0.0; p];
                    for k in range {
                        let idx = subset.map_or(k, |b| b[k]);
                        tape.truncate(mark);
                        let nodes = {
                            let mut ctx =
                                PointCtx { tape: &mut tape, specs: nets, bases: &bases };
                            builder.build(&mut ctx, block.tag, &block.points[idx])
                        };
                        let mut seeds = Vec::with_capacity(nodes.len());
                        for node in nodes {
                            let r = w * tape.val(node);
                            loss += 0.5 * r * r;
                            seeds.push((node, w * r));
                        }
                        tape.backward(&seeds, &mut g);
                    }
                    (loss, g)
                },
                (0.0, vec![0.0; p]),
                |mut a, b| {
                    a.0 += b.0;
                    parallel::add_assign(&mut a.1, &b.1);
                    a
                },
            );
            total += loss_b;
            parallel::add_assign(&mut grad, &grad_b);
        }
        (total, grad)
    }
}

impl Objective for CollocationProblem {
    fn dim(&self) -> usize {
        self.param_count()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let mut total = 0.0;
        for block in &self.colloc.blocks {
            let w = block.weight();
            let builder = &self.builder;
            let vals = self.with_point_ctx(theta, block, |ctx, point| {
                let nodes = builder.build(ctx, block.tag, point);
                let mut s = 0.0;
                for n in nodes {
                    let r = w * ctx.tape.val(n);
                    s += 0.5 * r * r;
                }
                s
            });
            total += vals.iter().sum::<f64>();
        }
        total
    }

    fn value_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        self.loss_grad_impl(theta, None)
    }
}

impl ResidualProblem for CollocationProblem {
    fn num_residuals(&self) -> usize {
        self.colloc
            .blocks
            .iter()
            .map(|b| b.points.len() * self.builder.residual_dim(b.tag))
            .sum()
    }

    fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_residuals());
        for block in &self.colloc.blocks {
            let w = block.weight();
            let builder = &self.builder;
            let vals = self.with_point_ctx(theta, block, |ctx, point| {
                let nodes = builder.build(ctx, block.tag, point);
                nodes.iter().map(|n| ctx.tape.val(*n)).collect::<Vec<f64>>()
            });
            for point_vals in vals {
                for v in point_vals {
                    out.push(w * v);
                }
            }
        }
        out
    }

    fn residuals_and_jacobian(&self, theta: &[f64]) -> (Vec<f64>, Mat) {
        let p = theta.len();
        let mut r_all = Vec::with_capacity(self.num_residuals());
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(self.num_residuals());
        for block in &self.colloc.blocks {
            let w = block.weight();
            let builder = &self.builder;
            let per_point = self.with_point_ctx(theta, block, |ctx, point| {
                let nodes = builder.build(ctx, block.tag, point);
                let mut local = Vec::with_capacity(nodes.len());
                for node in nodes {
                    let mut row = vec![0.0; p];
                    ctx.tape.backward(&[(node, w)], &mut row);
                    local.push((w * ctx.tape.val(node), row));
                }
                local
            });
            for point_rows in per_point {
                for (rv, row) in point_rows {
                    r_all.push(rv);
                    rows.push(row);
                }
            }
        }
        (r_all, Mat::from_rows(&rows))
    }
}

impl BatchObjective for CollocationProblem {
    fn num_samples(&self) -> usize {
        self.colloc.blocks.first().map_or(0, |b| b.points.len())
    }

    fn batch_value_grad(&self, theta: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        self.loss_grad_impl(theta, Some(batch))
    }
}

impl Benchmark for CollocationProblem {
    fn name(&self) -> &str {
        &self.label
    }

    fn init_theta(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.param_count());
        for spec in &self.nets {
            theta.extend(init_params(spec));
        }
        theta
    }

    fn predict(&self, theta: &[f64], points: &[Vec<f64>]) -> Vec<f64> {
        let offsets = self.param_offsets();
        let nets = &self.nets;
        parallel::chunked_map_reduce(
            points.len(),
            |range| {
                let mut tape = Tape::new();
                let mut bases = Vec::with_capacity(nets.len());
                for (spec, off) in nets.iter().zip(&offsets) {
                    let slice = &theta[*off..*off + spec.param_count()];
                    bases.push(tape.params_contiguous(slice, *off));
                }
                let mark = tape.len();
                let mut out = Vec::with_capacity(range.len());
                for idx in range {
                    tape.truncate(mark);
                    let outs = forward_on_tape(&nets[0], &mut tape, bases[0], &points[idx], &[]);
                    out.push(tape.val(outs[0].value));
                }
                out
            },
            Vec::new(),
            |mut a, mut b| {
                a.append(&mut b);
                a
            },
        )
    }

    fn reference(&self, points: &[Vec<f64>]) -> Option<Vec<f64>> {
        self.reference_fn
            .as_ref()
            .map(|f| points.iter().map(|p| f(p)).collect())
    }

    fn eval_grid(&self) -> Vec<Vec<f64>> {
        self.grid.clone()
    }

    fn collocation(&self) -> &CollocationSet {
        &self.colloc
    }

    fn resample(&mut self, theta: &[f64]) {
        self.resample_counter += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.colloc.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(self.resample_counter)),
        );
        let Some(block_idx) = self
            .colloc
            .blocks
            .iter()
            .position(|b| b.tag == BlockTag::Interior)
        else {
            return;
        };
        let n = self.colloc.blocks[block_idx].points.len();
        match self.colloc.resample_mode {
            ResampleMode::Uniform => {
                let pts: Vec<Vec<f64>> =
                    (0..n).map(|_| self.builder.domain_sample(&mut rng)).collect();
                self.colloc.blocks[block_idx].points = pts;
            }
            ResampleMode::ResidualWeighted => {
                let pool: Vec<Vec<f64>> =
                    (0..4 * n).map(|_| self.builder.domain_sample(&mut rng)).collect();
                let pool_block = PointBlock::new(BlockTag::Interior, pool.clone(), 1.0);
                let builder = &self.builder;
                let sq: Vec<f64> = self.with_point_ctx(theta, &pool_block, |ctx, point| {
                    let nodes = builder.build(ctx, BlockTag::Interior, point);
                    nodes.iter().map(|id| ctx.tape.val(*id).powi(2)).sum::<f64>()
                });
                let mean = sq.iter().sum::<f64>() / sq.len() as f64;
                let floor = 0.1 * mean + 1e-300;
                let weights: Vec<f64> = sq.iter().map(|s| s + floor).collect();
                let total: f64 = weights.iter().sum();
                let mut pts = Vec::with_capacity(n);
                for _ in 0..n {
                    let mut u = rng.gen_range(0.0..total);
                    let mut chosen = pool.len() - 1;
                    for (i, w) in weights.iter().enumerate() {
                        if u < *w {
                            chosen = i;
                            break;
                        }
                        u -= w;
                    }
                    pts.push(pool[chosen].clone());
                }
                self.colloc.blocks[block_idx].points = pts;
            }
        }
    }

    fn set_phase(&mut self, phase: usize) {
        self.builder.set_phase(phase);
    }

    fn apply_curriculum(&mut self, action: &CurriculumAction) -> bool {
        self.builder.apply(action)
    }
}

// ---------------------------------------------------------------------------
// sampling helpers shared by the problem constructors
// ---------------------------------------------------------------------------

/// `n` uniform points in the axis-aligned box given by (lo, hi) per axis.
pub fn sample_box(rng: &mut ChaCha8Rng, n: usize, lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            lo.iter()
                .zip(hi)
                .map(|(a, b)| rng.gen_range(*a..*b))
                .collect()
        })
        .collect()
}

/// Uniform 1D grid of `n` points on [lo, hi] inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
