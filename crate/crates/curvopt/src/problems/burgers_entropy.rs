//! Inviscid Burgers with flux relaxation and the Tadmor entropy inequality:
//! two networks approximate the solution u and the flux F, the conservative
//! residual `u_t + F_x` replaces the quasilinear form, the algebraic
//! constraint ties F to f(u), and positive entropy residuals
//! `max(0, u·u_t + u²·u_x)` are penalized.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hyperbolic::burgers;
use crate::net::{Embedding, JetReq, MlpSpec, NodeId};
use crate::problems::{
    linspace, BlockTag, CollocationProblem, CollocationSet, PointBlock, PointCtx, ProblemError,
    ResidualBuilder,
};

/// Coefficient `c` in the trained flux target `F = c·u²`. The conservative
/// PDE form `u_t + (u²/2)_x = 0` pairs with `c = 1/2` (the default); `c = 1`
/// reproduces the alternative convention where the flux network learns `u²`
/// and the PDE residual absorbs the factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluxConvention {
    HalfUSquared,
    USquared,
}

impl FluxConvention {
    fn coefficient(&self) -> f64 {
        match self {
            FluxConvention::HalfUSquared => 0.5,
            FluxConvention::USquared => 1.0,
        }
    }
}

/// Per-term weights of the composite loss.
#[derive(Debug, Clone)]
pub struct EntropyWeights {
    pub initial: f64,
    pub boundary: f64,
    pub flux_pde: f64,
    pub entropy: f64,
    pub flux_constraint: f64,
}

impl Default for EntropyWeights {
    fn default() -> Self {
        Self { initial: 1.0, boundary: 1.0, flux_pde: 1.0, entropy: 1.0, flux_constraint: 1.0 }
    }
}

struct BurgersEntropyBuilder {
    convention: FluxConvention,
}

impl ResidualBuilder for BurgersEntropyBuilder {
    fn residual_dim(&self, _tag: BlockTag) -> usize {
        1
    }

    fn build(&self, ctx: &mut PointCtx, tag: BlockTag, point: &[f64]) -> Vec<NodeId> {
        match tag {
            // conservative PDE residual u_t + F_x with the flux network
            BlockTag::Interior => {
                let u = ctx.forward(0, point, &[JetReq::axis(1, 1)]);
                let u_t = u[0].jets[0].d1;
                let f = ctx.forward(1, point, &[JetReq::axis(0, 1)]);
                let f_x = f[0].jets[0].d1;
                vec![ctx.tape.add(u_t, f_x)]
            }
            // algebraic relaxation F − c·u²
            BlockTag::FluxConstraint => {
                let u = ctx.forward(0, point, &[]);
                let f = ctx.forward(1, point, &[]);
                let u_sq = ctx.tape.mul(u[0].value, u[0].value);
                let target = ctx.tape.mul_c(u_sq, self.convention.coefficient());
                vec![ctx.tape.sub(f[0].value, target)]
            }
            // max(0, η_t + ψ_x) = max(0, u·u_t + u²·u_x)
            BlockTag::Entropy => {
                let reqs = [JetReq::axis(0, 1), JetReq::axis(1, 1)];
                let u = ctx.forward(0, point, &reqs);
                let o = u[0].clone();
                let term_t = ctx.tape.mul(o.value, o.jets[1].d1);
                let u_sq = ctx.tape.mul(o.value, o.value);
                let term_x = ctx.tape.mul(u_sq, o.jets[0].d1);
                let resid = ctx.tape.add(term_t, term_x);
                vec![ctx.tape.max0(resid)]
            }
            BlockTag::Initial => {
                let u = ctx.forward(0, point, &[]);
                let target = burgers::initial_condition(point[0]);
                vec![ctx.tape.add_c(u[0].value, -target)]
            }
            // u(±1, t) = 0 for this odd initial condition
            BlockTag::Boundary => {
                let u = ctx.forward(0, point, &[]);
                vec![u[0].value]
            }
            _ => unreachable!("unsupported block"),
        }
    }

    fn domain_sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0)]
    }

    fn contains(&self, point: &[f64]) -> bool {
        point[0].abs() <= 1.0 && (0.0..=1.0).contains(&point[1])
    }
}

/// Two-network entropy/flux-relaxation problem. The interior, constraint and
/// entropy blocks share the same point cloud; initial/boundary data use
/// dedicated grids. θ is the concatenation [θ_u | θ_F].
pub fn burgers_entropy_problem(
    convention: FluxConvention,
    weights: EntropyWeights,
    hidden: &[usize],
    n_interior: usize,
    seed: u64,
) -> Result<CollocationProblem, ProblemError> {
    let mut widths = vec![2];
    widths.extend_from_slice(hidden);
    widths.push(1);
    let u_spec = MlpSpec::new(widths.clone(), Embedding::TrigHardBc, seed);
    let f_spec = MlpSpec::new(widths, Embedding::TrigHardBc, seed ^ FLUX_NET_SEED_SALT);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0110C);
    let interior: Vec<Vec<f64>> = (0..n_interior)
        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0)])
        .collect();
    let n_init = (n_interior / 8).max(128);
    let initial: Vec<Vec<f64>> =
        linspace(-1.0, 1.0, n_init).into_iter().map(|x| vec![x, 0.0]).collect();
    let n_bc = (n_init / 2).max(64);
    let boundary: Vec<Vec<f64>> = linspace(0.0, 1.0, n_bc)
        .into_iter()
        .flat_map(|t| [vec![-1.0, t], vec![1.0, t]])
        .collect();
    let colloc = CollocationSet::new(
        vec![
            PointBlock::new(BlockTag::Interior, interior.clone(), weights.flux_pde),
            PointBlock::new(BlockTag::FluxConstraint, interior.clone(), weights.flux_constraint),
            PointBlock::new(BlockTag::Entropy, interior, weights.entropy),
            PointBlock::new(BlockTag::Initial, initial, weights.initial),
            PointBlock::new(BlockTag::Boundary, boundary, weights.boundary),
        ],
        seed,
    );
    let grid: Vec<Vec<f64>> =
        linspace(-1.0, 1.0, 513).into_iter().map(|x| vec![x, 1.0]).collect();
    CollocationProblem::new(
        "burgers-entropy",
        vec![u_spec, f_spec],
        colloc,
        Box::new(BurgersEntropyBuilder { convention }),
        Some(Box::new(|p: &[f64]| burgers::burgers_entropy_solution(p[0], p[1]))),
        grid,
    )
}

/// Salt separating the flux network's initialization stream from the
/// solution network's.
const FLUX_NET_SEED_SALT: u64 = 0xF1A9;
