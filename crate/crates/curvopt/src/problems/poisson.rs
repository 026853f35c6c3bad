//! 1D Poisson benchmark: `u'' = f` on [0,1] with `f(x) = −sin(πx)` and
//! homogeneous Dirichlet boundaries, exact solution `u = sin(πx)/π²`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{Embedding, JetReq, MlpSpec, NodeId};
use crate::problems::{
    linspace, BlockTag, CollocationProblem, CollocationSet, PointBlock, PointCtx, ProblemError,
    ResidualBuilder,
};

pub fn exact_solution(x: f64) -> f64 {
    (PI * x).sin() / (PI * PI)
}

fn forcing(x: f64) -> f64 {
    -(PI * x).sin()
}

struct PoissonBuilder;

impl ResidualBuilder for PoissonBuilder {
    fn residual_dim(&self, _tag: BlockTag) -> usize {
        1
    }

    fn build(&self, ctx: &mut PointCtx, tag: BlockTag, point: &[f64]) -> Vec<NodeId> {
        match tag {
            BlockTag::Interior => {
                let outs = ctx.forward(0, point, &[JetReq::axis(0, 2)]);
                let u_xx = outs[0].jets[0].d2.unwrap();
                vec![ctx.tape.add_c(u_xx, -forcing(point[0]))]
            }
            _ => {
                let outs = ctx.forward(0, point, &[]);
                vec![outs[0].value]
            }
        }
    }

    fn domain_sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.gen_range(0.0..1.0)]
    }

    fn contains(&self, point: &[f64]) -> bool {
        (0.0..=1.0).contains(&point[0])
    }
}

/// Standard setup: `n_interior` uniform interior points, the two boundary
/// points, and a tanh net of the given hidden widths.
pub fn poisson1d_problem(
    hidden: &[usize],
    n_interior: usize,
    seed: u64,
) -> Result<CollocationProblem, ProblemError> {
    let mut widths = vec![1];
    widths.extend_from_slice(hidden);
    widths.push(1);
    let spec = MlpSpec::new(widths, Embedding::None, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0110C);
    let interior: Vec<Vec<f64>> =
        (0..n_interior).map(|_| vec![rng.gen_range(0.0..1.0)]).collect();
    let boundary = vec![vec![0.0], vec![1.0]];
    let colloc = CollocationSet::new(
        vec![
            PointBlock::new(BlockTag::Interior, interior, 1.0),
            PointBlock::new(BlockTag::Boundary, boundary, 1.0),
        ],
        seed,
    );
    let grid: Vec<Vec<f64>> = linspace(0.0, 1.0, 201).into_iter().map(|x| vec![x]).collect();
    CollocationProblem::new(
        "poisson1d",
        vec![spec],
        colloc,
        Box::new(PoissonBuilder),
        Some(Box::new(|p: &[f64]| exact_solution(p[0]))),
        grid,
    )
}
