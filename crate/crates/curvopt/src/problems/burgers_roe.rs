//! Inviscid Burgers with Roe-linearized residuals: in detected shock regions
//! the quasilinear advection speed is replaced by the local Rankine-Hugoniot
//! speed `(u(x+h) + u(x−h))/2`, which imposes the jump condition on the
//! network. Periodicity in x is hard-enforced by the trigonometric input
//! embedding; the initial condition `u(x,0) = −sin(πx)` enters as data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hyperbolic::burgers;
use crate::net::{Embedding, JetReq, MlpSpec, NodeId};
use crate::problems::{
    linspace, BlockTag, CollocationProblem, CollocationSet, PointBlock, PointCtx, ProblemError,
    ResidualBuilder,
};

struct BurgersRoeBuilder {
    shock: burgers::ShockDetectConfig,
}

impl ResidualBuilder for BurgersRoeBuilder {
    fn residual_dim(&self, _tag: BlockTag) -> usize {
        1
    }

    fn build(&self, ctx: &mut PointCtx, tag: BlockTag, point: &[f64]) -> Vec<NodeId> {
        match tag {
            BlockTag::Interior => {
                let reqs = [JetReq::axis(0, 1), JetReq::axis(1, 1)];
                let outs = ctx.forward(0, point, &reqs);
                let o = outs[0].clone();
                let u_x = o.jets[0].d1;
                let u_t = o.jets[1].d1;
                let in_shock = ctx.tape.val(u_x) <= -self.shock.m;
                let speed = if in_shock {
                    let left = ctx.forward(0, &[point[0] - self.shock.h, point[1]], &[])[0].value;
                    let right = ctx.forward(0, &[point[0] + self.shock.h, point[1]], &[])[0].value;
                    let sum = ctx.tape.add(left, right);
                    ctx.tape.mul_c(sum, 0.5)
                } else {
                    o.value
                };
                let advect = ctx.tape.mul(speed, u_x);
                vec![ctx.tape.add(u_t, advect)]
            }
            _ => {
                let outs = ctx.forward(0, point, &[]);
                let target = burgers::initial_condition(point[0]);
                vec![ctx.tape.add_c(outs[0].value, -target)]
            }
        }
    }

    fn domain_sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0)]
    }

    fn contains(&self, point: &[f64]) -> bool {
        point[0].abs() <= 1.0 && (0.0..=1.0).contains(&point[1])
    }
}

/// Roe-linearized inviscid Burgers problem. The reference is the analytical
/// entropy oracle; the evaluation grid is the t = 1 slice the tables use.
pub fn burgers_roe_problem(
    shock_threshold: f64,
    probe_offset: f64,
    hidden: &[usize],
    n_interior: usize,
    seed: u64,
) -> Result<CollocationProblem, ProblemError> {
    let mut widths = vec![2];
    widths.extend_from_slice(hidden);
    widths.push(1);
    let spec = MlpSpec::new(widths, Embedding::TrigHardBc, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0110C);
    let interior: Vec<Vec<f64>> = (0..n_interior)
        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0)])
        .collect();
    let n_init = (n_interior / 8).max(128);
    let initial: Vec<Vec<f64>> = linspace(-1.0, 1.0, n_init)
        .into_iter()
        .map(|x| vec![x, 0.0])
        .collect();
    let colloc = CollocationSet::new(
        vec![
            PointBlock::new(BlockTag::Interior, interior, 1.0),
            PointBlock::new(BlockTag::Initial, initial, 1.0),
        ],
        seed,
    );
    let grid: Vec<Vec<f64>> = linspace(-1.0, 1.0, 513)
        .into_iter()
        .map(|x| vec![x, 1.0])
        .collect();
    CollocationProblem::new(
        "burgers-roe",
        vec![spec],
        colloc,
        Box::new(BurgersRoeBuilder {
            shock: burgers::ShockDetectConfig {
                m: shock_threshold,
                h: probe_offset,
                a_ga: 0.0,
            },
        }),
        Some(Box::new(|p: &[f64]| burgers::burgers_entropy_solution(p[0], p[1]))),
        grid,
    )
}
