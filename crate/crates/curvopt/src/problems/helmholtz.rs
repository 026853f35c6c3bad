//! 2D Helmholtz benchmark on [-1,1]² with periodic boundaries (hard-enforced
//! by the Fourier feature embedding): `u_xx + u_yy + k²u − q = 0` with the
//! manufactured forcing `q = (k² − (a₁π)² − (a₂π)²)·sin(a₁πx)·sin(a₂πy)`,
//! exact solution `u = sin(a₁πx)·sin(a₂πy)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{Embedding, JetReq, MlpSpec, NodeId};
use crate::problems::{
    linspace, BlockTag, CollocationProblem, CollocationSet, CurriculumAction, PointBlock,
    PointCtx, ProblemError, ResidualBuilder,
};

#[derive(Debug, Clone)]
pub struct HelmholtzConfig {
    pub a1: f64,
    pub a2: f64,
    pub k: f64,
    /// Fourier modes per axis (all modes 1..=m are used, 4m features in 2D).
    pub m_fourier: usize,
    /// Divide the interior residual by (a₁π)² + (a₂π)² + k².
    pub normalize: bool,
}

impl Default for HelmholtzConfig {
    fn default() -> Self {
        Self { a1: 1.0, a2: 4.0, k: 1.0, m_fourier: 1, normalize: false }
    }
}

impl HelmholtzConfig {
    pub fn loss_scale(&self) -> f64 {
        (self.a1 * PI).powi(2) + (self.a2 * PI).powi(2) + self.k * self.k
    }
}

pub fn exact_solution(cfg: &HelmholtzConfig, x: f64, y: f64) -> f64 {
    (cfg.a1 * PI * x).sin() * (cfg.a2 * PI * y).sin()
}

fn forcing(cfg: &HelmholtzConfig, x: f64, y: f64) -> f64 {
    (cfg.k * cfg.k - (cfg.a1 * PI).powi(2) - (cfg.a2 * PI).powi(2)) * exact_solution(cfg, x, y)
}

struct HelmholtzBuilder {
    cfg: HelmholtzConfig,
    /// Curriculum half-width of the sampling box (full domain: 1).
    domain_scale: f64,
}

impl ResidualBuilder for HelmholtzBuilder {
    fn residual_dim(&self, _tag: BlockTag) -> usize {
        1
    }

    fn build(&self, ctx: &mut PointCtx, tag: BlockTag, point: &[f64]) -> Vec<NodeId> {
        debug_assert_eq!(tag, BlockTag::Interior);
        let reqs = [JetReq::axis(0, 2), JetReq::axis(1, 2)];
        let outs = ctx.forward(0, point, &reqs);
        let o = &outs[0];
        let u_xx = o.jets[0].d2.unwrap();
        let u_yy = o.jets[1].d2.unwrap();
        let k2u = ctx.tape.mul_c(o.value, self.cfg.k * self.cfg.k);
        let lap = ctx.tape.add(u_xx, u_yy);
        let lhs = ctx.tape.add(lap, k2u);
        let mut r = ctx.tape.add_c(lhs, -forcing(&self.cfg, point[0], point[1]));
        if self.cfg.normalize {
            r = ctx.tape.mul_c(r, 1.0 / self.cfg.loss_scale());
        }
        vec![r]
    }

    fn domain_sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let s = self.domain_scale;
        vec![rng.gen_range(-s..s), rng.gen_range(-s..s)]
    }

    fn contains(&self, point: &[f64]) -> bool {
        let s = self.domain_scale + 1e-12;
        point[0].abs() <= s && point[1].abs() <= s
    }

    fn apply(&mut self, action: &CurriculumAction) -> bool {
        match *action {
            CurriculumAction::DomainScale(s) => {
                assert!(s > 0.0 && s <= 1.0);
                self.domain_scale = s;
                true
            }
            CurriculumAction::Frequencies(a1, a2) => {
                self.cfg.a1 = a1;
                self.cfg.a2 = a2;
                true
            }
        }
    }
}

/// Periodic Helmholtz problem: interior residual only (the Fourier embedding
/// enforces periodicity in both axes), `n_interior` uniform points.
pub fn helmholtz_problem(
    cfg: HelmholtzConfig,
    hidden: &[usize],
    n_interior: usize,
    seed: u64,
) -> Result<CollocationProblem, ProblemError> {
    let mut widths = vec![2];
    widths.extend_from_slice(hidden);
    widths.push(1);
    let spec = MlpSpec::new(
        widths,
        Embedding::Fourier { modes: cfg.m_fourier, lengths: vec![2.0, 2.0] },
        seed,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0110C);
    let interior: Vec<Vec<f64>> = (0..n_interior)
        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let colloc = CollocationSet::new(vec![PointBlock::new(BlockTag::Interior, interior, 1.0)], seed);
    let mut grid = Vec::new();
    for &x in &linspace(-1.0, 1.0, 51) {
        for &y in &linspace(-1.0, 1.0, 51) {
            grid.push(vec![x, y]);
        }
    }
    let ref_cfg = cfg.clone();
    CollocationProblem::new(
        format!("helmholtz-{}-{}-k{}", cfg.a1, cfg.a2, cfg.k),
        vec![spec],
        colloc,
        Box::new(HelmholtzBuilder { cfg, domain_scale: 1.0 }),
        Some(Box::new(move |p: &[f64]| exact_solution(&ref_cfg, p[0], p[1]))),
        grid,
    )
}
