//! Dense tanh MLP with optional periodic input embeddings and exact
//! differentiation: input derivatives up to second order propagate as
//! directional jets recorded on the tape, so parameter gradients of any
//! functional of (u, ∂u, ∂²u) come from one reverse sweep.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Mat;
use crate::net::tape::{NodeId, Tape};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

/// Input embedding applied before the first affine layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Embedding {
    None,
    /// All modes 1..=modes per axis: (cos(2πµx/L), sin(2πµx/L)), giving
    /// 2·modes features per axis. Periodic in every axis by construction.
    Fourier { modes: usize, lengths: Vec<f64> },
    /// Axis 0 is mapped to (cos πx, sin πx) (period 2), remaining axes pass
    /// through unchanged. Matches hard-enforced periodic boundaries on
    /// x ∈ [-1, 1] with time as a free axis.
    TrigHardBc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Layer widths from raw input dimension to output dimension. The first
    /// affine layer sees the embedded width instead of `widths[0]` when an
    /// embedding is configured.
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub embedding: Embedding,
    pub seed: u64,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, embedding: Embedding, seed: u64) -> Self {
        Self { widths, activation: Activation::Tanh, embedding, seed }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.widths.len() < 2 {
            return Err("need at least input and output widths".into());
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err("widths must be >= 1".into());
        }
        if let Embedding::Fourier { modes, lengths } = &self.embedding {
            if *modes == 0 {
                return Err("fourier embedding needs modes >= 1".into());
            }
            if lengths.len() != self.widths[0] {
                return Err("fourier embedding needs one length per input axis".into());
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Width of the first affine layer's input after embedding.
    pub fn embedded_width(&self) -> usize {
        match &self.embedding {
            Embedding::None => self.widths[0],
            Embedding::Fourier { modes, .. } => 2 * modes * self.widths[0],
            Embedding::TrigHardBc => self.widths[0] + 1,
        }
    }

    /// Effective layer widths (embedded input first).
    fn effective_widths(&self) -> Vec<usize> {
        let mut w = self.widths.clone();
        w[0] = self.embedded_width();
        w
    }

    /// Total trainable parameter count `Σ (wᵢ+1)·wᵢ₊₁`.
    pub fn param_count(&self) -> usize {
        let w = self.effective_widths();
        w.windows(2).map(|p| (p[0] + 1) * p[1]).sum()
    }
}

/// Glorot-uniform weights with zero biases, deterministic in the spec seed.
pub fn init_params(spec: &MlpSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w = spec.effective_widths();
    let mut theta = Vec::with_capacity(spec.param_count());
    for layer in w.windows(2) {
        let (fan_in, fan_out) = (layer[0], layer[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for _neuron in 0..fan_out {
            for _ in 0..fan_in {
                theta.push(rng.gen_range(-limit..limit));
            }
            theta.push(0.0); // bias
        }
    }
    theta
}

/// Parameter blob format: 8-byte little-endian element count, then each
/// value as a little-endian f64.
pub fn save_params(path: &Path, theta: &[f64]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&(theta.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(theta.len() * 8);
    for v in theta {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&buf)
}

pub fn load_params(path: &Path) -> std::io::Result<Vec<f64>> {
    let mut f = std::fs::File::open(path)?;
    let mut header = [0u8; 8];
    f.read_exact(&mut header)?;
    let n = u64::from_le_bytes(header) as usize;
    let mut buf = vec![0u8; n * 8];
    f.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

// ---------------------------------------------------------------------------
// jet forward
// ---------------------------------------------------------------------------

/// Probe direction for one jet track.
#[derive(Debug, Clone)]
pub enum JetDir {
    Axis(usize),
    Dir(Vec<f64>),
}

/// One requested jet: a direction and the derivative order (1 or 2).
#[derive(Debug, Clone)]
pub struct JetReq {
    pub dir: JetDir,
    pub order: u8,
}

impl JetReq {
    pub fn axis(a: usize, order: u8) -> Self {
        assert!(order == 1 || order == 2);
        Self { dir: JetDir::Axis(a), order }
    }
}

/// Tape nodes of one jet track for one network output.
#[derive(Debug, Clone, Copy)]
pub struct JetNodes {
    pub d1: NodeId,
    pub d2: Option<NodeId>,
}

/// Tape nodes of one network output with all requested jets.
#[derive(Debug, Clone)]
pub struct JetOut {
    pub value: NodeId,
    pub jets: Vec<JetNodes>,
}

#[derive(Clone, Copy)]
struct Track {
    start: NodeId,
    len: usize,
}

/// Per-feature derivative data: each embedded feature depends on at most one
/// input axis, so cross second derivatives vanish inside the embedding.
struct Feature {
    value: f64,
    axis: Option<usize>,
    d1: f64,
    d2: f64,
}

fn embedding_features(embedding: &Embedding, x: &[f64]) -> Vec<Feature> {
    match embedding {
        Embedding::None => x
            .iter()
            .enumerate()
            .map(|(a, &v)| Feature { value: v, axis: Some(a), d1: 1.0, d2: 0.0 })
            .collect(),
        Embedding::Fourier { modes, lengths } => {
            let mut out = Vec::with_capacity(2 * modes * x.len());
            for (a, &v) in x.iter().enumerate() {
                let l = lengths[a];
                // range-reduce so periodicity is exact on representable shifts
                let t = (v / l).rem_euclid(1.0);
                for mu in 1..=*modes {
                    let freq = 2.0 * std::f64::consts::PI * mu as f64;
                    let arg = freq * t;
                    let w = freq / l;
                    let (s, c) = arg.sin_cos();
                    out.push(Feature { value: c, axis: Some(a), d1: -s * w, d2: -c * w * w });
                    out.push(Feature { value: s, axis: Some(a), d1: c * w, d2: -s * w * w });
                }
            }
            out
        }
        Embedding::TrigHardBc => {
            let mut out = Vec::with_capacity(x.len() + 1);
            let t = (x[0] / 2.0).rem_euclid(1.0);
            let arg = 2.0 * std::f64::consts::PI * t;
            let w = std::f64::consts::PI;
            let (s, c) = arg.sin_cos();
            out.push(Feature { value: c, axis: Some(0), d1: -s * w, d2: -c * w * w });
            out.push(Feature { value: s, axis: Some(0), d1: c * w, d2: -s * w * w });
            for (a, &v) in x.iter().enumerate().skip(1) {
                out.push(Feature { value: v, axis: Some(a), d1: 1.0, d2: 0.0 });
            }
            out
        }
    }
}

fn dir_weight(dir: &JetDir, axis: usize) -> f64 {
    match dir {
        JetDir::Axis(a) => {
            if *a == axis {
                1.0
            } else {
                0.0
            }
        }
        JetDir::Dir(w) => w[axis],
    }
}

/// Push the network forward for one point with the requested jets. The
/// network's parameters must already sit on the tape as a contiguous range
/// beginning at `param_base`, in layer-major `[weights…, bias]` layout.
pub fn forward_on_tape(
    spec: &MlpSpec,
    tape: &mut Tape,
    param_base: NodeId,
    x: &[f64],
    reqs: &[JetReq],
) -> Vec<JetOut> {
    assert_eq!(x.len(), spec.input_dim());
    let widths = spec.effective_widths();
    let feats = embedding_features(&spec.embedding, x);
    debug_assert_eq!(feats.len(), widths[0]);

    // embedding tracks as constants
    let e = feats.len();
    let val0 = {
        let start = tape.constant(feats[0].value);
        for f in &feats[1..] {
            tape.constant(f.value);
        }
        Track { start, len: e }
    };
    let mut jet_tracks: Vec<(Track, Option<Track>)> = Vec::with_capacity(reqs.len());
    for req in reqs {
        let d1 = {
            let mut first = None;
            for f in &feats {
                let w = f.axis.map_or(0.0, |a| dir_weight(&req.dir, a));
                let id = tape.constant(w * f.d1);
                first.get_or_insert(id);
            }
            Track { start: first.unwrap(), len: e }
        };
        let d2 = if req.order >= 2 {
            let mut first = None;
            for f in &feats {
                // features are single-axis, so the directional second
                // derivative carries the squared direction weight
                let w = f.axis.map_or(0.0, |a| dir_weight(&req.dir, a));
                let id = tape.constant(w * w * f.d2);
                first.get_or_insert(id);
            }
            Some(Track { start: first.unwrap(), len: e })
        } else {
            None
        };
        jet_tracks.push((d1, d2));
    }

    let mut val = val0;
    let n_layers = widths.len() - 1;
    let mut param_off = 0usize;
    let mut onem_ids: Vec<NodeId> = Vec::new();
    let mut q_ids: Vec<NodeId> = Vec::new();
    let mut scratch_first: Vec<NodeId> = Vec::new();
    let mut scratch_rm: Vec<NodeId> = Vec::new();

    for layer in 0..n_layers {
        let fan_in = widths[layer];
        let out_w = widths[layer + 1];
        let is_last = layer + 1 == n_layers;
        let row_stride = fan_in + 1;
        let wrow = |i: usize| param_base.offset(param_off + i * row_stride);

        // pre-activations, contiguous
        let z_val = {
            let mut first = None;
            for i in 0..out_w {
                let id = tape.dot_bias(wrow(i), val.start, fan_in);
                first.get_or_insert(id);
            }
            Track { start: first.unwrap(), len: out_w }
        };
        let z_jets: Vec<(Track, Option<Track>)> = jet_tracks
            .iter()
            .map(|(d1, d2)| {
                let z1 = {
                    let mut first = None;
                    for i in 0..out_w {
                        let id = tape.dot(wrow(i), d1.start, fan_in);
                        first.get_or_insert(id);
                    }
                    Track { start: first.unwrap(), len: out_w }
                };
                let z2 = d2.map(|d2t| {
                    let mut first = None;
                    for i in 0..out_w {
                        let id = tape.dot(wrow(i), d2t.start, fan_in);
                        first.get_or_insert(id);
                    }
                    Track { start: first.unwrap(), len: out_w }
                });
                (z1, z2)
            })
            .collect();

        if is_last {
            val = z_val;
            jet_tracks = z_jets;
        } else {
            // tanh activation values, contiguous
            let t_val = {
                let mut first = None;
                for i in 0..out_w {
                    let id = tape.tanh(z_val.start.offset(i));
                    first.get_or_insert(id);
                }
                Track { start: first.unwrap(), len: out_w }
            };
            let any_jets = !jet_tracks.is_empty();
            let any_second = jet_tracks.iter().any(|(_, d2)| d2.is_some());
            onem_ids.clear();
            q_ids.clear();
            if any_jets {
                for i in 0..out_w {
                    let t = t_val.start.offset(i);
                    let sq = tape.mul(t, t);
                    let neg = tape.mul_c(sq, -1.0);
                    let onem = tape.add_c(neg, 1.0); // 1 - tanh²
                    onem_ids.push(onem);
                    if any_second {
                        q_ids.push(tape.mul(t, onem)); // tanh·(1 - tanh²)
                    }
                }
            }
            let mut new_jets = Vec::with_capacity(z_jets.len());
            for (z1, z2) in &z_jets {
                // first-order chain rule: t' = (1 - tanh²)·z'
                let t1 = {
                    let mut first = None;
                    for i in 0..out_w {
                        let id = tape.mul(onem_ids[i], z1.start.offset(i));
                        first.get_or_insert(id);
                    }
                    Track { start: first.unwrap(), len: out_w }
                };
                // second order: t'' = (1 - tanh²)·z'' − 2·tanh·(1 - tanh²)·z'²
                let t2 = z2.map(|z2t| {
                    scratch_first.clear();
                    scratch_rm.clear();
                    for i in 0..out_w {
                        let z1i = z1.start.offset(i);
                        let p = tape.mul(z1i, z1i);
                        let r = tape.mul(q_ids[i], p);
                        let rm = tape.mul_c(r, 2.0);
                        let first_term = tape.mul(onem_ids[i], z2t.start.offset(i));
                        scratch_first.push(first_term);
                        scratch_rm.push(rm);
                    }
                    let mut first = None;
                    for i in 0..out_w {
                        let id = tape.sub(scratch_first[i], scratch_rm[i]);
                        first.get_or_insert(id);
                    }
                    Track { start: first.unwrap(), len: out_w }
                });
                new_jets.push((t1, t2));
            }
            val = t_val;
            jet_tracks = new_jets;
        }
        param_off += out_w * row_stride;
    }

    (0..spec.output_dim())
        .map(|i| JetOut {
            value: val.start.offset(i),
            jets: jet_tracks
                .iter()
                .map(|(d1, d2)| JetNodes {
                    d1: d1.start.offset(i),
                    d2: d2.map(|t| t.start.offset(i)),
                })
                .collect(),
        })
        .collect()
}

/// Numeric evaluation of the network and its input derivatives at one point.
#[derive(Debug, Clone)]
pub struct NetEval {
    /// Network outputs.
    pub values: Vec<f64>,
    /// `grad_x[output][axis]`
    pub grad_x: Vec<Vec<f64>>,
    /// `hess_diag[output][axis]` — diagonal second derivatives.
    pub hess_diag: Vec<Vec<f64>>,
}

/// Evaluate outputs with input derivatives up to `order` (0, 1 or 2) along
/// every input axis.
pub fn eval_with_derivs(spec: &MlpSpec, theta: &[f64], x: &[f64], order: u8) -> NetEval {
    assert!(order <= 2);
    let mut tape = Tape::new();
    let base = tape.params_contiguous(theta, 0);
    let reqs: Vec<JetReq> = if order == 0 {
        Vec::new()
    } else {
        (0..spec.input_dim()).map(|a| JetReq::axis(a, order)).collect()
    };
    let outs = forward_on_tape(spec, &mut tape, base, x, &reqs);
    let d = spec.input_dim();
    NetEval {
        values: outs.iter().map(|o| tape.val(o.value)).collect(),
        grad_x: outs
            .iter()
            .map(|o| {
                (0..d)
                    .map(|a| if order >= 1 { tape.val(o.jets[a].d1) } else { 0.0 })
                    .collect()
            })
            .collect(),
        hess_diag: outs
            .iter()
            .map(|o| {
                (0..d)
                    .map(|a| {
                        if order >= 2 {
                            tape.val(o.jets[a].d2.unwrap())
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect(),
    }
}

/// Full input Hessian of one output by polarization of directional jets:
/// `H_ij = (∂²_{eᵢ+eⱼ} − ∂²_{eᵢ} − ∂²_{eⱼ})/2`.
pub fn eval_input_hessian_full(
    spec: &MlpSpec,
    theta: &[f64],
    x: &[f64],
    output: usize,
) -> Vec<Vec<f64>> {
    let d = spec.input_dim();
    let mut tape = Tape::new();
    let base = tape.params_contiguous(theta, 0);
    let mut reqs: Vec<JetReq> = (0..d).map(|a| JetReq::axis(a, 2)).collect();
    let mut pair_index = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            let mut w = vec![0.0; d];
            w[i] = 1.0;
            w[j] = 1.0;
            pair_index.push((i, j, reqs.len()));
            reqs.push(JetReq { dir: JetDir::Dir(w), order: 2 });
        }
    }
    let outs = forward_on_tape(spec, &mut tape, base, x, &reqs);
    let o = &outs[output];
    let mut h = vec![vec![0.0; d]; d];
    for a in 0..d {
        h[a][a] = tape.val(o.jets[a].d2.unwrap());
    }
    for (i, j, r) in pair_index {
        let dij = tape.val(o.jets[r].d2.unwrap());
        let v = 0.5 * (dij - h[i][i] - h[j][j]);
        h[i][j] = v;
        h[j][i] = v;
    }
    h
}

/// Exact Jacobian rows of arbitrary per-point residual expressions. The
/// builder receives the tape, the network jets at the point, and the point
/// itself, and returns the residual nodes it constructed; row `i` of the
/// result is `∂rᵢ/∂θ`.
pub fn param_jacobian_rows<F>(
    spec: &MlpSpec,
    theta: &[f64],
    points: &[Vec<f64>],
    reqs: &[JetReq],
    residual_fn: F,
) -> Mat
where
    F: Fn(&mut Tape, &[JetOut], &[f64]) -> Vec<NodeId> + Sync,
{
    let p = theta.len();
    let rows = parallel::chunked_map_reduce(
        points.len(),
        |range| {
            let mut tape = Tape::new();
            let base = tape.params_contiguous(theta, 0);
            let mark = tape.len();
            let mut local = Vec::new();
            for idx in range {
                tape.truncate(mark);
                let outs = forward_on_tape(spec, &mut tape, base, &points[idx], reqs);
                let nodes = residual_fn(&mut tape, &outs, &points[idx]);
                for node in nodes {
                    let mut row = vec![0.0; p];
                    tape.backward(&[(node, 1.0)], &mut row);
                    local.push((idx, tape.val(node), row));
                }
            }
            local
        },
        Vec::new(),
        |mut a, mut b| {
            a.append(&mut b);
            a
        },
    );
    let row_vecs: Vec<Vec<f64>> = rows.into_iter().map(|(_, _, r)| r).collect();
    Mat::from_rows(&row_vecs)
}

/// Function-space image of a parameter direction: `Σᵢ δᵢ ∂_θᵢ u_θ(x)` on the
/// grid, for the first network output.
pub fn pushforward(spec: &MlpSpec, theta: &[f64], delta: &[f64], grid: &[Vec<f64>]) -> Vec<f64> {
    assert_eq!(delta.len(), theta.len());
    parallel::chunked_map_reduce(
        grid.len(),
        |range| {
            let mut tape = Tape::new();
            let base = tape.params_contiguous(theta, 0);
            let mark = tape.len();
            let mut vals = Vec::with_capacity(range.len());
            for idx in range {
                tape.truncate(mark);
                let outs = forward_on_tape(spec, &mut tape, base, &grid[idx], &[]);
                let mut row = vec![0.0; theta.len()];
                tape.backward(&[(outs[0].value, 1.0)], &mut row);
                vals.push(crate::linalg::dot(&row, delta));
            }
            vals
        },
        Vec::new(),
        |mut a, mut b| {
            a.append(&mut b);
            a
        },
    )
}
