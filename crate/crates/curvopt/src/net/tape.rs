//! Scalar expression tape: eager forward evaluation with reverse-mode
//! parameter gradients.
//!
//! Network forwards push their whole computation (including the
//! input-derivative jet tracks) as scalar nodes, so `∂(anything)/∂θ` of any
//! recorded quantity is one backward sweep. Linear layers use fused
//! dot-product nodes over contiguous node ranges, which keeps tapes small
//! and the sweeps vectorizable.

/// Index of a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn offset(self, k: usize) -> NodeId {
        NodeId(self.0 + k as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpKind {
    Const,
    /// Leaf bound to parameter slot `a`.
    Param,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    /// `a + aux`
    AddC,
    /// `a * aux`
    MulC,
    Tanh,
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    /// `max(0, a)`
    Max0,
    /// `a^n`, n = aux as integer
    Powi,
    /// `a^aux`
    Powf,
    /// `Σ vals[a+i]·vals[b+i]` for i < aux
    Dot,
    /// `Σ vals[a+i]·vals[b+i] + vals[a+len]` (bias stored after the weights)
    DotBias,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: OpKind,
    a: u32,
    b: u32,
    aux: f64,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    vals: Vec<f64>,
    adj: Vec<f64>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.vals.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Rewind the tape to a previously taken `len()` mark, keeping the
    /// prefix (typically the parameter leaves) intact.
    pub fn truncate(&mut self, mark: usize) {
        self.nodes.truncate(mark);
        self.vals.truncate(mark);
    }

    #[inline]
    pub fn val(&self, id: NodeId) -> f64 {
        self.vals[id.0 as usize]
    }

    #[inline]
    fn push(&mut self, node: Node, val: f64) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node);
        self.vals.push(val);
        id
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        self.push(Node { op: OpKind::Const, a: 0, b: 0, aux: 0.0 }, v)
    }

    /// Push one parameter leaf bound to slot `idx`.
    pub fn param(&mut self, idx: usize, v: f64) -> NodeId {
        self.push(Node { op: OpKind::Param, a: idx as u32, b: 0, aux: 0.0 }, v)
    }

    /// Push all of `theta` as contiguous parameter leaves with slot offset
    /// `slot0`; returns the id of the first leaf.
    pub fn params_contiguous(&mut self, theta: &[f64], slot0: usize) -> NodeId {
        let base = NodeId(self.nodes.len() as u32);
        self.nodes.reserve(theta.len());
        self.vals.reserve(theta.len());
        for (i, &v) in theta.iter().enumerate() {
            self.push(Node { op: OpKind::Param, a: (slot0 + i) as u32, b: 0, aux: 0.0 }, v);
        }
        base
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.val(a) + self.val(b);
        self.push(Node { op: OpKind::Add, a: a.0, b: b.0, aux: 0.0 }, v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.val(a) - self.val(b);
        self.push(Node { op: OpKind::Sub, a: a.0, b: b.0, aux: 0.0 }, v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.val(a) * self.val(b);
        self.push(Node { op: OpKind::Mul, a: a.0, b: b.0, aux: 0.0 }, v)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.val(a) / self.val(b);
        self.push(Node { op: OpKind::Div, a: a.0, b: b.0, aux: 0.0 }, v)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = -self.val(a);
        self.push(Node { op: OpKind::Neg, a: a.0, b: 0, aux: 0.0 }, v)
    }

    pub fn add_c(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.val(a) + c;
        self.push(Node { op: OpKind::AddC, a: a.0, b: 0, aux: c }, v)
    }

    pub fn mul_c(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.val(a) * c;
        self.push(Node { op: OpKind::MulC, a: a.0, b: 0, aux: c }, v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).tanh();
        self.push(Node { op: OpKind::Tanh, a: a.0, b: 0, aux: 0.0 }, v)
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).sin();
        self.push(Node { op: OpKind::Sin, a: a.0, b: 0, aux: 0.0 }, v)
    }

    pub fn cos(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).cos();
        self.push(Node { op: OpKind::Cos, a: a.0, b: 0, aux: 0.0 }, v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).exp();
        self.push(Node { op: OpKind::Exp, a: a.0, b: 0, aux: 0.0 }, v)
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).sqrt();
        self.push(Node { op: OpKind::Sqrt, a: a.0, b: 0, aux: 0.0 }, v)
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).abs();
        self.push(Node { op: OpKind::Abs, a: a.0, b: 0, aux: 0.0 }, v)
    }

    pub fn max0(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).max(0.0);
        self.push(Node { op: OpKind::Max0, a: a.0, b: 0, aux: 0.0 }, v)
    }

    pub fn powi(&mut self, a: NodeId, n: i32) -> NodeId {
        let v = self.val(a).powi(n);
        self.push(Node { op: OpKind::Powi, a: a.0, b: 0, aux: n as f64 }, v)
    }

    pub fn powf(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.val(a).powf(c);
        self.push(Node { op: OpKind::Powf, a: a.0, b: 0, aux: c }, v)
    }

    /// Fused dot product over two contiguous node ranges of length `len`.
    pub fn dot(&mut self, w: NodeId, a: NodeId, len: usize) -> NodeId {
        let (ws, as_) = (w.0 as usize, a.0 as usize);
        let mut s = 0.0;
        for i in 0..len {
            s += self.vals[ws + i] * self.vals[as_ + i];
        }
        self.push(Node { op: OpKind::Dot, a: w.0, b: a.0, aux: len as f64 }, s)
    }

    /// Fused affine node: dot product plus bias, with the bias value stored
    /// directly after the weights (`vals[w + len]`).
    pub fn dot_bias(&mut self, w: NodeId, a: NodeId, len: usize) -> NodeId {
        let (ws, as_) = (w.0 as usize, a.0 as usize);
        let mut s = self.vals[ws + len];
        for i in 0..len {
            s += self.vals[ws + i] * self.vals[as_ + i];
        }
        self.push(Node { op: OpKind::DotBias, a: w.0, b: a.0, aux: len as f64 }, s)
    }

    /// Reverse sweep from the given seeds, accumulating `∂(Σ seedᵢ·nodeᵢ)/∂θ`
    /// into `grad` (indexed by parameter slot). `grad` is *not* zeroed here.
    pub fn backward(&mut self, seeds: &[(NodeId, f64)], grad: &mut [f64]) {
        let n = self.nodes.len();
        self.adj.clear();
        self.adj.resize(n, 0.0);
        for (id, w) in seeds {
            self.adj[id.0 as usize] += w;
        }
        for i in (0..n).rev() {
            let d = self.adj[i];
            if d == 0.0 {
                continue;
            }
            let node = self.nodes[i];
            let a = node.a as usize;
            let b = node.b as usize;
            match node.op {
                OpKind::Const => {}
                OpKind::Param => grad[a] += d,
                OpKind::Add => {
                    self.adj[a] += d;
                    self.adj[b] += d;
                }
                OpKind::Sub => {
                    self.adj[a] += d;
                    self.adj[b] -= d;
                }
                OpKind::Mul => {
                    self.adj[a] += d * self.vals[b];
                    self.adj[b] += d * self.vals[a];
                }
                OpKind::Div => {
                    let vb = self.vals[b];
                    self.adj[a] += d / vb;
                    self.adj[b] -= d * self.vals[i] / vb;
                }
                OpKind::Neg => self.adj[a] -= d,
                OpKind::AddC => self.adj[a] += d,
                OpKind::MulC => self.adj[a] += d * node.aux,
                OpKind::Tanh => {
                    let t = self.vals[i];
                    self.adj[a] += d * (1.0 - t * t);
                }
                OpKind::Sin => self.adj[a] += d * self.vals[a].cos(),
                OpKind::Cos => self.adj[a] -= d * self.vals[a].sin(),
                OpKind::Exp => self.adj[a] += d * self.vals[i],
                OpKind::Sqrt => self.adj[a] += d * 0.5 / self.vals[i],
                OpKind::Abs => {
                    let s = if self.vals[a] >= 0.0 { 1.0 } else { -1.0 };
                    self.adj[a] += d * s;
                }
                OpKind::Max0 => {
                    if self.vals[a] > 0.0 {
                        self.adj[a] += d;
                    }
                }
                OpKind::Powi => {
                    let ni = node.aux as i32;
                    self.adj[a] += d * ni as f64 * self.vals[a].powi(ni - 1);
                }
                OpKind::Powf => {
                    let c = node.aux;
                    self.adj[a] += d * c * self.vals[a].powf(c - 1.0);
                }
                OpKind::Dot => {
                    let len = node.aux as usize;
                    for k in 0..len {
                        self.adj[a + k] += d * self.vals[b + k];
                        self.adj[b + k] += d * self.vals[a + k];
                    }
                }
                OpKind::DotBias => {
                    let len = node.aux as usize;
                    for k in 0..len {
                        self.adj[a + k] += d * self.vals[b + k];
                        self.adj[b + k] += d * self.vals[a + k];
                    }
                    self.adj[a + len] += d;
                }
            }
        }
    }
}
