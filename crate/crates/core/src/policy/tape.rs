//! Tensor-level reverse-mode differentiation.
//!
//! A [`Tape`] records every operation of a forward pass as a node holding
//! its output value. [`Tape::backward_into`] walks the nodes in reverse and
//! accumulates adjoints; parameter leaves route their gradient straight into
//! a [`Gradients`] buffer so a batch of per-sample tapes can share one.
//!
//! Parameter leaves borrow the parameter tensors instead of copying them,
//! which keeps per-sample tapes cheap for wide layers.

use std::sync::atomic::{AtomicU32, Ordering};

use thiserror::Error;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

#[derive(Debug, Error, PartialEq)]
pub enum GradError {
    #[error("loss must be a scalar, got {0} elements")]
    NonScalarLoss(usize),
    #[error("variable {0:?} was not recorded on this tape")]
    UnknownNode(Var),
}

/// Dense row-major matrix; column vectors have `cols == 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "tensor shape does not match data length");
        Self { rows, cols, data }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let rows = data.len();
        Self { rows, cols: 1, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

/// Gradient buffer shaped like a parameter list.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(params: &[Tensor]) -> Self {
        Self { tensors: params.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect() }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|g| g.is_finite()))
    }
}

/// Handle to a node on a specific tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u32,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    MatVec { w: usize, x: usize },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Affine { x: usize, scale: Vec<f64> },
    Relu(usize),
    Sigmoid(usize),
    Exp(usize),
    Square(usize),
    Concat(Vec<usize>),
    Mean(Vec<usize>),
    Softmax(usize),
    WeightedSum { weights: usize, items: Vec<usize> },
    Sum(usize),
    Min(usize, usize),
    Clamp { x: usize, lo: f64, hi: f64 },
    GaussianLogProb { mean: usize, log_std: usize, sample: Vec<f64> },
    GaussianEntropy(usize),
}

#[derive(Debug)]
struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    /// Empty for parameter leaves, whose values live in the parameter list.
    value: Vec<f64>,
}

pub struct Tape<'p> {
    id: u32,
    params: &'p [Tensor],
    nodes: Vec<Node>,
}

/// Adjoints of the non-parameter leaves after a backward pass.
pub struct Adjoints {
    tape: u32,
    adj: Vec<Vec<f64>>,
    lens: Vec<usize>,
}

impl Adjoints {
    pub fn wrt(&self, var: Var) -> Vec<f64> {
        assert_eq!(var.tape, self.tape, "variable belongs to another tape");
        let a = &self.adj[var.index];
        if a.is_empty() {
            vec![0.0; self.lens[var.index]]
        } else {
            a.clone()
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Tensor]) -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            params,
            nodes: Vec::with_capacity(64),
        }
    }

    fn idx(&self, v: Var) -> usize {
        assert!(v.tape == self.id && v.index < self.nodes.len(), "variable {v:?} not recorded on this tape");
        v.index
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        self.nodes.push(Node { op, rows, cols, value });
        Var { tape: self.id, index: self.nodes.len() - 1 }
    }

    fn val(&self, i: usize) -> &[f64] {
        match self.nodes[i].op {
            Op::Param(p) => &self.params[p].data,
            _ => &self.nodes[i].value,
        }
    }

    fn len_of(&self, i: usize) -> usize {
        self.nodes[i].rows * self.nodes[i].cols
    }

    pub fn value(&self, v: Var) -> &[f64] {
        self.val(self.idx(v))
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let x = self.value(v);
        assert_eq!(x.len(), 1, "not a scalar");
        x[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant column vector.
    pub fn input(&mut self, data: Vec<f64>) -> Var {
        let n = data.len();
        self.push(Op::Input, n, 1, data)
    }

    pub fn input_matrix(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Var {
        assert_eq!(rows * cols, data.len());
        self.push(Op::Input, rows, cols, data)
    }

    pub fn param(&mut self, index: usize) -> Var {
        let (rows, cols) = self.params[index].shape();
        self.push(Op::Param(index), rows, cols, Vec::new())
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let (wi, xi) = (self.idx(w), self.idx(x));
        let (rows, cols) = (self.nodes[wi].rows, self.nodes[wi].cols);
        assert_eq!(cols, self.len_of(xi), "matvec shape mismatch");
        let (wv, xv) = (self.val(wi), self.val(xi));
        let out = (0..rows).map(|o| dot(&wv[o * cols..(o + 1) * cols], xv)).collect();
        self.push(Op::MatVec { w: wi, x: xi }, rows, 1, out)
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (ai, bi) = (self.idx(a), self.idx(b));
        assert_eq!(self.len_of(ai), self.len_of(bi), "elementwise shape mismatch");
        let out = self.val(ai).iter().zip(self.val(bi)).map(|(x, y)| f(*x, *y)).collect();
        let (r, c) = (self.nodes[ai].rows, self.nodes[ai].cols);
        self.push(op, r, c, out)
    }

    fn map(&mut self, a: Var, op: impl FnOnce(usize) -> Op, f: impl Fn(f64) -> f64) -> Var {
        let ai = self.idx(a);
        let out = self.val(ai).iter().map(|x| f(*x)).collect();
        let (r, c) = (self.nodes[ai].rows, self.nodes[ai].cols);
        self.push(op(ai), r, c, out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ai, bi) = (self.idx(a), self.idx(b));
        self.zip_with(a, b, Op::Add(ai, bi), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (ai, bi) = (self.idx(a), self.idx(b));
        self.zip_with(a, b, Op::Sub(ai, bi), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (ai, bi) = (self.idx(a), self.idx(b));
        self.zip_with(a, b, Op::Mul(ai, bi), |x, y| x * y)
    }

    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let (ai, bi) = (self.idx(a), self.idx(b));
        self.zip_with(a, b, Op::Min(ai, bi), f64::min)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |i| Op::Scale(i, c), |x| c * x)
    }

    /// Elementwise `scale ⊙ x + shift` with constant coefficients.
    pub fn affine(&mut self, x: Var, scale: &[f64], shift: &[f64]) -> Var {
        let xi = self.idx(x);
        assert!(scale.len() == self.len_of(xi) && shift.len() == scale.len());
        let out = self.val(xi).iter().zip(scale).zip(shift).map(|((v, s), t)| s * v + t).collect();
        let (r, c) = (self.nodes[xi].rows, self.nodes[xi].cols);
        self.push(Op::Affine { x: xi, scale: scale.to_vec() }, r, c, out)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, Op::Relu, |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid, |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        })
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, Op::Exp, f64::exp)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, Op::Square, |x| x * x)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.map(a, |x| Op::Clamp { x, lo, hi }, |x| x.clamp(lo, hi))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let idx: Vec<usize> = parts.iter().map(|&p| self.idx(p)).collect();
        let mut out = Vec::with_capacity(idx.iter().map(|&i| self.len_of(i)).sum());
        for &i in &idx {
            out.extend_from_slice(self.val(i));
        }
        let n = out.len();
        self.push(Op::Concat(idx), n, 1, out)
    }

    pub fn mean(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "mean of zero vectors");
        let idx: Vec<usize> = parts.iter().map(|&p| self.idx(p)).collect();
        let n = self.len_of(idx[0]);
        let mut out = vec![0.0; n];
        for &i in &idx {
            assert_eq!(self.len_of(i), n, "mean shape mismatch");
            axpy(1.0, self.val(i), &mut out);
        }
        let inv = 1.0 / idx.len() as f64;
        out.iter_mut().for_each(|x| *x *= inv);
        self.push(Op::Mean(idx), n, 1, out)
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let ai = self.idx(a);
        let x = self.val(ai);
        let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let out = e.into_iter().map(|v| v / z).collect();
        let n = self.len_of(ai);
        self.push(Op::Softmax(ai), n, 1, out)
    }

    /// `Σ_k weights[k] · items[k]`.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Var {
        let wi = self.idx(weights);
        assert_eq!(self.len_of(wi), items.len(), "one weight per item");
        assert!(!items.is_empty());
        let idx: Vec<usize> = items.iter().map(|&p| self.idx(p)).collect();
        let n = self.len_of(idx[0]);
        let mut out = vec![0.0; n];
        for (k, &i) in idx.iter().enumerate() {
            assert_eq!(self.len_of(i), n);
            let w = self.val(wi)[k];
            axpy(w, self.val(i), &mut out);
        }
        self.push(Op::WeightedSum { weights: wi, items: idx }, n, 1, out)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let ai = self.idx(a);
        let s = self.val(ai).iter().sum();
        self.push(Op::Sum(ai), 1, 1, vec![s])
    }

    /// Log-density of a diagonal Gaussian at the constant `sample`.
    pub fn gaussian_log_prob(&mut self, mean: Var, log_std: Var, sample: &[f64]) -> Var {
        let (mi, si) = (self.idx(mean), self.idx(log_std));
        assert!(self.len_of(mi) == sample.len() && self.len_of(si) == sample.len());
        let lp = self
            .val(mi)
            .iter()
            .zip(self.val(si))
            .zip(sample)
            .map(|((mu, s), x)| {
                let z = (x - mu) * (-s).exp();
                -0.5 * z * z - s - 0.5 * LN_2PI
            })
            .sum();
        self.push(Op::GaussianLogProb { mean: mi, log_std: si, sample: sample.to_vec() }, 1, 1, vec![lp])
    }

    /// Entropy of a diagonal Gaussian with the given log standard deviations.
    pub fn gaussian_entropy(&mut self, log_std: Var) -> Var {
        let si = self.idx(log_std);
        let h = self.val(si).iter().map(|s| 0.5 + 0.5 * LN_2PI + s).sum();
        self.push(Op::GaussianEntropy(si), 1, 1, vec![h])
    }

    /// Reverse pass from a scalar `loss`, returning fresh parameter gradients.
    pub fn backward(&self, loss: Var) -> Result<(Gradients, Adjoints), GradError> {
        let mut grads = Gradients::zeros_like(self.params);
        let adj = self.backward_into(loss, &mut grads)?;
        Ok((grads, adj))
    }

    /// Reverse pass from a scalar `loss`, adding parameter gradients into `grads`.
    pub fn backward_into(&self, loss: Var, grads: &mut Gradients) -> Result<Adjoints, GradError> {
        if loss.tape != self.id || loss.index >= self.nodes.len() {
            return Err(GradError::UnknownNode(loss));
        }
        let n_loss = self.len_of(loss.index);
        if n_loss != 1 {
            return Err(GradError::NonScalarLoss(n_loss));
        }
        assert_eq!(grads.tensors.len(), self.params.len(), "gradient buffer does not match parameters");

        let mut adj: Vec<Vec<f64>> = vec![Vec::new(); self.nodes.len()];
        adj[loss.index] = vec![1.0];

        for i in (0..=loss.index).rev() {
            if matches!(self.nodes[i].op, Op::Input | Op::Param(_)) || adj[i].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut adj[i]);
            let y = &self.nodes[i].value;
            let mut sink = Sink { tape: self, adj: &mut adj, grads };
            match &self.nodes[i].op {
                Op::Input | Op::Param(_) => unreachable!(),
                Op::MatVec { w, x } => {
                    let (rows, cols) = (self.nodes[*w].rows, self.nodes[*w].cols);
                    let xv = self.val(*x);
                    {
                        let dw = sink.slot(*w);
                        for (o, &go) in g.iter().enumerate() {
                            if go != 0.0 {
                                axpy(go, xv, &mut dw[o * cols..(o + 1) * cols]);
                            }
                        }
                    }
                    let wv = self.val(*w);
                    let dx = sink.slot(*x);
                    for (o, &go) in g.iter().enumerate().take(rows) {
                        if go != 0.0 {
                            axpy(go, &wv[o * cols..(o + 1) * cols], dx);
                        }
                    }
                }
                Op::Add(a, b) => {
                    axpy(1.0, &g, sink.slot(*a));
                    axpy(1.0, &g, sink.slot(*b));
                }
                Op::Sub(a, b) => {
                    axpy(1.0, &g, sink.slot(*a));
                    axpy(-1.0, &g, sink.slot(*b));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.val(*a), self.val(*b));
                    let da: Vec<f64> = g.iter().zip(bv).map(|(g, b)| g * b).collect();
                    let db: Vec<f64> = g.iter().zip(av).map(|(g, a)| g * a).collect();
                    axpy(1.0, &da, sink.slot(*a));
                    axpy(1.0, &db, sink.slot(*b));
                }
                Op::Scale(a, c) => axpy(*c, &g, sink.slot(*a)),
                Op::Affine { x, scale } => {
                    let dx = sink.slot(*x);
                    for ((d, gi), s) in dx.iter_mut().zip(&g).zip(scale) {
                        *d += gi * s;
                    }
                }
                Op::Relu(a) => {
                    let da = sink.slot(*a);
                    for ((d, gi), yi) in da.iter_mut().zip(&g).zip(y) {
                        if *yi > 0.0 {
                            *d += gi;
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    let da = sink.slot(*a);
                    for ((d, gi), yi) in da.iter_mut().zip(&g).zip(y) {
                        *d += gi * yi * (1.0 - yi);
                    }
                }
                Op::Exp(a) => {
                    let da = sink.slot(*a);
                    for ((d, gi), yi) in da.iter_mut().zip(&g).zip(y) {
                        *d += gi * yi;
                    }
                }
                Op::Square(a) => {
                    let av = self.val(*a);
                    let da = sink.slot(*a);
                    for ((d, gi), xi) in da.iter_mut().zip(&g).zip(av) {
                        *d += 2.0 * gi * xi;
                    }
                }
                Op::Clamp { x, lo, hi } => {
                    let xv = self.val(*x);
                    let dx = sink.slot(*x);
                    for ((d, gi), xi) in dx.iter_mut().zip(&g).zip(xv) {
                        if *xi >= *lo && *xi <= *hi {
                            *d += gi;
                        }
                    }
                }
                Op::Min(a, b) => {
                    let (av, bv) = (self.val(*a), self.val(*b));
                    let take_a: Vec<bool> = av.iter().zip(bv).map(|(x, y)| x <= y).collect();
                    let da = sink.slot(*a);
                    for ((d, gi), t) in da.iter_mut().zip(&g).zip(&take_a) {
                        if *t {
                            *d += gi;
                        }
                    }
                    let db = sink.slot(*b);
                    for ((d, gi), t) in db.iter_mut().zip(&g).zip(&take_a) {
                        if !*t {
                            *d += gi;
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.len_of(p);
                        axpy(1.0, &g[off..off + n], sink.slot(p));
                        off += n;
                    }
                }
                Op::Mean(parts) => {
                    let inv = 1.0 / parts.len() as f64;
                    for &p in parts {
                        axpy(inv, &g, sink.slot(p));
                    }
                }
                Op::Softmax(a) => {
                    let s: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    let da = sink.slot(*a);
                    for ((d, gi), yi) in da.iter_mut().zip(&g).zip(y) {
                        *d += yi * (gi - s);
                    }
                }
                Op::WeightedSum { weights, items } => {
                    let wv = self.val(*weights).to_vec();
                    let dw: Vec<f64> = items.iter().map(|&h| dot(&g, self.val(h))).collect();
                    axpy(1.0, &dw, sink.slot(*weights));
                    for (k, &h) in items.iter().enumerate() {
                        axpy(wv[k], &g, sink.slot(h));
                    }
                }
                Op::Sum(a) => {
                    let da = sink.slot(*a);
                    da.iter_mut().for_each(|d| *d += g[0]);
                }
                Op::GaussianLogProb { mean, log_std, sample } => {
                    let (mv, sv) = (self.val(*mean), self.val(*log_std));
                    let mut dm = Vec::with_capacity(sample.len());
                    let mut ds = Vec::with_capacity(sample.len());
                    for ((mu, s), x) in mv.iter().zip(sv).zip(sample) {
                        let inv_var = (-2.0 * s).exp();
                        let z2 = (x - mu) * (x - mu) * inv_var;
                        dm.push(g[0] * (x - mu) * inv_var);
                        ds.push(g[0] * (z2 - 1.0));
                    }
                    axpy(1.0, &dm, sink.slot(*mean));
                    axpy(1.0, &ds, sink.slot(*log_std));
                }
                Op::GaussianEntropy(s) => {
                    let ds = sink.slot(*s);
                    ds.iter_mut().for_each(|d| *d += g[0]);
                }
            }
        }
        let lens = (0..self.nodes.len()).map(|i| self.len_of(i)).collect();
        Ok(Adjoints { tape: self.id, adj, lens })
    }
}

/// Routes adjoint accumulation to either a node slot or the parameter buffer.
struct Sink<'a, 'p> {
    tape: &'a Tape<'p>,
    adj: &'a mut Vec<Vec<f64>>,
    grads: &'a mut Gradients,
}

impl Sink<'_, '_> {
    fn slot(&mut self, i: usize) -> &mut [f64] {
        if let Op::Param(p) = self.tape.nodes[i].op {
            return &mut self.grads.tensors[p].data;
        }
        if self.adj[i].is_empty() {
            self.adj[i] = vec![0.0; self.tape.len_of(i)];
        }
        &mut self.adj[i]
    }
}
