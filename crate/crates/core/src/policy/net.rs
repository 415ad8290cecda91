//! Attention embedding with actor and critic heads.
//!
//! ```text
//! e_j = ReLU(W_e (o_loc ⊕ w_j) + b_e)
//! h_j = ReLU(W_h e_j + b_h)
//! e_m = mean_j e_j
//! b_j = ReLU(W_b (e_j ⊕ e_m) + b_b)          scalar score
//! c   = Σ_j softmax(b)_j h_j                  zero if no neighbors
//! ô   = o_loc ⊕ c
//! ```
//!
//! The actor and critic are separate ReLU MLPs on `ô`; both share the
//! embedding. The actor mean is squashed into the action box with a
//! sigmoid, and the standard deviation is a state-independent parameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dist::{ActionBox, ActionDistribution};
use super::obs::EncodedObservation;
use super::tape::{Tape, Tensor, Var};

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("parameters do not match the architecture: {0}")]
    ShapeMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Softmax-weighted sum of `h_j`.
    Attention,
    /// Uniform weights `1/|N|` over `h_j`; the score network is unused.
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetArch {
    pub embed_dim: usize,
    pub hidden: Vec<usize>,
    pub obs_loc_dim: usize,
    pub neighbor_dim: usize,
    pub action: ActionBox,
    pub pooling: Pooling,
    /// Initial action std as a fraction of each half-range.
    #[serde(default = "default_init_std")]
    pub init_std: f64,
}

fn default_init_std() -> f64 {
    NetArch::INIT_STD
}

impl Default for NetArch {
    fn default() -> Self {
        Self::rpf(Pooling::Attention)
    }
}

impl NetArch {
    pub const INIT_STD: f64 = 0.1;

    /// Gain-selecting policy with 64-wide embeddings and a 256×256 trunk.
    pub fn rpf(pooling: Pooling) -> Self {
        Self {
            embed_dim: 64,
            hidden: vec![256, 256],
            obs_loc_dim: 4,
            neighbor_dim: 3,
            action: ActionBox::apf_gains(),
            pooling,
            init_std: Self::INIT_STD,
        }
    }

    /// Same network emitting a steering command in `[-bound, bound]`.
    pub fn steering(bound: f64) -> Self {
        Self { action: ActionBox::steering(bound), ..Self::rpf(Pooling::Attention) }
    }

    /// Equal in everything that shapes the forward pass; `init_std` is ignored.
    pub fn same_network(&self, other: &NetArch) -> bool {
        *self == NetArch { init_std: self.init_std, ..other.clone() }
    }

    pub fn action_dim(&self) -> usize {
        self.action.dim()
    }

    pub fn obs_hat_dim(&self) -> usize {
        self.obs_loc_dim + self.embed_dim
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidArch(m.to_string()));
        if self.embed_dim == 0 || self.obs_loc_dim == 0 || self.neighbor_dim == 0 {
            return bad("widths must be at least 1");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty with widths at least 1");
        }
        if !self.action.is_valid() {
            return bad("action box must have finite low < high in every dimension");
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return bad("init_std must be positive");
        }
        Ok(())
    }
}

/// Indices of a weight matrix and bias vector in the parameter list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub embed: Linear,
    pub hidden: Linear,
    pub score: Linear,
    pub actor: Vec<Linear>,
    pub actor_head: Linear,
    pub critic: Vec<Linear>,
    pub critic_head: Linear,
    pub log_std: usize,
}

impl Layout {
    fn build(arch: &NetArch) -> (Self, Vec<(usize, usize)>) {
        let mut shapes = Vec::new();
        let mut linear = |out: usize, inp: usize| {
            shapes.push((out, inp));
            shapes.push((out, 1));
            Linear { w: shapes.len() - 2, b: shapes.len() - 1 }
        };
        let e = arch.embed_dim;
        let embed = linear(e, arch.obs_loc_dim + arch.neighbor_dim);
        let hidden = linear(e, e);
        let score = linear(1, 2 * e);
        let trunk = |linear: &mut dyn FnMut(usize, usize) -> Linear| {
            let mut width = arch.obs_hat_dim();
            let layers = arch
                .hidden
                .iter()
                .map(|&h| {
                    let l = linear(h, width);
                    width = h;
                    l
                })
                .collect::<Vec<_>>();
            (layers, width)
        };
        let (actor, aw) = trunk(&mut linear);
        let actor_head = linear(arch.action_dim(), aw);
        let (critic, cw) = trunk(&mut linear);
        let critic_head = linear(1, cw);
        shapes.push((arch.action_dim(), 1));
        let log_std = shapes.len() - 1;
        (Self { embed, hidden, score, actor, actor_head, critic, critic_head, log_std }, shapes)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    arch: NetArch,
    layout: Layout,
    tensors: Vec<Tensor>,
}

/// Per-neighbor activations and the pooled context of one observation.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingActivations {
    pub e: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    /// Scores `b_j`; empty under mean pooling.
    pub b: Vec<f64>,
    pub mean_embedding: Option<Vec<f64>>,
    /// Pooling weights; empty when there are no neighbors.
    pub attention: Vec<f64>,
    pub context: Vec<f64>,
    pub obs_hat: Vec<f64>,
}

/// Tape handles of an embedding pass.
#[derive(Clone, Debug)]
pub struct EmbedVars {
    pub e: Vec<Var>,
    pub h: Vec<Var>,
    pub b: Vec<Var>,
    pub mean_embedding: Option<Var>,
    pub weights: Option<Var>,
    pub context: Var,
    pub obs_hat: Var,
}

/// Tape handles of the actor head: squashed mean and log-std.
#[derive(Clone, Copy, Debug)]
pub struct ActorVars {
    pub mean: Var,
    pub log_std: Var,
}

fn linear(tape: &mut Tape<'_>, l: Linear, x: Var) -> Var {
    let w = tape.param(l.w);
    let b = tape.param(l.b);
    let y = tape.matvec(w, x);
    tape.add(y, b)
}

fn linear_relu(tape: &mut Tape<'_>, l: Linear, x: Var) -> Var {
    let y = linear(tape, l, x);
    tape.relu(y)
}

/// Uniform fan-in initialization; biases zero; log-std at half the half-range.
pub fn init_network(arch: &NetArch, seed: u64) -> Result<PolicyParams, NetError> {
    arch.validate()?;
    let (layout, shapes) = Layout::build(arch);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors: Vec<Tensor> = shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect();
    let weights = std::iter::once(layout.embed)
        .chain([layout.hidden, layout.score])
        .chain(layout.actor.iter().copied())
        .chain([layout.actor_head])
        .chain(layout.critic.iter().copied())
        .chain([layout.critic_head]);
    for l in weights {
        let t = &mut tensors[l.w];
        let bound = 1.0 / (t.cols as f64).sqrt();
        t.data.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
    }
    tensors[layout.log_std].data = arch.action.width().iter().map(|w| (0.5 * arch.init_std * w).ln()).collect();
    Ok(PolicyParams { arch: arch.clone(), layout, tensors })
}

impl PolicyParams {
    /// Wraps existing tensors, checking their shapes against `arch`.
    pub fn from_tensors(arch: &NetArch, tensors: Vec<Tensor>) -> Result<Self, NetError> {
        arch.validate()?;
        let (layout, shapes) = Layout::build(arch);
        if shapes.len() != tensors.len() {
            return Err(NetError::ShapeMismatch(format!("expected {} tensors, got {}", shapes.len(), tensors.len())));
        }
        for (i, (s, t)) in shapes.iter().zip(&tensors).enumerate() {
            if *s != t.shape() || t.data.len() != s.0 * s.1 {
                return Err(NetError::ShapeMismatch(format!("tensor {i}: expected {s:?}, got {:?}", t.shape())));
            }
        }
        Ok(Self { arch: arch.clone(), layout, tensors })
    }

    pub fn arch(&self) -> &NetArch {
        &self.arch
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// Records the embedding of `obs` on `tape`, which must borrow `self.tensors()`.
    pub fn embed_on(&self, tape: &mut Tape<'_>, obs: &EncodedObservation) -> EmbedVars {
        let lay = &self.layout;
        let local = tape.input(obs.local.clone());
        let mut e = Vec::with_capacity(obs.neighbors.len());
        let mut h = Vec::with_capacity(obs.neighbors.len());
        for w in &obs.neighbors {
            let mut x = obs.local.clone();
            x.extend_from_slice(w);
            let x = tape.input(x);
            let ej = linear_relu(tape, lay.embed, x);
            h.push(linear_relu(tape, lay.hidden, ej));
            e.push(ej);
        }
        if e.is_empty() {
            let context = tape.input(vec![0.0; self.arch.embed_dim]);
            let obs_hat = tape.concat(&[local, context]);
            return EmbedVars { e, h, b: Vec::new(), mean_embedding: None, weights: None, context, obs_hat };
        }
        let em = tape.mean(&e);
        let (b, weights, context) = match self.arch.pooling {
            Pooling::Attention => {
                let b: Vec<Var> = e
                    .iter()
                    .map(|&ej| {
                        let x = tape.concat(&[ej, em]);
                        linear_relu(tape, lay.score, x)
                    })
                    .collect();
                let scores = tape.concat(&b);
                let weights = tape.softmax(scores);
                let context = tape.weighted_sum(weights, &h);
                (b, Some(weights), context)
            }
            Pooling::Mean => (Vec::new(), None, tape.mean(&h)),
        };
        let obs_hat = tape.concat(&[local, context]);
        EmbedVars { e, h, b, mean_embedding: Some(em), weights, context, obs_hat }
    }

    pub fn actor_on(&self, tape: &mut Tape<'_>, obs_hat: Var) -> ActorVars {
        let mut x = obs_hat;
        for &l in &self.layout.actor {
            x = linear_relu(tape, l, x);
        }
        let z = linear(tape, self.layout.actor_head, x);
        let s = tape.sigmoid(z);
        let mean = tape.affine(s, &self.arch.action.width(), &self.arch.action.low);
        let log_std = tape.param(self.layout.log_std);
        ActorVars { mean, log_std }
    }

    pub fn critic_on(&self, tape: &mut Tape<'_>, obs_hat: Var) -> Var {
        let mut x = obs_hat;
        for &l in &self.layout.critic {
            x = linear_relu(tape, l, x);
        }
        linear(tape, self.layout.critic_head, x)
    }

    fn distribution(&self, tape: &Tape<'_>, a: ActorVars) -> ActionDistribution {
        ActionDistribution {
            mean: tape.value(a.mean).to_vec(),
            std: tape.value(a.log_std).iter().map(|s| s.exp()).collect(),
        }
    }

    /// Actor distribution and critic value for one observation.
    pub fn evaluate(&self, obs: &EncodedObservation) -> (ActionDistribution, f64) {
        let mut tape = Tape::new(&self.tensors);
        let emb = self.embed_on(&mut tape, obs);
        let a = self.actor_on(&mut tape, emb.obs_hat);
        let v = self.critic_on(&mut tape, emb.obs_hat);
        (self.distribution(&tape, a), tape.scalar(v))
    }
}

pub fn embed(obs: &EncodedObservation, params: &PolicyParams) -> EmbeddingActivations {
    let mut tape = Tape::new(params.tensors());
    let v = params.embed_on(&mut tape, obs);
    let vals = |xs: &[Var]| xs.iter().map(|&x| tape.value(x).to_vec()).collect::<Vec<_>>();
    let attention = match (v.weights, v.h.len()) {
        (Some(w), _) => tape.value(w).to_vec(),
        (None, 0) => Vec::new(),
        (None, n) => vec![1.0 / n as f64; n],
    };
    EmbeddingActivations {
        e: vals(&v.e),
        h: vals(&v.h),
        b: v.b.iter().map(|&b| tape.scalar(b)).collect(),
        mean_embedding: v.mean_embedding.map(|m| tape.value(m).to_vec()),
        attention,
        context: tape.value(v.context).to_vec(),
        obs_hat: tape.value(v.obs_hat).to_vec(),
    }
}

pub fn actor_forward(obs_hat: &[f64], params: &PolicyParams) -> ActionDistribution {
    assert_eq!(obs_hat.len(), params.arch.obs_hat_dim(), "ô has the wrong length");
    let mut tape = Tape::new(params.tensors());
    let x = tape.input(obs_hat.to_vec());
    let a = params.actor_on(&mut tape, x);
    params.distribution(&tape, a)
}

pub fn critic_forward(obs_hat: &[f64], params: &PolicyParams) -> f64 {
    assert_eq!(obs_hat.len(), params.arch.obs_hat_dim(), "ô has the wrong length");
    let mut tape = Tape::new(params.tensors());
    let x = tape.input(obs_hat.to_vec());
    let v = params.critic_on(&mut tape, x);
    tape.scalar(v)
}
