//! Attention-embedding actor-critic and its gradient engine.

pub mod dist;
pub mod net;
pub mod obs;
pub mod tape;

pub use dist::{ActionBox, ActionDistribution, SampledAction};
pub use net::{
    actor_forward, critic_forward, embed, init_network, ActorVars, EmbedVars, EmbeddingActivations, Layout, Linear,
    NetArch, NetError, Pooling, PolicyParams,
};
pub use obs::{encode_observation, EncodedObservation};
pub use tape::{Adjoints, GradError, Gradients, Tape, Tensor, Var};
