//! Parameter-shared PPO over multi-robot potential-field rollouts.

pub mod adam;
pub mod checkpoint;
pub mod gae;
pub mod loss;
pub mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ControlError;
use crate::policy::{GradError, NetError};
use crate::world::WorldError;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use gae::{compute_gae, standardize, StepSignal};
pub use loss::{ppo_loss, update, LossStats, Sample, UpdateStats};
pub use trainer::{train, EpisodeLog, TrainOutcome, TrainSetup, Trainer, Transition};

#[derive(Debug, Error, PartialEq)]
pub enum PpoError {
    #[error("invalid PPO config: {0}")]
    InvalidConfig(String),
    #[error("empty transition sequence")]
    EmptySequence,
    #[error("probability ratio is not finite at sample {sample}; update aborted")]
    NonFiniteRatio { sample: usize },
    #[error("gradient is not finite; update aborted")]
    NonFiniteGradient,
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Grad(#[from] GradError),
}

/// Training hyperparameters. Defaults are the published values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub gamma: f64,
    /// GAE smoothing `τ`.
    pub gae_tau: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr_initial: f64,
    /// Per-episode learning-rate decay `β`.
    pub lr_decay: f64,
    /// Environment steps between updates `Z`.
    pub batch_interval: usize,
    /// Epochs per update `K`.
    pub epochs: usize,
    pub episodes: usize,
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            gamma: 0.999,
            gae_tau: 0.9,
            value_coef: 0.5,
            entropy_coef: 0.001,
            lr_initial: 3e-4,
            lr_decay: 0.999,
            batch_interval: 100,
            epochs: 1,
            episodes: 600,
            max_grad_norm: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let open01 = |x: f64| x > 0.0 && x < 1.0;
        let err = |m: &str| Err(PpoError::InvalidConfig(m.to_string()));
        if !open01(self.clip_eps) {
            return err("clip_eps must lie in (0, 1)");
        }
        if !open01(self.gamma) || !open01(self.gae_tau) {
            return err("gamma and gae_tau must lie in (0, 1)");
        }
        if self.batch_interval == 0 || self.epochs == 0 {
            return err("batch_interval and epochs must be at least 1");
        }
        let finite_nonneg = [self.value_coef, self.entropy_coef, self.lr_initial, self.max_grad_norm];
        if finite_nonneg.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return err("coefficients, learning rate and gradient clip must be finite and nonnegative");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return err("lr_decay must lie in (0, 1]");
        }
        Ok(())
    }
}

/// `α = α₀·β^episode`.
pub fn lr_schedule(initial: f64, decay: f64, episode: usize) -> f64 {
    initial * decay.powi(episode as i32)
}
