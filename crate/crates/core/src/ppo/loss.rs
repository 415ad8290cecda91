//! Clipped surrogate objective and the gradient step.

use crate::policy::{EncodedObservation, Gradients, PolicyParams, Tape};

use super::adam::Adam;
use super::{PpoConfig, PpoError};

/// One training sample with its advantage and return already computed.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub obs: EncodedObservation,
    /// Pre-clip Gaussian draw.
    pub raw_action: Vec<f64>,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Batch means of the loss components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStats {
    /// `−mean(min(ratio·A, clip(ratio)·A))`.
    pub policy: f64,
    /// `mean((V − R)²)`.
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    /// Fraction of samples whose ratio left `[1−ε, 1+ε]`.
    pub clip_fraction: f64,
    pub max_ratio_deviation: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub samples: usize,
    pub loss: LossStats,
    /// Global gradient norm before clipping, first epoch.
    pub grad_norm: f64,
}

/// Loss and its parameter gradient over `batch`.
pub fn ppo_loss(batch: &[Sample], params: &PolicyParams, config: &PpoConfig) -> Result<(LossStats, Gradients), PpoError> {
    if batch.is_empty() {
        return Err(PpoError::EmptySequence);
    }
    let inv_n = 1.0 / batch.len() as f64;
    let eps = config.clip_eps;
    let mut grads = Gradients::zeros_like(params.tensors());
    let mut stats = LossStats::default();
    for (i, s) in batch.iter().enumerate() {
        let mut tape = Tape::new(params.tensors());
        let emb = params.embed_on(&mut tape, &s.obs);
        let actor = params.actor_on(&mut tape, emb.obs_hat);
        let value = params.critic_on(&mut tape, emb.obs_hat);

        let lp = tape.gaussian_log_prob(actor.mean, actor.log_std, &s.raw_action);
        let old = tape.input(vec![s.old_log_prob]);
        let log_ratio = tape.sub(lp, old);
        let ratio = tape.exp(log_ratio);
        let r = tape.scalar(ratio);
        if !r.is_finite() {
            return Err(PpoError::NonFiniteRatio { sample: i });
        }
        let unclipped = tape.scale(ratio, s.advantage);
        let clipped_ratio = tape.clamp(ratio, 1.0 - eps, 1.0 + eps);
        let clipped = tape.scale(clipped_ratio, s.advantage);
        let surrogate = tape.min(unclipped, clipped);

        let target = tape.input(vec![s.ret]);
        let err = tape.sub(value, target);
        let value_loss = tape.square(err);
        let entropy = tape.gaussian_entropy(actor.log_std);

        let neg_surrogate = tape.scale(surrogate, -1.0);
        let weighted_value = tape.scale(value_loss, config.value_coef);
        let weighted_entropy = tape.scale(entropy, -config.entropy_coef);
        let partial = tape.add(neg_surrogate, weighted_value);
        let total = tape.add(partial, weighted_entropy);
        let loss = tape.scale(total, inv_n);
        tape.backward_into(loss, &mut grads)?;

        stats.policy -= tape.scalar(surrogate) * inv_n;
        stats.value += tape.scalar(value_loss) * inv_n;
        stats.entropy += tape.scalar(entropy) * inv_n;
        stats.total += tape.scalar(total) * inv_n;
        if (r - 1.0).abs() > eps {
            stats.clip_fraction += inv_n;
        }
        stats.max_ratio_deviation = stats.max_ratio_deviation.max((r - 1.0).abs());
    }
    Ok((stats, grads))
}

/// `K` full-batch epochs of clipped-gradient Adam steps at learning rate `lr`.
///
/// Gradients are checked before every step, so on error the parameters are
/// those of the last finite step.
pub fn update(
    params: &mut PolicyParams,
    batch: &[Sample],
    config: &PpoConfig,
    optimizer: &mut Adam,
    lr: f64,
) -> Result<UpdateStats, PpoError> {
    let mut out = UpdateStats { samples: batch.len(), ..Default::default() };
    for epoch in 0..config.epochs {
        let (loss, mut grads) = ppo_loss(batch, params, config)?;
        if !grads.is_finite() {
            return Err(PpoError::NonFiniteGradient);
        }
        let norm = grads.global_norm();
        if epoch == 0 {
            out.loss = loss;
            out.grad_norm = norm;
        }
        if config.max_grad_norm > 0.0 && norm > config.max_grad_norm {
            grads.scale(config.max_grad_norm / norm);
        }
        optimizer.step(params.tensors_mut(), &grads, lr);
    }
    Ok(out)
}
