//! Diagonal Gaussian action distribution over a bounded box.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Axis-aligned action bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionBox {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionBox {
    /// `(η, λ) ∈ [0, 0.1] × [0, 5]`.
    pub fn apf_gains() -> Self {
        Self { low: vec![0.0, 0.0], high: vec![0.1, 5.0] }
    }

    /// Symmetric one-dimensional steering command.
    pub fn steering(bound: f64) -> Self {
        Self { low: vec![-bound], high: vec![bound] }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn width(&self) -> Vec<f64> {
        self.low.iter().zip(&self.high).map(|(l, h)| h - l).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.low.iter().zip(&self.high).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.low).zip(&self.high).all(|((v, l), h)| *l <= *v && *v <= *h)
    }

    pub fn clip(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.low).zip(&self.high).map(|((v, l), h)| v.clamp(*l, *h)).collect()
    }

    pub fn is_valid(&self) -> bool {
        !self.low.is_empty()
            && self.low.len() == self.high.len()
            && self.low.iter().zip(&self.high).all(|(l, h)| l.is_finite() && h.is_finite() && l < h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionDistribution {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// A drawn action: `raw` is the Gaussian draw, `action` its clipped image,
/// and `log_prob` the density of `raw`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledAction {
    pub raw: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
}

impl ActionDistribution {
    pub fn log_prob(&self, x: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.std)
            .zip(x)
            .map(|((mu, sigma), v)| {
                let z = (v - mu) / sigma;
                -0.5 * z * z - sigma.ln() - 0.5 * LN_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.std.iter().map(|s| 0.5 + 0.5 * LN_2PI + s.ln()).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, bounds: &ActionBox) -> SampledAction {
        let raw: Vec<f64> = self
            .mean
            .iter()
            .zip(&self.std)
            .map(|(mu, sigma)| {
                let z: f64 = rng.sample(StandardNormal);
                mu + sigma * z
            })
            .collect();
        let log_prob = self.log_prob(&raw);
        SampledAction { action: bounds.clip(&raw), raw, log_prob }
    }

    /// Deterministic evaluation action: the mean with its density.
    pub fn mode(&self, bounds: &ActionBox) -> SampledAction {
        SampledAction {
            raw: self.mean.clone(),
            action: bounds.clip(&self.mean),
            log_prob: self.log_prob(&self.mean),
        }
    }
}
