//! Generalized advantage estimation.

use super::PpoError;

/// One step of a robot's trajectory as seen by the advantage estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSignal {
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

/// Advantages and returns of one temporally ordered segment.
///
/// `bootstrap` is `V(s_T)` for the state after the last step; it is ignored
/// when that step is terminal. A `done` inside the segment cuts the sum.
pub fn compute_gae(steps: &[StepSignal], bootstrap: f64, gamma: f64, tau: f64) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
    if steps.is_empty() {
        return Err(PpoError::EmptySequence);
    }
    let n = steps.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let s = steps[t];
        let next_value = if t + 1 < n { steps[t + 1].value } else { bootstrap };
        let live = if s.done { 0.0 } else { 1.0 };
        let delta = s.reward + gamma * next_value * live - s.value;
        running = delta + gamma * tau * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(steps).map(|(a, s)| a + s.value).collect();
    Ok((adv, returns))
}

/// Shifts to zero mean and scales to unit variance in place.
pub fn standardize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let scale = 1.0 / (var.sqrt() + 1e-8);
    xs.iter_mut().for_each(|x| *x = (*x - mean) * scale);
}
