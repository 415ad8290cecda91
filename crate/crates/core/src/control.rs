//! Turning a policy action into a heading command.

use thiserror::Error;

use crate::apf::{resolve_direction, ApfConfig, ApfError, ApfParams, ForceBreakdown};
use crate::geometry::{perp, try_normalize, Vec2};
use crate::policy::{ActionBox, NetArch};
use crate::world::{nearest_obstacle, WorldState};

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error(transparent)]
    Apf(#[from] ApfError),
    #[error("steering needs a nonzero velocity")]
    ZeroVelocity,
    #[error("action has {got} components, controller expects {expected}")]
    ActionDim { expected: usize, got: usize },
}

/// How an action vector becomes a heading.
#[derive(Clone, Debug, PartialEq)]
pub enum Controller {
    /// Action is `(η, λ)` for the potential field.
    ApfGains(ApfConfig),
    /// Action is a scalar steering blend.
    Steering,
}

impl Controller {
    /// Picks the controller matching the network's action box.
    pub fn for_arch(arch: &NetArch, apf: &ApfConfig) -> Self {
        if arch.action == ActionBox::apf_gains() {
            Controller::ApfGains(apf.clone())
        } else {
            Controller::Steering
        }
    }

    pub fn action_dim(&self) -> usize {
        match self {
            Controller::ApfGains(_) => 2,
            Controller::Steering => 1,
        }
    }

    pub fn direction(&self, world: &WorldState, id: usize, action: &[f64]) -> Result<Vec2, ControlError> {
        if action.len() != self.action_dim() {
            return Err(ControlError::ActionDim { expected: self.action_dim(), got: action.len() });
        }
        match self {
            Controller::ApfGains(cfg) => {
                let gains = ApfParams::new(action[0], action[1])?;
                Ok(apf_direction(world, id, &gains, cfg)?.resolved)
            }
            Controller::Steering => {
                let r = &world.robots[id];
                ppo_steer_direction(&(r.heading_vector() * world.config.desired_speed), action[0])
            }
        }
    }
}

/// Potential-field heading of robot `id` given the current world.
pub fn apf_direction(world: &WorldState, id: usize, gains: &ApfParams, config: &ApfConfig) -> Result<ForceBreakdown, ApfError> {
    let r = &world.robots[id];
    let nearest = nearest_obstacle(&r.position, &world.obstacles).map(|(_, o, _)| o);
    let neighbors: Vec<Vec2> = world.neighbors(id).into_iter().map(|j| world.robots[j].position).collect();
    resolve_direction(&r.position, &r.goal, nearest, &neighbors, &r.heading_vector(), gains, config)
}

/// `normalize(v + a·v⊥)` with `v⊥` the +90° rotation of `v`.
pub fn ppo_steer_direction(v: &Vec2, a: f64) -> Result<Vec2, ControlError> {
    if v.norm() == 0.0 || !v.norm().is_finite() {
        return Err(ControlError::ZeroVelocity);
    }
    try_normalize(&(v + a * perp(v))).ok_or(ControlError::ZeroVelocity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn steer_examples() {
        let d = ppo_steer_direction(&Vec2::new(0.5, 0.0), 0.0).unwrap();
        assert_eq!(d, Vec2::new(1.0, 0.0));
        let d = ppo_steer_direction(&Vec2::new(0.5, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(d.x, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.y, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        let d = ppo_steer_direction(&Vec2::new(0.0, 0.5), 2.5).unwrap();
        let e = Vec2::new(-2.5, 1.0).normalize();
        assert_abs_diff_eq!((d - e).norm(), 0.0, epsilon = 1e-15);
        assert_eq!(ppo_steer_direction(&Vec2::zeros(), 1.0), Err(ControlError::ZeroVelocity));
    }

    proptest! {
        #[test]
        fn steer_unit_and_forward(angle in -3.2..3.2f64, speed in 0.01..5.0f64, a in -2.5..2.5f64) {
            let v = Vec2::new(angle.cos(), angle.sin()) * speed;
            let d = ppo_steer_direction(&v, a).unwrap();
            prop_assert!((d.norm() - 1.0).abs() < 1e-12);
            prop_assert!(d.dot(&v) > 0.0);
        }
    }
}
