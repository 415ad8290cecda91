//! Reinforced potential field planning for multi-robot navigation.
//!
//! A potential-field planner whose obstacle and inter-robot gains are chosen
//! online by a PPO-trained policy reading an attention-pooled neighbor
//! embedding. The crate contains the simulator ([`world`]), the force field
//! ([`apf`]), the policy network and its gradient engine ([`policy`]), the
//! trainer ([`ppo`]), and evaluation tooling ([`eval`]).

pub mod apf;
pub mod control;
pub mod eval;
pub mod geometry;
pub mod policy;
pub mod ppo;
pub mod world;

pub use apf::{ApfConfig, ApfError, ApfParams, ForceBreakdown, Regime};
pub use geometry::Vec2;
pub use world::{
    Obstacle, Observation, RobotStatus, Scenario, ScenarioKind, ScenarioSampler, ScenarioSource, WorldConfig, WorldError,
    WorldState,
};
