//! Shared fixtures for the benchmarks.

use rpf_core::policy::{encode_observation, EncodedObservation};
use rpf_core::{ScenarioKind, ScenarioSampler, WorldConfig, WorldState};

/// Cluttered arena with `n` robots and 12 obstacles.
pub fn cluttered_world(n: usize) -> WorldState {
    let s = ScenarioSampler::new(ScenarioKind::Cluttered, n).with_obstacles(12, (0.1, 0.5)).sample(3).expect("sampleable arena");
    WorldState::new(WorldConfig::default(), &s).expect("valid scenario")
}

/// Encoded observation of robot 0 in a world with `n` robots in a ring of radius 1.5.
pub fn observation_with_neighbors(n: usize) -> EncodedObservation {
    let s = ScenarioSampler::new(ScenarioKind::CircleSwap, n + 1).with_circle_radius(1.5).sample(1).expect("ring");
    let w = WorldState::new(WorldConfig::default(), &s).expect("valid scenario");
    encode_observation(&w.observe(0), &w.config)
}
