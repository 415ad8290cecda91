//! Scaling of world observations into network inputs.

use std::f64::consts::PI;

use crate::world::{Observation, WorldConfig};

/// Network-ready observation: the local vector `o_loc` and one feature
/// vector `w_j` per detected neighbor.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedObservation {
    pub local: Vec<f64>,
    pub neighbors: Vec<Vec<f64>>,
}

/// Distances are divided by the sensing range (goal distance by the
/// progress-reward range) and angles by π.
pub fn encode_observation(obs: &Observation, config: &WorldConfig) -> EncodedObservation {
    let l = &obs.local;
    EncodedObservation {
        local: vec![
            l.obstacle_distance / config.detection_range,
            l.obstacle_azimuth / PI,
            l.goal_distance / config.reward_range,
            l.goal_azimuth / PI,
        ],
        neighbors: obs
            .neighbors
            .iter()
            .map(|n| vec![n.distance / config.detection_range, n.azimuth / PI, n.relative_heading / PI])
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{LocalFeatures, NeighborFeature};

    #[test]
    fn scales_each_field() {
        let obs = Observation {
            local: LocalFeatures { obstacle_distance: 3.0, obstacle_azimuth: PI / 2.0, goal_distance: 5.0, goal_azimuth: -PI },
            neighbors: vec![NeighborFeature { distance: 1.5, azimuth: PI, relative_heading: -PI / 4.0 }],
        };
        let enc = encode_observation(&obs, &WorldConfig::default());
        assert_eq!(enc.local, vec![0.5, 0.5, 0.5, -1.0]);
        assert_eq!(enc.neighbors, vec![vec![0.25, 1.0, -0.25]]);
    }
}
