//! Artificial potential field with wall following and the soft blend.
//!
//! All functions are pure. Forces are given directly; no potential is ever
//! materialized.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{perp, try_normalize, Vec2};
use crate::world::Obstacle;

#[derive(Debug, Error, PartialEq)]
pub enum ApfError {
    #[error("robot coincides with its goal")]
    CoincidentGoal,
    #[error("robot touches or is inside an obstacle")]
    Contact,
    #[error("robot sits at the obstacle center")]
    DegenerateTangent,
    #[error("soft blend vector vanished")]
    DegenerateBlend,
    #[error("APF gains out of range: eta={eta}, lambda={lambda}")]
    GainsOutOfRange { eta: f64, lambda: f64 },
}

/// Gains modulated online: obstacle repulsion scale and inter-robot compactness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApfParams {
    pub eta: f64,
    pub lambda: f64,
}

impl ApfParams {
    pub const ETA_RANGE: (f64, f64) = (0.0, 0.1);
    pub const LAMBDA_RANGE: (f64, f64) = (0.0, 5.0);

    pub fn new(eta: f64, lambda: f64) -> Result<Self, ApfError> {
        let ok = (Self::ETA_RANGE.0..=Self::ETA_RANGE.1).contains(&eta)
            && (Self::LAMBDA_RANGE.0..=Self::LAMBDA_RANGE.1).contains(&lambda);
        if ok {
            Ok(Self { eta, lambda })
        } else {
            Err(ApfError::GainsOutOfRange { eta, lambda })
        }
    }

    /// Fixed gains of the hand-tuned baseline.
    pub fn vanilla() -> Self {
        Self { eta: 0.05, lambda: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApfConfig {
    /// Obstacle influence range `ρ`.
    pub influence_range: f64,
    /// Inter-robot force magnitude above which tangent selection follows it.
    pub wall_follow_threshold: f64,
    pub wall_following: bool,
    pub soft_wall_following: bool,
}

impl Default for ApfConfig {
    fn default() -> Self {
        Self {
            influence_range: 10.0,
            wall_follow_threshold: 1.0,
            wall_following: true,
            soft_wall_following: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Free,
    WallFollow,
    Soft,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForceBreakdown {
    pub attractive: Vec2,
    pub repulsive: Vec2,
    pub inter_robot: Vec2,
    /// `attractive + repulsive`.
    pub resultant: Vec2,
    /// `(n_1, n_2)` of the nearest obstacle when it is within range.
    pub tangents: Option<(Vec2, Vec2)>,
    pub soft: Option<Vec2>,
    /// Unit heading command.
    pub resolved: Vec2,
    pub regime: Regime,
}

/// Unit vector from `p` toward `goal`.
pub fn attractive_force(p: &Vec2, goal: &Vec2) -> Result<Vec2, ApfError> {
    try_normalize(&(goal - p)).ok_or(ApfError::CoincidentGoal)
}

/// Repulsion from the nearest obstacle surface point `surface`.
pub fn repulsive_force(p: &Vec2, surface: &Vec2, eta: f64, influence_range: f64) -> Result<Vec2, ApfError> {
    let away = p - surface;
    let d = away.norm();
    if d == 0.0 {
        return Err(ApfError::Contact);
    }
    if d > influence_range {
        return Ok(Vec2::zeros());
    }
    Ok(away * (eta * (1.0 / d - 1.0 / influence_range) / (d * d * d)))
}

/// Sum of pairwise terms `(0.5 - λ/d)·(p_j - p)/d`; repulsive inside `2λ`.
pub fn inter_robot_force(p: &Vec2, neighbors: &[Vec2], lambda: f64) -> Vec2 {
    neighbors.iter().fold(Vec2::zeros(), |acc, q| {
        let rel = q - p;
        let d = rel.norm();
        acc + rel * ((0.5 - lambda / d) / d)
    })
}

/// Counterclockwise and clockwise tangents of `obstacle` at `p`.
pub fn tangent_directions(p: &Vec2, obstacle: &Obstacle) -> Result<(Vec2, Vec2), ApfError> {
    let radial = try_normalize(&(p - obstacle.center)).ok_or(ApfError::DegenerateTangent)?;
    let n1 = perp(&radial);
    Ok((n1, -n1))
}

/// Picks the tangent aligned with the inter-robot force when it is strong,
/// otherwise the one aligned with the current heading. Ties go to `n1`.
pub fn select_wall_direction(n1: &Vec2, n2: &Vec2, inter_robot: &Vec2, heading: &Vec2, threshold: f64) -> Vec2 {
    let reference = if inter_robot.norm() > threshold { inter_robot } else { heading };
    if n2.dot(reference) > n1.dot(reference) {
        *n2
    } else {
        *n1
    }
}

/// `normalize(F_ar + 2‖F_r‖·n)`.
pub fn soft_force(resultant: &Vec2, repulsive: &Vec2, tangent: &Vec2) -> Result<Vec2, ApfError> {
    try_normalize(&(resultant + tangent * (2.0 * repulsive.norm()))).ok_or(ApfError::DegenerateBlend)
}

/// Full heading decision for one robot.
///
/// Only the nearest obstacle contributes repulsion and tangents. Outside
/// wall-following, the heading is the normalized sum of all three forces;
/// inside, the inter-robot force only steers the tangent choice.
pub fn resolve_direction(
    p: &Vec2,
    goal: &Vec2,
    nearest: Option<&Obstacle>,
    neighbors: &[Vec2],
    heading: &Vec2,
    params: &ApfParams,
    config: &ApfConfig,
) -> Result<ForceBreakdown, ApfError> {
    let attractive = attractive_force(p, goal)?;
    let inter_robot = inter_robot_force(p, neighbors, params.lambda);

    let mut repulsive = Vec2::zeros();
    let mut tangents = None;
    if let Some(obstacle) = nearest {
        if obstacle.surface_distance(p) <= 0.0 {
            return Err(ApfError::Contact);
        }
        let surface = obstacle.surface_point(p);
        if (p - surface).norm() <= config.influence_range {
            repulsive = repulsive_force(p, &surface, params.eta, config.influence_range)?;
            tangents = Some(tangent_directions(p, obstacle)?);
        }
    }
    let resultant = attractive + repulsive;

    let free = |repulsive: Vec2| {
        try_normalize(&(attractive + repulsive + inter_robot)).unwrap_or(attractive)
    };
    let mut breakdown = ForceBreakdown {
        attractive,
        repulsive,
        inter_robot,
        resultant,
        tangents,
        soft: None,
        resolved: free(repulsive),
        regime: Regime::Free,
    };
    let Some((n1, n2)) = tangents.filter(|_| config.wall_following) else {
        return Ok(breakdown);
    };

    let tangent = select_wall_direction(&n1, &n2, &inter_robot, heading, config.wall_follow_threshold);
    let stuck = resultant.norm() <= 1e-12 * attractive.norm();
    if stuck || resultant.dot(&attractive) < 0.0 {
        breakdown.regime = Regime::WallFollow;
        breakdown.resolved = tangent;
    } else if config.soft_wall_following && repulsive.dot(&attractive) < 0.0 {
        let soft = soft_force(&resultant, &repulsive, &tangent).unwrap_or(tangent);
        breakdown.regime = Regime::Soft;
        breakdown.soft = Some(soft);
        breakdown.resolved = soft;
    }
    Ok(breakdown)
}
