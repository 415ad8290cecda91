//! Deterministic 2D multi-robot environment.
//!
//! Robots are first-order point masses moving at a fixed speed along a
//! commanded heading. The world tracks goal arrival and collisions, produces
//! range-limited observations in each robot's local frame, and scores every
//! step with the shaped navigation reward.

mod scenario;

pub use scenario::{
    sample_scenario, Bounds, RobotSpec, Scenario, ScenarioKind, ScenarioSampler, ScenarioSource,
};

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{heading_of, unit_from_angle, wrap_angle, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("invalid world config: {0}")]
    InvalidConfig(String),
    #[error("malformed scenario: {0}")]
    MalformedScenario(String),
    #[error("arena overcrowded: gave up after {attempts} placement attempts")]
    Overcrowded { attempts: usize },
    #[error("robot {0} is not active and cannot be commanded")]
    InactiveRobot(usize),
    #[error("active robot {0} received no command")]
    MissingCommand(usize),
    #[error("command for robot {0} is not a unit vector")]
    NonUnitCommand(usize),
    #[error("expected {expected} command slots, got {got}")]
    CommandCount { expected: usize, got: usize },
    #[error("scenario file: {0}")]
    Io(String),
}

/// Physical and episode parameters of the simulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Constant robot speed `v` (m/s).
    pub desired_speed: f64,
    /// Safe radius `r` of every robot (m).
    pub safe_radius: f64,
    /// Sensing range `d_r` (m).
    pub detection_range: f64,
    /// Integration step (s).
    pub timestep: f64,
    /// Episode horizon in steps.
    pub max_steps: usize,
    /// Range `d_m` of the dense progress reward (m).
    pub reward_range: f64,
    /// Extra reward on the step a robot collides with another robot. The
    /// obstacle term ignores robot-robot contact, so the default adds nothing.
    pub robot_collision_penalty: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            desired_speed: 0.5,
            safe_radius: 0.1,
            detection_range: 6.0,
            timestep: 0.1,
            max_steps: 1000,
            reward_range: 10.0,
            robot_collision_penalty: 0.0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        let positive = [
            ("desired_speed", self.desired_speed),
            ("safe_radius", self.safe_radius),
            ("detection_range", self.detection_range),
            ("timestep", self.timestep),
            ("reward_range", self.reward_range),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(WorldError::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if self.detection_range <= 2.0 * self.safe_radius {
            return Err(WorldError::InvalidConfig(
                "detection_range must exceed twice the safe radius".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(WorldError::InvalidConfig("max_steps must be at least 1".into()));
        }
        if !(-100.0..=0.0).contains(&self.robot_collision_penalty) {
            return Err(WorldError::InvalidConfig(format!(
                "robot_collision_penalty must lie in [-100, 0], got {}",
                self.robot_collision_penalty
            )));
        }
        Ok(())
    }

    /// Distance covered in one step.
    pub fn step_length(&self) -> f64 {
        self.desired_speed * self.timestep
    }
}

/// Static circular obstacle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
}

impl Obstacle {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Signed distance from `p` to the obstacle surface (negative inside).
    pub fn surface_distance(&self, p: &Vec2) -> f64 {
        (p - self.center).norm() - self.radius
    }

    /// Closest surface point to `p`. Undefined direction at the center; the
    /// +x surface point is returned there.
    pub fn surface_point(&self, p: &Vec2) -> Vec2 {
        let d = p - self.center;
        let n = d.norm();
        if n > 0.0 {
            self.center + d * (self.radius / n)
        } else {
            self.center + Vec2::new(self.radius, 0.0)
        }
    }
}

/// Nearest obstacle to `p` by surface distance; ties go to the lowest index.
pub fn nearest_obstacle<'a>(p: &Vec2, obstacles: &'a [Obstacle]) -> Option<(usize, &'a Obstacle, f64)> {
    let mut best: Option<(usize, &Obstacle, f64)> = None;
    for (i, o) in obstacles.iter().enumerate() {
        let d = o.surface_distance(p);
        if best.is_none_or(|(_, _, bd)| d < bd) {
            best = Some((i, o, d));
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotStatus {
    Active,
    Reached,
    Collided,
}

impl RobotStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RobotStatus::Active => "active",
            RobotStatus::Reached => "reached",
            RobotStatus::Collided => "collided",
        }
    }
}

impl std::str::FromStr for RobotStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "active" => Ok(RobotStatus::Active),
            "reached" => Ok(RobotStatus::Reached),
            "collided" => Ok(RobotStatus::Collided),
            other => Err(format!("unknown robot status `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Vec2,
    /// Heading in `(-π, π]`.
    pub heading: f64,
    pub goal: Vec2,
    pub status: RobotStatus,
    /// Accumulated path length `d_a`.
    pub path_length: f64,
    /// Straight-line start-goal distance `d_s`.
    pub start_goal_dist: f64,
    /// Steps taken while active.
    pub steps_taken: usize,
}

impl RobotState {
    pub fn is_active(&self) -> bool {
        self.status == RobotStatus::Active
    }

    pub fn goal_distance(&self) -> f64 {
        (self.goal - self.position).norm()
    }

    pub fn heading_vector(&self) -> Vec2 {
        unit_from_angle(self.heading)
    }
}

/// Local part of an observation: nearest obstacle and goal, robot frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFeatures {
    pub obstacle_distance: f64,
    pub obstacle_azimuth: f64,
    pub goal_distance: f64,
    pub goal_azimuth: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborFeature {
    pub distance: f64,
    pub azimuth: f64,
    pub relative_heading: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub local: LocalFeatures,
    /// Detected neighbors in ascending-distance order.
    pub neighbors: Vec<NeighborFeature>,
}

/// Per-robot status changes produced by one [`WorldState::step`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepOutcome {
    pub transitions: Vec<(usize, RobotStatus)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardBreakdown {
    pub arrival: f64,
    pub smoothness: f64,
    pub obstacle: f64,
    pub progress: f64,
    pub total: f64,
}

/// The single source of simulation truth.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub config: WorldConfig,
    pub robots: Vec<RobotState>,
    pub obstacles: Vec<Obstacle>,
    pub step_count: usize,
}

impl WorldState {
    /// Builds the initial world. Robots start facing their goal.
    pub fn new(config: WorldConfig, scenario: &Scenario) -> Result<Self, WorldError> {
        config.validate()?;
        scenario.validate(config.safe_radius)?;
        let robots = scenario
            .robots
            .iter()
            .map(|spec| {
                let to_goal = spec.goal - spec.start;
                RobotState {
                    position: spec.start,
                    heading: heading_of(&to_goal),
                    goal: spec.goal,
                    status: RobotStatus::Active,
                    path_length: 0.0,
                    start_goal_dist: to_goal.norm(),
                    steps_taken: 0,
                }
            })
            .collect();
        Ok(Self {
            config,
            robots,
            obstacles: scenario.obstacles.clone(),
            step_count: 0,
        })
    }

    pub fn num_robots(&self) -> usize {
        self.robots.len()
    }

    pub fn active_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.robots.iter().enumerate().filter(|(_, r)| r.is_active()).map(|(i, _)| i)
    }

    pub fn all_done(&self) -> bool {
        self.robots.iter().all(|r| !r.is_active())
    }

    /// Active robots other than `id` strictly inside the sensing range,
    /// nearest first (ties by index).
    pub fn neighbors(&self, id: usize) -> Vec<usize> {
        let p = self.robots[id].position;
        let mut found: Vec<(f64, usize)> = self
            .robots
            .iter()
            .enumerate()
            .filter(|&(j, r)| j != id && r.is_active())
            .map(|(j, r)| ((r.position - p).norm(), j))
            .filter(|&(d, _)| d < self.config.detection_range)
            .collect();
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.into_iter().map(|(_, j)| j).collect()
    }

    /// Surface distance from robot `id` to the nearest obstacle, unclamped.
    pub fn obstacle_clearance(&self, id: usize) -> f64 {
        nearest_obstacle(&self.robots[id].position, &self.obstacles)
            .map_or(f64::INFINITY, |(_, _, d)| d)
    }

    /// Range-limited observation of robot `id` in its local frame.
    pub fn observe(&self, id: usize) -> Observation {
        let robot = &self.robots[id];
        let range = self.config.detection_range;
        let to_local = |v: Vec2| wrap_angle(heading_of(&v) - robot.heading);

        let (obstacle_distance, obstacle_azimuth) =
            match nearest_obstacle(&robot.position, &self.obstacles) {
                Some((_, o, d)) if d < range => {
                    (d.clamp(0.0, range), to_local(o.center - robot.position))
                }
                _ => (range, 0.0),
            };
        let to_goal = robot.goal - robot.position;
        let local = LocalFeatures {
            obstacle_distance,
            obstacle_azimuth,
            goal_distance: to_goal.norm(),
            goal_azimuth: to_local(to_goal),
        };
        let neighbors = self
            .neighbors(id)
            .into_iter()
            .map(|j| {
                let other = &self.robots[j];
                let rel = other.position - robot.position;
                NeighborFeature {
                    distance: rel.norm(),
                    azimuth: to_local(rel),
                    relative_heading: wrap_angle(other.heading - robot.heading),
                }
            })
            .collect();
        Observation { local, neighbors }
    }

    /// Advances every active robot one Euler step along its command.
    ///
    /// `commands[i]` must be `Some(unit vector)` exactly for active robots.
    pub fn step(&mut self, commands: &[Option<Vec2>]) -> Result<StepOutcome, WorldError> {
        if commands.len() != self.robots.len() {
            return Err(WorldError::CommandCount { expected: self.robots.len(), got: commands.len() });
        }
        for (i, (robot, cmd)) in self.robots.iter().zip(commands).enumerate() {
            match (robot.is_active(), cmd) {
                (false, Some(_)) => return Err(WorldError::InactiveRobot(i)),
                (true, None) => return Err(WorldError::MissingCommand(i)),
                (true, Some(c)) if !c.norm().is_finite() || (c.norm() - 1.0).abs() > 1e-9 => {
                    return Err(WorldError::NonUnitCommand(i))
                }
                _ => {}
            }
        }

        let step = self.config.step_length();
        let moving: Vec<usize> = self.active_ids().collect();
        for &i in &moving {
            let dir = commands[i].expect("validated above");
            let robot = &mut self.robots[i];
            robot.position += dir * step;
            robot.heading = heading_of(&dir);
            robot.steps_taken += 1;
            robot.path_length = robot.steps_taken as f64 * step;
        }
        self.step_count += 1;

        let r = self.config.safe_radius;
        let mut outcome = StepOutcome::default();
        let mut still_moving = Vec::with_capacity(moving.len());
        for &i in &moving {
            if self.robots[i].goal_distance() < r {
                outcome.transitions.push((i, RobotStatus::Reached));
            } else {
                still_moving.push(i);
            }
        }
        for &i in &still_moving {
            let p = self.robots[i].position;
            let hit_obstacle = self.obstacle_clearance(i) < r;
            let hit_robot = still_moving
                .iter()
                .any(|&j| j != i && (self.robots[j].position - p).norm() < 2.0 * r);
            if hit_obstacle || hit_robot {
                outcome.transitions.push((i, RobotStatus::Collided));
            }
        }
        for &(i, status) in &outcome.transitions {
            self.robots[i].status = status;
        }
        outcome.transitions.sort_by_key(|&(i, _)| i);
        Ok(outcome)
    }
}

/// Shaped reward for robot `id` over the step `before -> after`.
pub fn reward(before: &WorldState, after: &WorldState, id: usize) -> RewardBreakdown {
    let cfg = &after.config;
    let prev = &before.robots[id];
    let robot = &after.robots[id];

    let arrival = if prev.is_active() && robot.status == RobotStatus::Reached {
        300.0 - 100.0 * robot.path_length / robot.start_goal_dist
    } else {
        0.0
    };
    let turn = wrap_angle(robot.heading - prev.heading).abs();
    let smoothness = if turn > FRAC_PI_4 { -5.0 } else { 0.0 };
    let clearance = after.obstacle_clearance(id);
    let r = cfg.safe_radius;
    let obstacle = if clearance < r {
        -100.0
    } else if clearance < 2.0 * r {
        -20.0
    } else if prev.is_active() && robot.status == RobotStatus::Collided {
        cfg.robot_collision_penalty
    } else {
        0.0
    };
    let d_g = robot.goal_distance();
    let progress = if d_g < cfg.reward_range { 1.0 - d_g / cfg.reward_range } else { 0.0 };
    RewardBreakdown {
        arrival,
        smoothness,
        obstacle,
        progress,
        total: arrival + smoothness + obstacle + progress,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotate;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn single(start: (f64, f64), goal: (f64, f64), obstacles: Vec<Obstacle>) -> Scenario {
        Scenario {
            kind: ScenarioKind::Cluttered,
            robots: vec![RobotSpec { start: Vec2::new(start.0, start.1), goal: Vec2::new(goal.0, goal.1) }],
            obstacles,
            circle_radius: None,
            bounds: None,
        }
    }

    fn pair(a: Vec2, b: Vec2) -> Scenario {
        Scenario {
            kind: ScenarioKind::Cluttered,
            robots: vec![
                RobotSpec { start: a, goal: a + Vec2::new(5.0, 0.0) },
                RobotSpec { start: b, goal: b + Vec2::new(5.0, 3.0) },
            ],
            obstacles: vec![],
            circle_radius: None,
            bounds: None,
        }
    }

    #[test]
    fn build_sets_start_goal_distance() {
        let w = WorldState::new(WorldConfig::default(), &single((0.0, 0.0), (5.0, 0.0), vec![])).unwrap();
        assert_eq!(w.robots[0].start_goal_dist, 5.0);
        assert_eq!(w.robots[0].path_length, 0.0);
        assert_eq!(w.step_count, 0);
        assert!(w.robots[0].is_active());
    }

    #[test]
    fn build_rejects_start_inside_obstacle() {
        let s = single((0.0, 0.0), (5.0, 0.0), vec![Obstacle::new(Vec2::new(0.2, 0.0), 0.5)]);
        assert!(matches!(
            WorldState::new(WorldConfig::default(), &s),
            Err(WorldError::MalformedScenario(_))
        ));
    }

    #[test]
    fn observe_obstacle_ahead() {
        let s = single((0.0, 0.0), (0.0, 5.0), vec![Obstacle::new(Vec2::new(3.0, 0.0), 0.5)]);
        let mut w = WorldState::new(WorldConfig::default(), &s).unwrap();
        w.robots[0].heading = 0.0;
        let o = w.observe(0);
        assert_abs_diff_eq!(o.local.obstacle_distance, 2.5);
        assert_abs_diff_eq!(o.local.obstacle_azimuth, 0.0);
        assert_abs_diff_eq!(o.local.goal_azimuth, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn observe_empty_world_convention() {
        let w = WorldState::new(WorldConfig::default(), &single((0.0, 0.0), (5.0, 0.0), vec![])).unwrap();
        let o = w.observe(0);
        assert_eq!(o.local.obstacle_distance, 6.0);
        assert_eq!(o.local.obstacle_azimuth, 0.0);
        assert!(o.neighbors.is_empty());
    }

    #[test]
    fn observe_neighbor_azimuth() {
        let mut w = WorldState::new(WorldConfig::default(), &pair(Vec2::zeros(), Vec2::new(0.0, 2.0))).unwrap();
        w.robots[0].heading = 0.0;
        let o = w.observe(0);
        assert_eq!(o.neighbors.len(), 1);
        assert_abs_diff_eq!(o.neighbors[0].azimuth, FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(o.neighbors[0].distance, 2.0);
    }

    #[test]
    fn neighbors_out_of_range_and_inactive_are_hidden() {
        let mut w = WorldState::new(WorldConfig::default(), &pair(Vec2::zeros(), Vec2::new(6.0, 0.0))).unwrap();
        assert!(w.observe(0).neighbors.is_empty(), "d = d_r is not detected");
        w.robots[1].position = Vec2::new(1.0, 0.0);
        assert_eq!(w.observe(0).neighbors.len(), 1);
        w.robots[1].status = RobotStatus::Reached;
        assert!(w.observe(0).neighbors.is_empty());
    }

    #[test]
    fn euler_step() {
        let mut w = WorldState::new(WorldConfig::default(), &single((0.0, 0.0), (5.0, 0.0), vec![])).unwrap();
        w.step(&[Some(Vec2::new(1.0, 0.0))]).unwrap();
        assert_abs_diff_eq!(w.robots[0].position.x, 0.05);
        assert_abs_diff_eq!(w.robots[0].position.y, 0.0);
        assert_eq!(w.step_count, 1);
    }

    #[test]
    fn reaching_goal() {
        let mut w = WorldState::new(WorldConfig::default(), &single((0.0, 0.0), (0.2, 0.0), vec![])).unwrap();
        w.step(&[Some(Vec2::new(1.0, 0.0))]).unwrap();
        w.step(&[Some(Vec2::new(1.0, 0.0))]).unwrap();
        // 0.1 m from goal: not yet reached (strict < r).
        assert!(w.robots[0].is_active());
        let out = w.step(&[Some(Vec2::new(1.0, 0.0))]).unwrap();
        assert_eq!(out.transitions, vec![(0, RobotStatus::Reached)]);
        // Once reached, commands are rejected.
        assert_eq!(w.step(&[Some(Vec2::new(1.0, 0.0))]), Err(WorldError::InactiveRobot(0)));
        assert_eq!(w.step(&[None]).unwrap(), StepOutcome::default());
    }

    #[test]
    fn robots_too_close_both_collide() {
        let mut w = WorldState::new(WorldConfig::default(), &pair(Vec2::zeros(), Vec2::new(0.25, 0.0))).unwrap();
        // Move toward each other: 0.25 - 2*0.05 = 0.15 < 2r.
        let out = w.step(&[Some(Vec2::new(1.0, 0.0)), Some(Vec2::new(-1.0, 0.0))]).unwrap();
        assert_eq!(out.transitions, vec![(0, RobotStatus::Collided), (1, RobotStatus::Collided)]);
        assert!(w.all_done());
    }

    #[test]
    fn robot_collision_penalty_is_configurable() {
        let s = pair(Vec2::zeros(), Vec2::new(0.25, 0.0));
        let cmds = [Some(Vec2::new(1.0, 0.0)), Some(Vec2::new(-1.0, 0.0))];
        for (penalty, expected) in [(-100.0, -100.0), (0.0, 0.0), (-20.0, -20.0)] {
            let cfg = WorldConfig { robot_collision_penalty: penalty, ..Default::default() };
            let before = WorldState::new(cfg, &s).unwrap();
            let mut after = before.clone();
            after.step(&cmds).unwrap();
            assert_eq!(reward(&before, &after, 0).obstacle, expected);
            assert_eq!(reward(&after, &after, 0).obstacle, 0.0);
        }
        let bad = WorldConfig { robot_collision_penalty: -150.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn step_rejects_bad_commands() {
        let mut w = WorldState::new(WorldConfig::default(), &single((0.0, 0.0), (5.0, 0.0), vec![])).unwrap();
        assert_eq!(w.step(&[None]), Err(WorldError::MissingCommand(0)));
        assert_eq!(w.step(&[Some(Vec2::new(2.0, 0.0))]), Err(WorldError::NonUnitCommand(0)));
        assert!(matches!(w.step(&[]), Err(WorldError::CommandCount { .. })));
    }

    #[test]
    fn arrival_reward_straight_line() {
        let s = single((0.0, 0.0), (0.5, 0.0), vec![]);
        let mut w = WorldState::new(WorldConfig::default(), &s).unwrap();
        let mut last = None;
        while !w.all_done() {
            let before = w.clone();
            w.step(&[Some(Vec2::new(1.0, 0.0))]).unwrap();
            last = Some(reward(&before, &w, 0));
        }
        let r = last.unwrap();
        // Arrival triggers at d_g < r, so d_a = d_s - 0.1 (within rounding).
        assert_abs_diff_eq!(r.arrival, 300.0 - 100.0 * w.robots[0].path_length / 0.5, epsilon = 1e-12);
        // Exact d_a = d_s case.
        let mut before = w.clone();
        before.robots[0].status = RobotStatus::Active;
        let mut after = w.clone();
        after.robots[0].path_length = 0.5;
        assert_abs_diff_eq!(reward(&before, &after, 0).arrival, 200.0);
    }

    #[test]
    fn obstacle_reward_bands() {
        let s = single((0.0, 0.0), (0.0, 5.0), vec![Obstacle::new(Vec2::new(0.65, 0.0), 0.5)]);
        let w = WorldState::new(WorldConfig::default(), &s).unwrap();
        // d_o = 0.15 = 1.5 r
        let r = reward(&w, &w, 0);
        assert_eq!(r.obstacle, -20.0);
        let mut near = w.clone();
        near.robots[0].position = Vec2::new(0.1, 0.0);
        assert_eq!(reward(&w, &near, 0).obstacle, -100.0);
        let mut far = w.clone();
        far.robots[0].position = Vec2::new(-0.2, 0.0);
        assert_eq!(reward(&w, &far, 0).obstacle, 0.0);
    }

    #[test]
    fn progress_and_smoothness_rewards() {
        let w = WorldState::new(WorldConfig::default(), &single((0.0, 0.0), (5.0, 0.0), vec![])).unwrap();
        let r = reward(&w, &w, 0);
        assert_abs_diff_eq!(r.progress, 0.5);
        assert_eq!(r.smoothness, 0.0);
        let mut turned = w.clone();
        turned.robots[0].heading = 0.8;
        assert_eq!(reward(&w, &turned, 0).smoothness, -5.0);
        turned.robots[0].heading = 0.7;
        assert_eq!(reward(&w, &turned, 0).smoothness, 0.0);
        let mut far = w.clone();
        far.robots[0].goal = Vec2::new(11.0, 0.0);
        assert_eq!(reward(&w, &far, 0).progress, 0.0);
        assert_abs_diff_eq!(r.total, r.arrival + r.smoothness + r.obstacle + r.progress);
    }

    fn arb_world() -> impl Strategy<Value = (WorldState, u64)> {
        (2usize..6, any::<u64>()).prop_map(|(n, seed)| {
            let sampler = ScenarioSampler::new(ScenarioKind::Cluttered, n);
            let s = sampler.sample(seed).unwrap();
            (WorldState::new(WorldConfig::default(), &s).unwrap(), seed)
        })
    }

    fn random_commands(w: &WorldState, seed: u64, t: usize) -> Vec<Option<Vec2>> {
        w.robots
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.is_active().then(|| {
                    let a = ((seed as f64) * 0.37 + (i * 7 + t * 13) as f64 * 0.61).sin() * PI;
                    unit_from_angle(a)
                })
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn frame_invariance((w, _seed) in arb_world(), theta in -3.0f64..3.0) {
            let mut rotated = w.clone();
            for r in &mut rotated.robots {
                r.position = rotate(&r.position, theta);
                r.goal = rotate(&r.goal, theta);
                r.heading = wrap_angle(r.heading + theta);
            }
            for o in &mut rotated.obstacles {
                o.center = rotate(&o.center, theta);
            }
            for i in 0..w.num_robots() {
                let a = w.observe(i);
                let b = rotated.observe(i);
                prop_assert!((a.local.obstacle_distance - b.local.obstacle_distance).abs() < 1e-9);
                prop_assert!(wrap_angle(a.local.obstacle_azimuth - b.local.obstacle_azimuth).abs() < 1e-9);
                prop_assert!((a.local.goal_distance - b.local.goal_distance).abs() < 1e-9);
                prop_assert!(wrap_angle(a.local.goal_azimuth - b.local.goal_azimuth).abs() < 1e-9);
                prop_assert_eq!(a.neighbors.len(), b.neighbors.len());
                for (x, y) in a.neighbors.iter().zip(&b.neighbors) {
                    prop_assert!((x.distance - y.distance).abs() < 1e-9);
                    prop_assert!(wrap_angle(x.azimuth - y.azimuth).abs() < 1e-9);
                    prop_assert!(wrap_angle(x.relative_heading - y.relative_heading).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn stepping_invariants((w, seed) in arb_world()) {
            let mut a = w.clone();
            let mut b = w.clone();
            let mut steps_active = vec![0usize; w.num_robots()];
            for t in 0..60 {
                let cmds = random_commands(&a, seed, t);
                let before = a.clone();
                a.step(&cmds).unwrap();
                b.step(&cmds).unwrap();
                prop_assert_eq!(&a, &b);
                for i in 0..a.num_robots() {
                    if before.robots[i].is_active() {
                        steps_active[i] += 1;
                        let r = reward(&before, &a, i);
                        prop_assert!(r.total >= -105.0 && r.total <= 301.0);
                    } else {
                        prop_assert_eq!(before.robots[i].status, a.robots[i].status);
                    }
                    let expected = steps_active[i] as f64 * a.config.step_length();
                    prop_assert_eq!(a.robots[i].path_length, expected);
                    prop_assert!(a.robots[i].heading > -PI && a.robots[i].heading <= PI);
                }
            }
        }
    }
}
