//! Planner evaluation: episode traces, path metrics, paired comparisons,
//! and export to CSV and SVG.

pub mod compare;
pub mod plot;
pub mod replay;

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apf::{ApfConfig, ApfParams};
use crate::control::{apf_direction, ControlError, Controller};
use crate::geometry::{unit_from_angle, Vec2};
use crate::policy::{encode_observation, ActionBox, PolicyParams, Pooling};
use crate::ppo::CheckpointError;
use crate::world::{reward, RobotStatus, Scenario, WorldConfig, WorldError, WorldState};

pub use crate::control::ppo_steer_direction;
pub use compare::{compare, ComparisonRow, ComparisonTable, PlannerSummary};
pub use plot::{plot_comparison, plot_trace};
pub use replay::{ReplayRow, ReplayTable};

/// Steering bound of the PPO steering baseline.
pub const STEER_BOUND: f64 = 2.5;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("checkpoint for planner {planner}: {message}")]
    Checkpoint { planner: String, message: String },
    #[error("planner {planner} cannot use this network: {reason}")]
    PlannerMismatch { planner: String, reason: String },
    #[error("unknown planner {0:?}")]
    UnknownPlanner(String),
    #[error("trace needs at least {needed} steps, has {got}")]
    TooShort { needed: usize, got: usize },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("io: {0}")]
    Io(String),
}

impl EvalError {
    pub fn checkpoint(planner: PlannerKind, err: CheckpointError) -> Self {
        EvalError::Checkpoint { planner: planner.as_str().to_string(), message: err.to_string() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    RpfAttention,
    RpfMeanEmbed,
    VanillaApf,
    PpoSteer,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] =
        [PlannerKind::RpfAttention, PlannerKind::RpfMeanEmbed, PlannerKind::VanillaApf, PlannerKind::PpoSteer];

    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::RpfAttention => "rpf_attention",
            PlannerKind::RpfMeanEmbed => "rpf_mean_embed",
            PlannerKind::VanillaApf => "vanilla_apf",
            PlannerKind::PpoSteer => "ppo_steer",
        }
    }

    pub fn is_learned(self) -> bool {
        self != PlannerKind::VanillaApf
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlannerKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| EvalError::UnknownPlanner(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Planner {
    VanillaApf(ApfParams),
    Learned { kind: PlannerKind, params: PolicyParams },
}

impl Planner {
    pub fn vanilla() -> Self {
        Planner::VanillaApf(ApfParams::vanilla())
    }

    /// Wraps a trained network, checking that its action space and pooling fit `kind`.
    pub fn learned(kind: PlannerKind, params: PolicyParams) -> Result<Self, EvalError> {
        let arch = params.arch();
        let mismatch = |reason: &str| {
            Err(EvalError::PlannerMismatch { planner: kind.as_str().to_string(), reason: reason.to_string() })
        };
        match kind {
            PlannerKind::VanillaApf => return mismatch("vanilla_apf has no network"),
            PlannerKind::RpfAttention | PlannerKind::RpfMeanEmbed => {
                if arch.action != ActionBox::apf_gains() {
                    return mismatch("action space is not the (eta, lambda) box");
                }
                let want = if kind == PlannerKind::RpfAttention { Pooling::Attention } else { Pooling::Mean };
                if arch.pooling != want {
                    return mismatch(&format!("expected {want:?} pooling, found {:?}", arch.pooling));
                }
            }
            PlannerKind::PpoSteer => {
                if arch.action != ActionBox::steering(STEER_BOUND) {
                    return mismatch("action space is not the steering interval");
                }
            }
        }
        Ok(Planner::Learned { kind, params })
    }

    pub fn load(kind: PlannerKind, path: &Path) -> Result<Self, EvalError> {
        let ckpt = crate::ppo::load_checkpoint(path, None).map_err(|e| EvalError::checkpoint(kind, e))?;
        Self::learned(kind, ckpt.params)
    }

    pub fn kind(&self) -> PlannerKind {
        match self {
            Planner::VanillaApf(_) => PlannerKind::VanillaApf,
            Planner::Learned { kind, .. } => *kind,
        }
    }

    /// Heading command and action for robot `id`; learned planners act on their mean.
    pub fn act(&self, world: &WorldState, id: usize, apf: &ApfConfig) -> Result<(Vec2, Vec<f64>), EvalError> {
        match self {
            Planner::VanillaApf(gains) => {
                let dir = apf_direction(world, id, gains, apf).map_err(ControlError::from)?.resolved;
                Ok((dir, vec![gains.eta, gains.lambda]))
            }
            Planner::Learned { params, .. } => {
                let obs = encode_observation(&world.observe(id), &world.config);
                let (dist, _) = params.evaluate(&obs);
                let action = dist.mode(&params.arch().action).action;
                let dir = Controller::for_arch(params.arch(), apf).direction(world, id, &action)?;
                Ok((dir, action))
            }
        }
    }
}

/// Per-robot time series; index `t` holds the state after step `t + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotTrace {
    pub start: Vec2,
    pub goal: Vec2,
    pub positions: Vec<Vec2>,
    pub headings: Vec<f64>,
    /// Empty once the robot has stopped.
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub statuses: Vec<RobotStatus>,
}

impl RobotTrace {
    pub fn final_status(&self) -> RobotStatus {
        self.statuses.last().copied().unwrap_or(RobotStatus::Active)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub planner: String,
    pub seed: u64,
    pub timestep: f64,
    pub scenario: Scenario,
    /// Number of environment steps `T`.
    pub steps: usize,
    pub robots: Vec<RobotTrace>,
}

impl EpisodeTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let t: Self = serde_json::from_str(text).map_err(|e| EvalError::Malformed(e.to_string()))?;
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<(), EvalError> {
        for (i, r) in self.robots.iter().enumerate() {
            let n = self.steps;
            if r.positions.len() != n || r.headings.len() != n || r.statuses.len() != n || r.rewards.len() != n || r.actions.len() != n {
                return Err(EvalError::Malformed(format!("robot {i} series lengths differ from steps = {n}")));
            }
            if !r.positions.iter().all(|p| p.x.is_finite() && p.y.is_finite()) {
                return Err(EvalError::Malformed(format!("robot {i} has non-finite positions")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_json()).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Rolls `planner` on `scenario` until every robot stops or the horizon ends.
pub fn run_episode(
    scenario: &Scenario,
    planner: &Planner,
    world_config: &WorldConfig,
    apf: &ApfConfig,
    seed: u64,
) -> Result<EpisodeTrace, EvalError> {
    let mut world = WorldState::new(world_config.clone(), scenario)?;
    let n = world.num_robots();
    let mut robots: Vec<RobotTrace> = scenario
        .robots
        .iter()
        .map(|r| RobotTrace {
            start: r.start,
            goal: r.goal,
            positions: Vec::new(),
            headings: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            statuses: Vec::new(),
        })
        .collect();
    while !world.all_done() && world.step_count < world.config.max_steps {
        let mut commands = vec![None; n];
        let mut actions = vec![Vec::new(); n];
        for id in world.active_ids().collect::<Vec<_>>() {
            let (dir, action) = planner.act(&world, id, apf)?;
            commands[id] = Some(dir);
            actions[id] = action;
        }
        let before = world.clone();
        world.step(&commands)?;
        for (id, (trace, action)) in robots.iter_mut().zip(actions).enumerate() {
            let r = &world.robots[id];
            trace.positions.push(r.position);
            trace.headings.push(r.heading);
            trace.rewards.push(if before.robots[id].is_active() { reward(&before, &world, id).total } else { 0.0 });
            trace.actions.push(action);
            trace.statuses.push(r.status);
        }
    }
    Ok(EpisodeTrace {
        planner: planner.kind().as_str().to_string(),
        seed,
        timestep: world_config.timestep,
        scenario: scenario.clone(),
        steps: world.step_count,
        robots,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotMetrics {
    pub path_length: f64,
    pub start_goal_distance: f64,
    pub status: RobotStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    /// Mean path length over robots, unfinished robots included.
    pub traveling_distance: f64,
    pub smoothness: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    /// Some robot did not reach its goal.
    pub partial: bool,
    pub per_robot: Vec<RobotMetrics>,
}

fn displacements(r: &RobotTrace) -> impl Iterator<Item = Vec2> + '_ {
    std::iter::once(r.start).chain(r.positions.iter().copied()).zip(r.positions.iter()).map(|(a, b)| b - a)
}

fn robot_path_length(r: &RobotTrace) -> f64 {
    displacements(r).map(|d| d.norm()).sum()
}

/// Mean over robots of the summed per-step displacement lengths.
pub fn traveling_distance(trace: &EpisodeTrace) -> Result<f64, EvalError> {
    if trace.robots.is_empty() {
        return Err(EvalError::Malformed("trace has no robots".into()));
    }
    Ok(trace.robots.iter().map(robot_path_length).sum::<f64>() / trace.robots.len() as f64)
}

/// `(Σ_robots Σ_t ‖v(t+1) − v(t)‖ / ‖v(t)‖) / T`.
///
/// Velocities are taken from the recorded headings at constant speed, so a
/// straight run scores exactly zero. Steps after a robot stops have no
/// velocity and pairs involving them are skipped, which also drops the
/// terminal step.
pub fn motion_smoothness(trace: &EpisodeTrace) -> Result<f64, EvalError> {
    if trace.steps < 2 {
        return Err(EvalError::TooShort { needed: 2, got: trace.steps });
    }
    let mut total = 0.0;
    for r in &trace.robots {
        let v: Vec<Option<Vec2>> = (0..trace.steps)
            .map(|t| {
                let moved = t == 0 || r.statuses[t - 1] == RobotStatus::Active;
                moved.then(|| unit_from_angle(r.headings[t]))
            })
            .collect();
        for w in v.windows(2) {
            if let (Some(a), Some(b)) = (w[0], w[1]) {
                total += (b - a).norm() / a.norm();
            }
        }
    }
    Ok(total / trace.steps as f64)
}

pub fn metrics(trace: &EpisodeTrace) -> Result<MetricsReport, EvalError> {
    let n = trace.robots.len() as f64;
    let per_robot: Vec<RobotMetrics> = trace
        .robots
        .iter()
        .map(|r| RobotMetrics {
            path_length: robot_path_length(r),
            start_goal_distance: (r.goal - r.start).norm(),
            status: r.final_status(),
        })
        .collect();
    let frac = |s: RobotStatus| per_robot.iter().filter(|m| m.status == s).count() as f64 / n;
    Ok(MetricsReport {
        traveling_distance: traveling_distance(trace)?,
        smoothness: motion_smoothness(trace)?,
        success_rate: frac(RobotStatus::Reached),
        collision_rate: frac(RobotStatus::Collided),
        partial: per_robot.iter().any(|m| m.status != RobotStatus::Reached),
        per_robot,
    })
}
