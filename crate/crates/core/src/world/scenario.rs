//! Scenario descriptions, seeded generation and the TOML scenario file.
//!
//! File schema (all lengths in meters):
//!
//! ```toml
//! kind = "circle_swap"          # or "cluttered"
//! circle_radius = 2.0           # optional, circle_swap only
//!
//! [bounds]                      # optional, used for plotting only
//! min = [-5.0, -5.0]
//! max = [5.0, 5.0]
//!
//! [[robots]]
//! start = [2.0, 0.0]
//! goal = [-2.0, 0.0]
//!
//! [[obstacles]]
//! center = [0.0, 1.5]
//! radius = 0.5
//! ```

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Obstacle, WorldError};
use crate::geometry::{unit_from_angle, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Cluttered,
    CircleSwap,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Cluttered => "cluttered",
            ScenarioKind::CircleSwap => "circle_swap",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cluttered" => Ok(ScenarioKind::Cluttered),
            "circle_swap" => Ok(ScenarioKind::CircleSwap),
            other => Err(format!("unknown scenario kind `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub start: Vec2,
    pub goal: Vec2,
}

/// Axis-aligned rectangle. The arena has no walls; bounds only frame plots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn centered(half_width: f64, half_height: f64) -> Self {
        Self {
            min: Vec2::new(-half_width, -half_height),
            max: Vec2::new(half_width, half_height),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circle_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    pub robots: Vec<RobotSpec>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

impl Scenario {
    /// Checks separation invariants for robots of radius `safe_radius`.
    pub fn validate(&self, safe_radius: f64) -> Result<(), WorldError> {
        let bad = |msg: String| Err(WorldError::MalformedScenario(msg));
        if self.robots.is_empty() {
            return bad("scenario has no robots".into());
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0 && o.radius.is_finite()) || !o.center.iter().all(|c| c.is_finite()) {
                return bad(format!("obstacle {k} is degenerate"));
            }
        }
        for (i, r) in self.robots.iter().enumerate() {
            if !r.start.iter().chain(r.goal.iter()).all(|c| c.is_finite()) {
                return bad(format!("robot {i} has non-finite coordinates"));
            }
            if (r.goal - r.start).norm() < safe_radius {
                return bad(format!("robot {i} starts inside its goal region"));
            }
            for (k, o) in self.obstacles.iter().enumerate() {
                for (what, p) in [("start", r.start), ("goal", r.goal)] {
                    if o.surface_distance(&p) <= safe_radius {
                        return bad(format!("robot {i} {what} lies inside obstacle {k}"));
                    }
                }
            }
            for (j, other) in self.robots.iter().enumerate().skip(i + 1) {
                if (r.start - other.start).norm() <= 2.0 * safe_radius {
                    return bad(format!("robots {i} and {j} start overlapping"));
                }
                if (r.goal - other.goal).norm() <= 2.0 * safe_radius {
                    return bad(format!("robots {i} and {j} share a goal region"));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always representable as TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self, WorldError> {
        toml::from_str(text).map_err(|e| WorldError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WorldError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), WorldError> {
        std::fs::write(path, self.to_toml()).map_err(|e| WorldError::Io(format!("{}: {e}", path.display())))
    }
}

/// Seeded scenario generator.
///
/// `circle_swap` places robots in evenly spaced angular slots around a
/// circle (random global rotation) with goals at the antipodes. A nonzero
/// `angular_jitter` perturbs each robot inside its slot; it is a fraction of
/// the slot width and breaks the mirror symmetry that otherwise traps any
/// purely radial force field in a head-on deadlock.
///
/// `cluttered` rejection-samples obstacle centers, then starts and goals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSampler {
    pub kind: ScenarioKind,
    pub n_robots: usize,
    pub circle_radius: f64,
    pub angular_jitter: f64,
    /// Half extents of the cluttered arena.
    pub arena_half_size: (f64, f64),
    pub n_obstacles: usize,
    pub obstacle_radius: (f64, f64),
    /// Minimum free gap between obstacle surfaces.
    pub obstacle_gap: f64,
    /// Minimum clearance of starts and goals from obstacle surfaces and
    /// from each other.
    pub clearance: f64,
    pub min_start_goal: f64,
    pub safe_radius: f64,
    pub max_attempts: usize,
}

impl Default for ScenarioSampler {
    fn default() -> Self {
        Self::new(ScenarioKind::CircleSwap, 6)
    }
}

impl ScenarioSampler {
    pub fn new(kind: ScenarioKind, n_robots: usize) -> Self {
        Self {
            kind,
            n_robots,
            circle_radius: 2.0,
            angular_jitter: 0.5,
            arena_half_size: (5.0, 5.0),
            n_obstacles: 12,
            obstacle_radius: (0.5, 0.5),
            obstacle_gap: 0.6,
            clearance: 0.4,
            min_start_goal: 4.0,
            safe_radius: 0.1,
            max_attempts: 20_000,
        }
    }

    pub fn with_circle_radius(mut self, radius: f64) -> Self {
        self.circle_radius = radius;
        self
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.angular_jitter = jitter;
        self
    }

    pub fn with_obstacles(mut self, count: usize, radius: (f64, f64)) -> Self {
        self.n_obstacles = count;
        self.obstacle_radius = radius;
        self
    }

    pub fn with_arena(mut self, half_width: f64, half_height: f64) -> Self {
        self.arena_half_size = (half_width, half_height);
        self
    }

    pub fn sample(&self, seed: u64) -> Result<Scenario, WorldError> {
        if self.n_robots == 0 {
            return Err(WorldError::MalformedScenario("n_robots must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = match self.kind {
            ScenarioKind::CircleSwap => self.sample_circle(&mut rng),
            ScenarioKind::Cluttered => self.sample_cluttered(&mut rng)?,
        };
        scenario.validate(self.safe_radius)?;
        Ok(scenario)
    }

    fn sample_circle(&self, rng: &mut ChaCha8Rng) -> Scenario {
        let n = self.n_robots;
        let slot = TAU / n as f64;
        let offset = rng.random_range(0.0..TAU);
        let robots = (0..n)
            .map(|k| {
                let jitter = if self.angular_jitter > 0.0 {
                    rng.random_range(-0.5..0.5) * self.angular_jitter * slot
                } else {
                    0.0
                };
                let start = unit_from_angle(offset + k as f64 * slot + jitter) * self.circle_radius;
                RobotSpec { start, goal: -start }
            })
            .collect();
        let half = self.circle_radius + 1.0;
        Scenario {
            kind: ScenarioKind::CircleSwap,
            circle_radius: Some(self.circle_radius),
            bounds: Some(Bounds::centered(half, half)),
            robots,
            obstacles: Vec::new(),
        }
    }

    fn sample_cluttered(&self, rng: &mut ChaCha8Rng) -> Result<Scenario, WorldError> {
        let (hw, hh) = self.arena_half_size;
        let mut attempts = 0usize;
        let mut budget = || {
            attempts += 1;
            if attempts > self.max_attempts {
                Err(WorldError::Overcrowded { attempts: self.max_attempts })
            } else {
                Ok(())
            }
        };

        let mut obstacles: Vec<Obstacle> = Vec::with_capacity(self.n_obstacles);
        while obstacles.len() < self.n_obstacles {
            budget()?;
            let (lo, hi) = self.obstacle_radius;
            let radius = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let center = Vec2::new(
                rng.random_range(-hw + radius..hw - radius),
                rng.random_range(-hh + radius..hh - radius),
            );
            let fits = obstacles
                .iter()
                .all(|o| (o.center - center).norm() - o.radius - radius >= self.obstacle_gap);
            if fits {
                obstacles.push(Obstacle::new(center, radius));
            }
        }

        let free = |p: &Vec2, taken: &[Vec2]| {
            obstacles.iter().all(|o| o.surface_distance(p) > self.clearance)
                && taken.iter().all(|q| (p - q).norm() > self.clearance.max(2.0 * self.safe_radius))
        };
        let mut starts: Vec<Vec2> = Vec::with_capacity(self.n_robots);
        let mut goals: Vec<Vec2> = Vec::with_capacity(self.n_robots);
        while starts.len() < self.n_robots {
            budget()?;
            let start = Vec2::new(rng.random_range(-hw..hw), rng.random_range(-hh..hh));
            if !free(&start, &starts) {
                continue;
            }
            let goal = Vec2::new(rng.random_range(-hw..hw), rng.random_range(-hh..hh));
            if (goal - start).norm() < self.min_start_goal || !free(&goal, &goals) {
                continue;
            }
            starts.push(start);
            goals.push(goal);
        }

        Ok(Scenario {
            kind: ScenarioKind::Cluttered,
            circle_radius: None,
            bounds: Some(Bounds::centered(hw, hh)),
            robots: starts
                .into_iter()
                .zip(goals)
                .map(|(start, goal)| RobotSpec { start, goal })
                .collect(),
            obstacles,
        })
    }
}

/// Samples a scenario of `kind` with default arena settings.
pub fn sample_scenario(kind: ScenarioKind, n_robots: usize, seed: u64) -> Result<Scenario, WorldError> {
    ScenarioSampler::new(kind, n_robots).sample(seed)
}

/// Where episode scenarios come from: drawn per seed, or one fixed layout.
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioSource {
    Sampled(ScenarioSampler),
    Fixed(Scenario),
}

impl ScenarioSource {
    pub fn sample(&self, seed: u64) -> Result<Scenario, WorldError> {
        match self {
            ScenarioSource::Sampled(s) => s.sample(seed),
            ScenarioSource::Fixed(s) => Ok(s.clone()),
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        match self {
            ScenarioSource::Sampled(s) => s.kind,
            ScenarioSource::Fixed(s) => s.kind,
        }
    }
}

impl From<ScenarioSampler> for ScenarioSource {
    fn from(s: ScenarioSampler) -> Self {
        ScenarioSource::Sampled(s)
    }
}

impl From<Scenario> for ScenarioSource {
    fn from(s: Scenario) -> Self {
        ScenarioSource::Fixed(s)
    }
}
