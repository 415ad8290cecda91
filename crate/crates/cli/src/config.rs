//! Run configuration: built-in defaults, overridden by a TOML file, overridden by flags.
//!
//! ```toml
//! seed = 7
//! scenario = "circle4"        # preset name or path to a scenario TOML
//! robots = 4                  # robot count for presets
//! planner = "rpf_attention"   # network trained by `train`
//! checkpoint_every = 100
//!
//! [sampler]                   # preset overrides
//! circle_radius = 2.0
//!
//! [world]                     # WorldConfig fields
//! [apf]                       # ApfConfig fields
//! [ppo]                       # PpoConfig fields
//! [network]
//! embed_dim = 64
//! hidden = [256, 256]
//! init_std = 0.1             # initial policy std as a fraction of each action half-range
//!
//! [eval]
//! planners = ["rpf_attention", "vanilla_apf"]
//! seeds = 20
//! seed_start = 1000000
//! checkpoints = { rpf_attention = "runs/train/checkpoint.rpfc" }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use rpf_core::eval::{PlannerKind, STEER_BOUND};
use rpf_core::policy::{NetArch, Pooling};
use rpf_core::ppo::PpoConfig;
use rpf_core::{ApfConfig, Scenario, ScenarioKind, ScenarioSampler, ScenarioSource, WorldConfig};

pub const PRESETS: [&str; 5] = ["circle4", "circle6", "circle8", "circle8_wide", "cluttered"];

/// Sampler for a named preset.
pub fn preset(name: &str) -> Option<ScenarioSampler> {
    let s = match name {
        "circle4" => ScenarioSampler::new(ScenarioKind::CircleSwap, 4).with_circle_radius(2.0),
        "circle6" => ScenarioSampler::new(ScenarioKind::CircleSwap, 6).with_circle_radius(2.0),
        "circle8" => ScenarioSampler::new(ScenarioKind::CircleSwap, 8).with_circle_radius(3.0),
        "circle8_wide" => ScenarioSampler::new(ScenarioKind::CircleSwap, 8).with_circle_radius(8.0),
        "cluttered" => ScenarioSampler::new(ScenarioKind::Cluttered, 3).with_obstacles(12, (0.1, 0.5)),
        _ => return None,
    };
    Some(s)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerOverrides {
    pub circle_radius: Option<f64>,
    pub angular_jitter: Option<f64>,
    pub arena_half_size: Option<(f64, f64)>,
    pub n_obstacles: Option<usize>,
    pub obstacle_radius: Option<(f64, f64)>,
    pub obstacle_gap: Option<f64>,
    pub clearance: Option<f64>,
    pub min_start_goal: Option<f64>,
}

impl SamplerOverrides {
    fn apply(&self, s: &mut ScenarioSampler) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { s.$f = v; })* };
        }
        set!(circle_radius, angular_jitter, arena_half_size, n_obstacles, obstacle_radius, obstacle_gap, clearance, min_start_goal);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub embed_dim: usize,
    pub hidden: Vec<usize>,
    pub init_std: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let a = NetArch::default();
        Self { embed_dim: a.embed_dim, hidden: a.hidden, init_std: a.init_std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub planners: Vec<PlannerKind>,
    pub seeds: usize,
    pub seed_start: u64,
    pub checkpoints: BTreeMap<PlannerKind, PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { planners: vec![PlannerKind::VanillaApf], seeds: 20, seed_start: 1_000_000, checkpoints: BTreeMap::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: String,
    pub robots: Option<usize>,
    pub planner: PlannerKind,
    pub checkpoint_every: usize,
    pub sampler: SamplerOverrides,
    pub world: WorldConfig,
    pub apf: ApfConfig,
    pub ppo: PpoConfig,
    pub network: NetworkConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenario: "circle4".into(),
            robots: None,
            planner: PlannerKind::RpfAttention,
            checkpoint_every: 100,
            sampler: SamplerOverrides::default(),
            world: WorldConfig::default(),
            apf: ApfConfig::default(),
            ppo: PpoConfig::default(),
            network: NetworkConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    /// Defaults, or defaults overlaid by the given file.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Resolves `scenario` to a preset sampler or a fixed scenario file.
    pub fn scenarios(&self) -> Result<ScenarioSource> {
        if let Some(mut s) = preset(&self.scenario) {
            self.sampler.apply(&mut s);
            if let Some(n) = self.robots {
                s.n_robots = n;
            }
            s.safe_radius = self.world.safe_radius;
            return Ok(s.into());
        }
        let path = Path::new(&self.scenario);
        if !path.exists() {
            bail!("scenario {:?} is neither a preset ({}) nor an existing file", self.scenario, PRESETS.join(", "));
        }
        if self.robots.is_some() {
            bail!("--robots applies only to presets, not to scenario file {}", path.display());
        }
        let s = Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))?;
        s.validate(self.world.safe_radius).with_context(|| format!("scenario {}", path.display()))?;
        Ok(s.into())
    }

    /// Network shape for the planner being trained.
    pub fn arch(&self) -> Result<NetArch> {
        let base = match self.planner {
            PlannerKind::RpfAttention => NetArch::rpf(Pooling::Attention),
            PlannerKind::RpfMeanEmbed => NetArch::rpf(Pooling::Mean),
            PlannerKind::PpoSteer => NetArch::steering(STEER_BOUND),
            PlannerKind::VanillaApf => bail!("vanilla_apf has no network to train"),
        };
        let arch = NetArch { embed_dim: self.network.embed_dim, hidden: self.network.hidden.clone(), init_std: self.network.init_std, ..base };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.ppo.validate()?;
        if self.checkpoint_every == 0 {
            bail!("checkpoint_every must be at least 1");
        }
        if self.robots == Some(0) {
            bail!("robots must be at least 1");
        }
        if self.apf.influence_range <= 0.0 || !self.apf.influence_range.is_finite() {
            bail!("apf.influence_range must be positive");
        }
        Ok(())
    }
}
