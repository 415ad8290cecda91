//! Episode rollouts with periodic PPO updates.
//!
//! Every active robot queries the shared policy each step, the controller
//! turns the sampled action into a heading, and the world advances. After
//! every `Z` environment steps (counted across episodes) the open
//! per-robot segments are closed with a critic bootstrap, their advantages
//! join the batch, and one update runs on the pooled batch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::apf::ApfConfig;
use crate::control::Controller;
use crate::policy::{encode_observation, init_network, EncodedObservation, NetArch, PolicyParams};
use crate::world::{reward, RobotStatus, ScenarioSource, WorldConfig, WorldState};

use super::adam::Adam;
use super::gae::{compute_gae, standardize, StepSignal};
use super::loss::{update, Sample, UpdateStats};
use super::{lr_schedule, PpoConfig, PpoError};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub robot: usize,
    pub obs: EncodedObservation,
    pub raw_action: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    /// Reached or collided on this step.
    pub done: bool,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSetup {
    pub world: WorldConfig,
    pub scenarios: ScenarioSource,
    pub arch: NetArch,
    pub ppo: PpoConfig,
    pub apf: ApfConfig,
    pub seed: u64,
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Mean over robots of the summed episode reward.
    pub return_mean: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub lr: f64,
    pub steps: usize,
    pub updates: usize,
    /// Stats of the last update run during this episode.
    pub last_update: Option<UpdateStats>,
}

impl EpisodeLog {
    pub const CSV_HEADER: &'static str =
        "episode,return_mean,success_rate,collision_rate,lr,steps,updates,policy_loss,value_loss,entropy,grad_norm";

    pub fn csv_row(&self) -> String {
        let u = |f: fn(&UpdateStats) -> f64| self.last_update.as_ref().map(|s| f(s).to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.return_mean,
            self.success_rate,
            self.collision_rate,
            self.lr,
            self.steps,
            self.updates,
            u(|s| s.loss.policy),
            u(|s| s.loss.value),
            u(|s| s.loss.entropy),
            u(|s| s.grad_norm),
        )
    }
}

/// Scenario seed of a training episode.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (episode as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

pub struct Trainer {
    setup: TrainSetup,
    controller: Controller,
    params: PolicyParams,
    optimizer: Adam,
    rng: ChaCha8Rng,
    episode: usize,
    global_step: u64,
    batch: Vec<Sample>,
}

impl Trainer {
    pub fn new(setup: TrainSetup) -> Result<Self, PpoError> {
        setup.world.validate()?;
        setup.ppo.validate()?;
        let params = init_network(&setup.arch, setup.seed)?;
        Ok(Self::with_params(setup, params))
    }

    /// Starts from given parameters with a fresh optimizer.
    pub fn with_params(setup: TrainSetup, params: PolicyParams) -> Self {
        let controller = Controller::for_arch(&setup.arch, &setup.apf);
        let optimizer = Adam::new(params.tensors());
        let rng = ChaCha8Rng::seed_from_u64(setup.seed ^ 0xA076_1D64_78BD_642F);
        Self { setup, controller, params, optimizer, rng, episode: 0, global_step: 0, batch: Vec::new() }
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    /// Completed episodes.
    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    fn close_segment(&mut self, world: &WorldState, seg: &mut Vec<Transition>) -> Result<(), PpoError> {
        let Some(last) = seg.last() else { return Ok(()) };
        let bootstrap = if last.done {
            0.0
        } else {
            let obs = encode_observation(&world.observe(last.robot), &world.config);
            self.params.evaluate(&obs).1
        };
        let signals: Vec<StepSignal> =
            seg.iter().map(|t| StepSignal { reward: t.reward, value: t.value, done: t.done }).collect();
        let (adv, ret) = compute_gae(&signals, bootstrap, self.setup.ppo.gamma, self.setup.ppo.gae_tau)?;
        for ((t, a), r) in seg.drain(..).zip(adv).zip(ret) {
            self.batch.push(Sample { obs: t.obs, raw_action: t.raw_action, old_log_prob: t.log_prob, advantage: a, ret: r });
        }
        Ok(())
    }

    fn run_update(&mut self, lr: f64) -> Result<UpdateStats, PpoError> {
        let mut adv: Vec<f64> = self.batch.iter().map(|s| s.advantage).collect();
        standardize(&mut adv);
        for (s, a) in self.batch.iter_mut().zip(adv) {
            s.advantage = a;
        }
        let batch = std::mem::take(&mut self.batch);
        update(&mut self.params, &batch, &self.setup.ppo, &mut self.optimizer, lr)
    }

    /// Runs one training episode, updating whenever the step counter hits a multiple of `Z`.
    pub fn run_episode(&mut self) -> Result<EpisodeLog, PpoError> {
        let lr = lr_schedule(self.setup.ppo.lr_initial, self.setup.ppo.lr_decay, self.episode);
        let scenario = self.setup.scenarios.sample(episode_seed(self.setup.seed, self.episode))?;
        let mut world = WorldState::new(self.setup.world.clone(), &scenario)?;
        let n = world.num_robots();
        let mut segments: Vec<Vec<Transition>> = vec![Vec::new(); n];
        let mut returns = vec![0.0; n];
        let mut updates = 0;
        let mut last_update = None;
        let action_box = self.setup.arch.action.clone();

        while !world.all_done() && world.step_count < world.config.max_steps {
            let active: Vec<usize> = world.active_ids().collect();
            let mut commands = vec![None; n];
            let mut staged = Vec::with_capacity(active.len());
            for &id in &active {
                let obs = encode_observation(&world.observe(id), &world.config);
                let (dist, value) = self.params.evaluate(&obs);
                let a = dist.sample(&mut self.rng, &action_box);
                commands[id] = Some(self.controller.direction(&world, id, &a.action)?);
                staged.push((id, obs, a, value));
            }
            let before = world.clone();
            world.step(&commands)?;
            for (id, obs, a, value) in staged {
                let r = reward(&before, &world, id).total;
                returns[id] += r;
                segments[id].push(Transition {
                    robot: id,
                    obs,
                    raw_action: a.raw,
                    action: a.action,
                    log_prob: a.log_prob,
                    reward: r,
                    value,
                    done: world.robots[id].status != RobotStatus::Active,
                    step: before.step_count,
                });
            }
            self.global_step += 1;
            if self.global_step.is_multiple_of(self.setup.ppo.batch_interval as u64) {
                for seg in &mut segments {
                    self.close_segment(&world, seg)?;
                }
                if !self.batch.is_empty() {
                    last_update = Some(self.run_update(lr)?);
                    updates += 1;
                }
            }
        }
        for seg in &mut segments {
            self.close_segment(&world, seg)?;
        }

        let count = |s: RobotStatus| world.robots.iter().filter(|r| r.status == s).count() as f64 / n as f64;
        let log = EpisodeLog {
            episode: self.episode,
            return_mean: returns.iter().sum::<f64>() / n as f64,
            success_rate: count(RobotStatus::Reached),
            collision_rate: count(RobotStatus::Collided),
            lr,
            steps: world.step_count,
            updates,
            last_update,
        };
        self.episode += 1;
        Ok(log)
    }
}

pub struct TrainOutcome {
    pub params: PolicyParams,
    pub optimizer: Adam,
    pub log: Vec<EpisodeLog>,
}

/// Runs `setup.ppo.episodes` episodes, calling `on_episode` after each.
pub fn train(setup: TrainSetup, mut on_episode: impl FnMut(&EpisodeLog, &Trainer)) -> Result<TrainOutcome, PpoError> {
    let episodes = setup.ppo.episodes;
    let mut trainer = Trainer::new(setup)?;
    let mut log = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let row = trainer.run_episode()?;
        on_episode(&row, &trainer);
        log.push(row);
    }
    Ok(TrainOutcome { params: trainer.params, optimizer: trainer.optimizer, log })
}
