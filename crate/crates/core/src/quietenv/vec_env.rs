//! Batch of independent environments stepped in lockstep.
//!
//! Each environment owns a ChaCha8 stream derived from the master seed and its
//! index, so results do not depend on how many worker threads run the batch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::rigidsim::{RobotModel, NUM_LEGS};

use super::config::{EnvConfig, Phase};
use super::env::{reset, step_env, DoneReason, EnvError, Episode, StepInfo};
use super::reward::NUM_REWARD_TERMS;

/// Summary of an episode that just ended.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedEpisode {
    pub env_index: usize,
    pub reason: DoneReason,
    pub steps: usize,
    pub total_reward: f64,
    /// Per-term sums of scaled rewards.
    pub terms: [f64; NUM_REWARD_TERMS],
    pub tracking_score: f64,
    pub touchdown_speed_sum: f64,
    pub touchdowns: usize,
    /// The episode began part-way through (staggered start), so its score covers less than a full episode.
    pub partial: bool,
}

#[derive(Debug, Clone)]
struct Accumulator {
    total: f64,
    terms: [f64; NUM_REWARD_TERMS],
    touchdown_speed_sum: f64,
    touchdowns: usize,
}

impl Accumulator {
    fn new() -> Self {
        Accumulator { total: 0.0, terms: [0.0; NUM_REWARD_TERMS], touchdown_speed_sum: 0.0, touchdowns: 0 }
    }
}

struct Slot {
    episode: Episode,
    observation: Vec<f64>,
    rng: ChaCha8Rng,
    acc: Accumulator,
    partial: bool,
}

/// Result of stepping every environment once. Observations are row-major, one row per env.
#[derive(Debug, Clone)]
pub struct VecStep {
    pub observations: Vec<f64>,
    /// Learner rewards, see `EnvConfig::training_reward`.
    pub rewards: Vec<f64>,
    pub dones: Vec<Option<DoneReason>>,
    /// Pre-reset observation of environments that hit the time limit, for bootstrapping.
    pub truncated_observations: Vec<(usize, Vec<f64>)>,
    pub completed: Vec<CompletedEpisode>,
}

pub struct VecEnv {
    config: EnvConfig,
    nominal: RobotModel,
    phase: Phase,
    slots: Vec<Slot>,
    pool: rayon::ThreadPool,
}

/// Worker count from `QUIETGAIT_THREADS`, falling back to the rayon default.
pub fn worker_threads() -> usize {
    std::env::var("QUIETGAIT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

impl VecEnv {
    pub fn new(config: EnvConfig, nominal: RobotModel, n_envs: usize, seed: u64) -> Self {
        let phase = config.curriculum.initial_phase;
        let slots = (0..n_envs)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let (mut episode, obs) = reset(&config, &nominal, phase, &mut rng);
                // stagger episode progress so timeouts do not arrive in lockstep
                let offset = rng.random_range(0..config.control_steps_per_episode().max(1));
                episode.episode.steps = offset;
                episode.episode.elapsed = offset as f64 * config.control_dt;
                Slot { episode, observation: obs.0, rng, acc: Accumulator::new(), partial: offset > 0 }
            })
            .collect();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(worker_threads()).build().expect("thread pool");
        VecEnv { config, nominal, phase, slots, pool }
    }

    pub fn num_envs(&self) -> usize {
        self.slots.len()
    }

    pub fn observation_dim(&self) -> usize {
        self.config.observation_dim()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Switch every running and future episode to `phase`.
    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
        for s in &mut self.slots {
            s.episode.episode.phase = phase;
        }
    }

    pub fn observations(&self) -> Vec<f64> {
        self.slots.iter().flat_map(|s| s.observation.iter().copied()).collect()
    }

    pub fn episode(&self, index: usize) -> &Episode {
        &self.slots[index].episode
    }

    /// Step all environments with row-major `actions` (`num_envs x 24`). Finished
    /// environments are reset immediately and report their fresh observation.
    pub fn step(&mut self, actions: &[f64], action_dim: usize) -> Result<VecStep, EnvError> {
        assert_eq!(actions.len(), self.slots.len() * action_dim, "action batch shape");
        let config = &self.config;
        let nominal = &self.nominal;
        let phase = self.phase;
        let slots = &mut self.slots;
        let results: Vec<Result<(f64, Option<DoneReason>, Option<Vec<f64>>, Option<CompletedEpisode>), EnvError>> =
            self.pool.install(|| {
                slots
                    .par_iter_mut()
                    .zip(actions.par_chunks(action_dim))
                    .enumerate()
                    .map(|(i, (slot, action))| step_slot(config, nominal, phase, i, slot, action))
                    .collect()
            });
        let mut out = VecStep {
            observations: Vec::with_capacity(self.slots.len() * self.config.observation_dim()),
            rewards: Vec::with_capacity(self.slots.len()),
            dones: Vec::with_capacity(self.slots.len()),
            truncated_observations: vec![],
            completed: vec![],
        };
        for (i, r) in results.into_iter().enumerate() {
            let (reward, done, truncated, completed) = r?;
            out.rewards.push(reward);
            out.dones.push(done);
            if let Some(obs) = truncated {
                out.truncated_observations.push((i, obs));
            }
            if let Some(c) = completed {
                out.completed.push(c);
            }
            out.observations.extend_from_slice(&self.slots[i].observation);
        }
        Ok(out)
    }
}

type SlotResult = (f64, Option<DoneReason>, Option<Vec<f64>>, Option<CompletedEpisode>);

fn step_slot(
    config: &EnvConfig,
    nominal: &RobotModel,
    phase: Phase,
    index: usize,
    slot: &mut Slot,
    action: &[f64],
) -> Result<SlotResult, EnvError> {
    let outcome = step_env(config, &mut slot.episode, action, &mut slot.rng)?;
    slot.acc.total += outcome.reward.total();
    let reward = outcome.reward.training(config.training_reward);
    for (a, t) in slot.acc.terms.iter_mut().zip(outcome.reward.terms) {
        *a += t;
    }
    record_touchdowns(&mut slot.acc, &outcome.info);
    let Some(reason) = outcome.done else {
        slot.observation = outcome.observation.0;
        return Ok((reward, None, None, None));
    };
    let completed = CompletedEpisode {
        env_index: index,
        reason,
        steps: slot.episode.episode.steps,
        total_reward: slot.acc.total,
        terms: slot.acc.terms,
        tracking_score: slot.episode.episode.tracking_score,
        touchdown_speed_sum: slot.acc.touchdown_speed_sum,
        touchdowns: slot.acc.touchdowns,
        partial: slot.partial,
    };
    let truncated = reason.is_truncation().then(|| outcome.observation.0.clone());
    let reward = if reason.is_truncation() { reward } else { reward - config.termination_penalty };
    let (episode, obs) = reset(config, nominal, phase, &mut slot.rng);
    slot.episode = episode;
    slot.observation = obs.0;
    slot.acc = Accumulator::new();
    slot.partial = false;
    Ok((reward, Some(reason), truncated, Some(completed)))
}

fn record_touchdowns(acc: &mut Accumulator, info: &StepInfo) {
    for leg in 0..NUM_LEGS {
        let f = &info.contact.feet[leg];
        if f.touchdown {
            acc.touchdown_speed_sum += f.touchdown_speed;
            acc.touchdowns += 1;
        }
    }
}
