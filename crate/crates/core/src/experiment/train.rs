//! PPO training driver: rollout collection, curriculum latch, metrics and checkpoints.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ppolearn::{ppo_update, sample_action, Checkpoint, Optimizer, PolicyParams, PpoError, RolloutBuffer};
use crate::quietenv::{curriculum_update, CompletedEpisode, CurriculumLatch, EnvError, Phase, VecEnv, ACTION_DIM, NUM_REWARD_TERMS};

use super::metrics::MetricsRow;
use super::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Ppo(#[from] PpoError),
}

/// Window of recent episodes used for reporting.
const REPORT_WINDOW: usize = 100;

pub struct Trainer {
    pub config: RunConfig,
    pub params: PolicyParams,
    pub optimizer: Optimizer,
    pub latch: CurriculumLatch,
    pub iteration: usize,
    /// Iteration after which the phase flipped to quiet, if it has.
    pub phase_flip_iteration: Option<usize>,
    env: VecEnv,
    rng: ChaCha8Rng,
    recent: VecDeque<CompletedEpisode>,
}

impl Trainer {
    pub fn new(config: RunConfig, n_envs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let env = VecEnv::new(config.env.clone(), config.robot.clone(), n_envs, seed);
        let params = PolicyParams::new(env.observation_dim(), ACTION_DIM, &config.ppo.hidden, config.ppo.init_std, &mut rng);
        let optimizer = Optimizer::new(&params, &config.ppo);
        let latch = CurriculumLatch::new(&config.env.curriculum);
        Trainer {
            config,
            params,
            optimizer,
            latch,
            iteration: 0,
            phase_flip_iteration: None,
            env,
            rng,
            recent: VecDeque::with_capacity(REPORT_WINDOW),
        }
    }

    pub fn phase(&self) -> Phase {
        self.latch.phase()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(&self.params, &self.config.env, &self.config.ppo, self.iteration, self.phase())
    }

    /// Collect one rollout, update the policy and the curriculum latch.
    pub fn iterate(&mut self) -> Result<MetricsRow, TrainError> {
        let n_envs = self.env.num_envs();
        let steps = self.config.ppo.rollout_length;
        let d = self.env.observation_dim();
        let gamma = self.config.ppo.gamma;
        let mut buf = RolloutBuffer::new(n_envs, steps, d, ACTION_DIM);
        buf.log_std = self.params.log_std.iter().copied().collect();
        let mut completed = vec![];

        let mut raw_obs = self.env.observations();
        for _ in 0..steps {
            self.params.normalizer.update(&raw_obs);
            let obs = self.params.normalizer.normalize(&raw_obs);
            let (means, values) = self.params.forward(&obs);
            let mut actions = Vec::with_capacity(n_envs * ACTION_DIM);
            for e in 0..n_envs {
                let (a, lp) = sample_action(&buf.log_std, means.column(e).as_slice(), &mut self.rng);
                actions.extend_from_slice(&a);
                buf.log_probs.push(lp);
            }
            let out = self.env.step(&actions, ACTION_DIM)?;
            let mut rewards = out.rewards;
            for (e, final_obs) in &out.truncated_observations {
                let x = self.params.normalizer.normalize(final_obs);
                let (_, v) = self.params.forward(&x);
                rewards[*e] += gamma * v[0];
            }
            buf.observations.extend_from_slice(obs.as_slice());
            buf.actions.extend_from_slice(&actions);
            buf.action_means.extend_from_slice(means.as_slice());
            buf.values.extend(values.iter().copied());
            buf.rewards.extend(rewards);
            buf.dones.extend(out.dones.iter().map(|d| d.is_some()));
            completed.extend(out.completed);
            raw_obs = out.observations;
        }
        let last = self.params.normalizer.normalize(&raw_obs);
        buf.bootstrap = self.params.forward(&last).1.iter().copied().collect();

        let stats = ppo_update(&mut self.params, &mut self.optimizer, &buf, &self.config.ppo, &mut self.rng)?;

        let scores: Vec<f64> = completed.iter().filter(|c| !c.partial).map(|c| c.tracking_score).collect();
        let before = self.latch.phase();
        let phase = curriculum_update(&mut self.latch, &scores);
        if phase != before {
            self.env.set_phase(phase);
            self.phase_flip_iteration = Some(self.iteration);
        }
        let n_completed = completed.len();
        for c in completed {
            if self.recent.len() == REPORT_WINDOW {
                self.recent.pop_front();
            }
            self.recent.push_back(c);
        }
        let row = self.metrics_row(stats, n_completed);
        self.iteration += 1;
        Ok(row)
    }

    fn metrics_row(&self, stats: crate::ppolearn::UpdateStats, completed: usize) -> MetricsRow {
        let n = self.recent.len() as f64;
        let mean = |f: &dyn Fn(&CompletedEpisode) -> f64| {
            if n == 0.0 {
                f64::NAN
            } else {
                self.recent.iter().map(f).sum::<f64>() / n
            }
        };
        let mut terms = [f64::NAN; NUM_REWARD_TERMS];
        for (k, t) in terms.iter_mut().enumerate() {
            *t = mean(&|c| c.terms[k]);
        }
        let touchdowns: usize = self.recent.iter().map(|c| c.touchdowns).sum();
        let speed_sum: f64 = self.recent.iter().map(|c| c.touchdown_speed_sum).sum();
        let full: Vec<f64> = self.recent.iter().filter(|c| !c.partial).map(|c| c.tracking_score).collect();
        MetricsRow {
            iteration: self.iteration,
            terms,
            mean_return: mean(&|c| c.total_reward),
            tracking_score: if full.is_empty() { f64::NAN } else { full.iter().sum::<f64>() / full.len() as f64 },
            phase: self.latch.phase(),
            mean_touchdown_speed: if touchdowns == 0 { f64::NAN } else { speed_sum / touchdowns as f64 },
            mean_episode_length: mean(&|c| c.steps as f64 * self.config.env.control_dt),
            learning_rate: stats.learning_rate,
            approx_kl: stats.approx_kl,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            completed_episodes: completed,
        }
    }
}

/// Normalise and evaluate the deterministic (mean) action for a row-major batch.
pub fn mean_actions(params: &PolicyParams, raw_obs: &[f64]) -> DMatrix<f64> {
    let obs = params.normalizer.normalize(raw_obs);
    params.forward(&obs).0
}
