//! Vectorised locomotion environment: observations, the fourteen reward terms,
//! the two-phase curriculum, domain randomisation and termination.

mod config;
mod curriculum;
mod env;
mod observation;
mod randomize;
mod reward;
mod vec_env;

pub use config::{
    CommandRanges, ConfigError, ContactVelocityMode, CurriculumConfig, EnvConfig, NoiseLevels, Phase, TrainingReward,
    RandomizationConfig, Range, TerminationConfig, TerrainConfig,
};
pub use curriculum::{curriculum_update, CurriculumLatch};
pub use env::{
    apply_action, reset, step_env, trunk_touches_ground, DoneReason, EnvError, Episode, EpisodeState, StepInfo,
    StepOutcome, ACTION_DIM,
};
pub use observation::{layout, observe, Observation, BASE_OBSERVATION_DIM};
pub use randomize::{randomize, sample_command, sample_disturbance, DrSample};
pub use reward::{compute_rewards, raw_terms, PhaseScales, RewardBreakdown, RewardScales, RewardTerm, NUM_REWARD_TERMS};
pub use vec_env::{worker_threads, CompletedEpisode, VecEnv, VecStep};
