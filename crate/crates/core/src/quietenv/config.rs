//! Experiment configuration: every observation, reward, curriculum and
//! randomisation constant lives here so ablations are config-only edits.

use serde::{Deserialize, Serialize};

use crate::rigidsim::{ContactParams, GainSchedule};

use super::reward::RewardScales;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    /// JSON path of the offending field (`.` for the document root).
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    pub fn min(&self) -> f64 {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.1
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.0 + self.1)
    }

    fn check(&self, path: &str) -> Result<(), ConfigError> {
        if !self.0.is_finite() || !self.1.is_finite() {
            return Err(ConfigError::new(path, "range bounds must be finite"));
        }
        if self.0 > self.1 {
            return Err(ConfigError::new(path, format!("min {} exceeds max {}", self.0, self.1)));
        }
        Ok(())
    }
}

/// Half-widths of the uniform observation noise per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseLevels {
    /// rad
    pub joint_positions: f64,
    /// rad/s
    pub joint_velocities: f64,
    pub last_joint_targets: f64,
    pub last_gain_scales: f64,
    pub foot_contacts: f64,
    pub gravity_orientation: f64,
    pub commands: f64,
    /// rad/s
    pub gyro: f64,
}

impl Default for NoiseLevels {
    fn default() -> Self {
        NoiseLevels {
            joint_positions: 0.01,
            joint_velocities: 1.5,
            last_joint_targets: 0.0,
            last_gain_scales: 0.0,
            foot_contacts: 0.0,
            gravity_orientation: 0.05,
            commands: 0.0,
            gyro: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommandRanges {
    /// m/s
    pub lin_vel_x: Range,
    /// m/s
    pub lin_vel_y: Range,
    /// rad/s
    pub ang_vel_z: Range,
}

impl Default for CommandRanges {
    fn default() -> Self {
        CommandRanges { lin_vel_x: Range(-0.15, 0.30), lin_vel_y: Range(-0.10, 0.10), ang_vel_z: Range(-0.6, 0.6) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Noisy,
    Quiet,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Noisy => "noisy",
            Phase::Quiet => "quiet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    /// When false the phase never changes from `initial_phase`.
    pub enabled: bool,
    pub initial_phase: Phase,
    /// Episodic tracking score the running mean must exceed.
    pub threshold: f64,
    /// Number of most recent completed episodes in the running mean.
    pub window: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig { enabled: true, initial_phase: Phase::Noisy, threshold: 1.5, window: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizationConfig {
    /// kg
    pub base_mass_delta: Range,
    /// m/s per axis, drawn at every disturbance tick
    pub velocity_disturbance: Range,
    /// Magnitude, N
    pub external_force: Range,
    /// Magnitude, N·m
    pub external_torque: Range,
    /// Rough-terrain amplitude, m
    pub terrain_height: Range,
    pub friction: Range,
    /// s
    pub disturbance_period: f64,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        RandomizationConfig {
            base_mass_delta: Range(-0.4, 0.4),
            velocity_disturbance: Range(-0.2, 0.2),
            external_force: Range(0.0, 0.4),
            external_torque: Range(0.0, 0.1),
            terrain_height: Range(0.002, 0.01),
            friction: Range(0.4, 0.7),
            disturbance_period: 4.0,
        }
    }
}

impl RandomizationConfig {
    /// Every range collapsed to a point (zero-width DR) at its lower bound.
    pub fn disabled() -> Self {
        RandomizationConfig {
            base_mass_delta: Range(0.0, 0.0),
            velocity_disturbance: Range(0.0, 0.0),
            external_force: Range(0.0, 0.0),
            external_torque: Range(0.0, 0.0),
            terrain_height: Range(0.0, 0.0),
            friction: Range(0.6, 0.6),
            disturbance_period: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactVelocityMode {
    /// Squared speed of feet touching down this step.
    Touchdown,
    /// Squared speed of every foot in contact, every step.
    Continuous,
}

/// Scalarisation of the reward breakdown for learning. Reported returns always use the plain sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrainingReward {
    /// Plain sum of all terms.
    Sum,
    /// `max(sum, 0)`.
    ClipPositive,
    /// `positive_part * exp(negative_part / sigma)`: never negative, and penalties
    /// keep a gradient even when they dominate.
    ExpPenalty { sigma: f64 },
}

impl Default for TrainingReward {
    fn default() -> Self {
        TrainingReward::Sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminationConfig {
    /// rad
    pub max_roll_pitch: f64,
    pub trunk_contact: bool,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        TerminationConfig { max_roll_pitch: 1.0, trunk_contact: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainConfig {
    /// m
    pub cell_size: f64,
    /// Half side of the square height-field patch around the spawn point, m.
    pub half_size: f64,
    /// When set, use an inclined plane of this angle (rad) instead of rough ground.
    pub slope_angle: Option<f64>,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        TerrainConfig { cell_size: 0.08, half_size: 6.0, slope_angle: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// s
    pub control_dt: f64,
    pub sim_substeps: usize,
    /// s
    pub sim_dt: f64,
    /// s
    pub episode_length: f64,
    pub noise: NoiseLevels,
    pub include_gyro_observation: bool,
    /// Zero the foot-contact entries of the observation (sensor ablation).
    pub mask_foot_contacts: bool,
    pub commands: CommandRanges,
    /// rad per unit action
    pub action_scale: f64,
    pub action_clip: f64,
    pub gain_clip: f64,
    /// When false the gain inputs are pinned to `fixed_gain_input`.
    pub gain_action_enabled: bool,
    pub fixed_gain_input: f64,
    pub gains: GainSchedule,
    /// Uniform half-width of the joint perturbation at reset, rad.
    pub init_joint_noise: f64,
    /// Draw a uniform heading at reset; off gives yaw 0 (slope sweeps).
    pub random_initial_yaw: bool,
    pub rewards: RewardScales,
    pub air_time_target: f64,
    pub tracking_sigma: f64,
    pub contact_velocity_mode: ContactVelocityMode,
    /// How the per-term breakdown is turned into the scalar the learner sees.
    pub training_reward: TrainingReward,
    /// Subtracted from the learner reward when an episode ends in a fall
    /// (not on timeout), so that ending early is never a way out of penalties.
    pub termination_penalty: f64,
    pub curriculum: CurriculumConfig,
    pub randomization: RandomizationConfig,
    pub termination: TerminationConfig,
    pub terrain: TerrainConfig,
    pub physics: ContactParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            control_dt: 0.01,
            sim_substeps: 4,
            sim_dt: 0.0025,
            episode_length: 20.0,
            noise: NoiseLevels::default(),
            include_gyro_observation: true,
            mask_foot_contacts: false,
            commands: CommandRanges::default(),
            action_scale: 0.25,
            action_clip: 4.0,
            gain_clip: 6.0,
            gain_action_enabled: true,
            fixed_gain_input: 0.0,
            gains: GainSchedule::default(),
            init_joint_noise: 0.05,
            random_initial_yaw: true,
            rewards: RewardScales::default(),
            air_time_target: 0.2,
            tracking_sigma: 0.06,
            contact_velocity_mode: ContactVelocityMode::Touchdown,
            training_reward: TrainingReward::default(),
            termination_penalty: 20.0,
            curriculum: CurriculumConfig::default(),
            randomization: RandomizationConfig::default(),
            termination: TerminationConfig::default(),
            terrain: TerrainConfig::default(),
            physics: ContactParams::default(),
        }
    }
}

impl EnvConfig {
    /// Parse a JSON document, filling omitted fields with defaults. Empty input yields the defaults.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let text = if text.trim().is_empty() { "{}" } else { text };
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: EnvConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |v: f64, path: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(path, format!("must be > 0, got {v}")))
            }
        };
        positive(self.control_dt, "control_dt")?;
        positive(self.sim_dt, "sim_dt")?;
        positive(self.episode_length, "episode_length")?;
        positive(self.action_scale, "action_scale")?;
        positive(self.action_clip, "action_clip")?;
        if !(self.termination_penalty >= 0.0 && self.termination_penalty.is_finite()) {
            return Err(ConfigError::new("termination_penalty", "must be finite and >= 0"));
        }
        if let TrainingReward::ExpPenalty { sigma } = self.training_reward {
            positive(sigma, "training_reward.sigma")?;
        }
        positive(self.gain_clip, "gain_clip")?;
        positive(self.tracking_sigma, "tracking_sigma")?;
        positive(self.randomization.disturbance_period, "randomization.disturbance_period")?;
        positive(self.terrain.cell_size, "terrain.cell_size")?;
        positive(self.terrain.half_size, "terrain.half_size")?;
        if !(self.init_joint_noise >= 0.0) {
            return Err(ConfigError::new("init_joint_noise", "must be >= 0"));
        }
        if self.sim_substeps == 0 {
            return Err(ConfigError::new("sim_substeps", "must be >= 1"));
        }
        if (self.sim_substeps as f64 * self.sim_dt - self.control_dt).abs() > 1e-12 {
            return Err(ConfigError::new(
                "sim_dt",
                format!("sim_substeps * sim_dt = {} must equal control_dt = {}", self.sim_substeps as f64 * self.sim_dt, self.control_dt),
            ));
        }
        let n = &self.noise;
        for (v, name) in [
            (n.joint_positions, "joint_positions"),
            (n.joint_velocities, "joint_velocities"),
            (n.last_joint_targets, "last_joint_targets"),
            (n.last_gain_scales, "last_gain_scales"),
            (n.foot_contacts, "foot_contacts"),
            (n.gravity_orientation, "gravity_orientation"),
            (n.commands, "commands"),
            (n.gyro, "gyro"),
        ] {
            if !(v >= 0.0) {
                return Err(ConfigError::new(format!("noise.{name}"), "noise level must be >= 0"));
            }
        }
        self.commands.lin_vel_x.check("commands.lin_vel_x")?;
        self.commands.lin_vel_y.check("commands.lin_vel_y")?;
        self.commands.ang_vel_z.check("commands.ang_vel_z")?;
        let r = &self.randomization;
        r.base_mass_delta.check("randomization.base_mass_delta")?;
        r.velocity_disturbance.check("randomization.velocity_disturbance")?;
        r.external_force.check("randomization.external_force")?;
        r.external_torque.check("randomization.external_torque")?;
        r.terrain_height.check("randomization.terrain_height")?;
        r.friction.check("randomization.friction")?;
        if r.friction.min() <= 0.0 {
            return Err(ConfigError::new("randomization.friction", "friction must be > 0"));
        }
        if r.external_force.min() < 0.0 || r.external_torque.min() < 0.0 || r.terrain_height.min() < 0.0 {
            return Err(ConfigError::new("randomization", "force, torque and terrain magnitudes must be >= 0"));
        }
        if let Some(a) = self.terrain.slope_angle {
            if !a.is_finite() || a.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(ConfigError::new("terrain.slope_angle", "must be finite and below 90 degrees"));
            }
        }
        if self.curriculum.window == 0 {
            return Err(ConfigError::new("curriculum.window", "must be >= 1"));
        }
        self.rewards.validate()?;
        Ok(())
    }

    pub fn control_steps_per_episode(&self) -> usize {
        (self.episode_length / self.control_dt).round() as usize
    }

    /// Observation length: 58, or 61 with the gyro block.
    pub fn observation_dim(&self) -> usize {
        super::observation::BASE_OBSERVATION_DIM + if self.include_gyro_observation { 3 } else { 0 }
    }
}
