//! The fourteen reward terms and their per-phase scales.
//!
//! Every term is multiplied by the scale of the active phase and by the
//! control period, so a tracking term contributes at most `scale * dt` per step.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::rigidsim::{foot_kinematics, gravity_orientation, ContactReport, RobotModel, SimState, NUM_JOINTS, NUM_LEGS};

use super::config::{ConfigError, ContactVelocityMode, EnvConfig, Phase, TrainingReward};
use super::env::EpisodeState;

pub const NUM_REWARD_TERMS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardTerm {
    LinVelTracking,
    AngVelTracking,
    JointTorque,
    BaseLinVelZ,
    BaseOrientation,
    BaseAngVel,
    FootSlip,
    SelfCollision,
    FootAirTime,
    JointTargetDiff,
    GainScaleDiff,
    FootContactVelocity,
    JointAccel,
    BaseAngAccel,
}

impl RewardTerm {
    pub const ALL: [RewardTerm; NUM_REWARD_TERMS] = [
        RewardTerm::LinVelTracking,
        RewardTerm::AngVelTracking,
        RewardTerm::JointTorque,
        RewardTerm::BaseLinVelZ,
        RewardTerm::BaseOrientation,
        RewardTerm::BaseAngVel,
        RewardTerm::FootSlip,
        RewardTerm::SelfCollision,
        RewardTerm::FootAirTime,
        RewardTerm::JointTargetDiff,
        RewardTerm::GainScaleDiff,
        RewardTerm::FootContactVelocity,
        RewardTerm::JointAccel,
        RewardTerm::BaseAngAccel,
    ];

    /// The three terms that target footstep noise.
    pub const NOISE_PENALTIES: [RewardTerm; 3] =
        [RewardTerm::FootContactVelocity, RewardTerm::JointAccel, RewardTerm::BaseAngAccel];

    pub fn name(&self) -> &'static str {
        match self {
            RewardTerm::LinVelTracking => "lin_vel_tracking",
            RewardTerm::AngVelTracking => "ang_vel_tracking",
            RewardTerm::JointTorque => "joint_torque",
            RewardTerm::BaseLinVelZ => "base_lin_vel_z",
            RewardTerm::BaseOrientation => "base_orientation",
            RewardTerm::BaseAngVel => "base_ang_vel",
            RewardTerm::FootSlip => "foot_slip",
            RewardTerm::SelfCollision => "self_collision",
            RewardTerm::FootAirTime => "foot_air_time",
            RewardTerm::JointTargetDiff => "joint_target_diff",
            RewardTerm::GainScaleDiff => "gain_scale_diff",
            RewardTerm::FootContactVelocity => "foot_contact_velocity",
            RewardTerm::JointAccel => "joint_accel",
            RewardTerm::BaseAngAccel => "base_ang_accel",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

/// Scale of every term for one curriculum phase. All fields are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseScales {
    pub lin_vel_tracking: f64,
    pub ang_vel_tracking: f64,
    pub joint_torque: f64,
    pub base_lin_vel_z: f64,
    pub base_orientation: f64,
    pub base_ang_vel: f64,
    pub foot_slip: f64,
    pub self_collision: f64,
    pub foot_air_time: f64,
    pub joint_target_diff: f64,
    pub gain_scale_diff: f64,
    pub foot_contact_velocity: f64,
    pub joint_accel: f64,
    pub base_ang_accel: f64,
}

impl PhaseScales {
    pub fn noisy() -> Self {
        PhaseScales {
            lin_vel_tracking: 1.0,
            ang_vel_tracking: 1.0,
            joint_torque: -0.015,
            base_lin_vel_z: -3.0,
            base_orientation: -5.0,
            base_ang_vel: -0.05,
            foot_slip: -0.15,
            self_collision: -10.0,
            foot_air_time: 2.0,
            joint_target_diff: -0.02,
            gain_scale_diff: -0.005,
            foot_contact_velocity: -5.0,
            joint_accel: -2e-7,
            base_ang_accel: -5e-5,
        }
    }

    pub fn quiet() -> Self {
        PhaseScales { foot_contact_velocity: -25.0, joint_accel: -4e-7, base_ang_accel: -1e-4, ..PhaseScales::noisy() }
    }

    pub fn get(&self, term: RewardTerm) -> f64 {
        self.as_array()[term.index()]
    }

    pub fn set(&mut self, term: RewardTerm, value: f64) {
        let slot = match term {
            RewardTerm::LinVelTracking => &mut self.lin_vel_tracking,
            RewardTerm::AngVelTracking => &mut self.ang_vel_tracking,
            RewardTerm::JointTorque => &mut self.joint_torque,
            RewardTerm::BaseLinVelZ => &mut self.base_lin_vel_z,
            RewardTerm::BaseOrientation => &mut self.base_orientation,
            RewardTerm::BaseAngVel => &mut self.base_ang_vel,
            RewardTerm::FootSlip => &mut self.foot_slip,
            RewardTerm::SelfCollision => &mut self.self_collision,
            RewardTerm::FootAirTime => &mut self.foot_air_time,
            RewardTerm::JointTargetDiff => &mut self.joint_target_diff,
            RewardTerm::GainScaleDiff => &mut self.gain_scale_diff,
            RewardTerm::FootContactVelocity => &mut self.foot_contact_velocity,
            RewardTerm::JointAccel => &mut self.joint_accel,
            RewardTerm::BaseAngAccel => &mut self.base_ang_accel,
        };
        *slot = value;
    }

    pub fn as_array(&self) -> [f64; NUM_REWARD_TERMS] {
        [
            self.lin_vel_tracking,
            self.ang_vel_tracking,
            self.joint_torque,
            self.base_lin_vel_z,
            self.base_orientation,
            self.base_ang_vel,
            self.foot_slip,
            self.self_collision,
            self.foot_air_time,
            self.joint_target_diff,
            self.gain_scale_diff,
            self.foot_contact_velocity,
            self.joint_accel,
            self.base_ang_accel,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardScales {
    pub noisy: PhaseScales,
    pub quiet: PhaseScales,
}

impl Default for RewardScales {
    fn default() -> Self {
        RewardScales { noisy: PhaseScales::noisy(), quiet: PhaseScales::quiet() }
    }
}

impl RewardScales {
    pub fn for_phase(&self, phase: Phase) -> &PhaseScales {
        match phase {
            Phase::Noisy => &self.noisy,
            Phase::Quiet => &self.quiet,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), ConfigError> {
        for (phase, scales) in [("noisy", &self.noisy), ("quiet", &self.quiet)] {
            for term in RewardTerm::ALL {
                if !scales.get(term).is_finite() {
                    return Err(ConfigError::new(format!("rewards.{phase}.{}", term.name()), "scale must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// Scaled per-step contribution of every term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub terms: [f64; NUM_REWARD_TERMS],
}

impl RewardBreakdown {
    pub fn get(&self, term: RewardTerm) -> f64 {
        self.terms[term.index()]
    }

    pub fn total(&self) -> f64 {
        self.terms.iter().sum()
    }

    pub fn tracking(&self) -> f64 {
        self.get(RewardTerm::LinVelTracking) + self.get(RewardTerm::AngVelTracking)
    }

    /// Scalar reward fed to the learner.
    pub fn training(&self, mode: TrainingReward) -> f64 {
        match mode {
            TrainingReward::Sum => self.total(),
            TrainingReward::ClipPositive => self.total().max(0.0),
            TrainingReward::ExpPenalty { sigma } => {
                let pos: f64 = self.terms.iter().filter(|t| **t > 0.0).sum();
                let neg: f64 = self.terms.iter().filter(|t| **t < 0.0).sum();
                pos * (neg / sigma).exp()
            }
        }
    }
}

/// Unscaled value of every term.
pub fn raw_terms(
    config: &EnvConfig,
    model: &RobotModel,
    state: &SimState,
    state_prev: &SimState,
    contact: &ContactReport,
    episode: &EpisodeState,
    tau: &[f64; NUM_JOINTS],
) -> [f64; NUM_REWARD_TERMS] {
    let dt = config.control_dt;
    let v_body = state.base_linear_velocity_body();
    let omega = state.base_angular_velocity;
    let [cmd_x, cmd_y, cmd_yaw] = episode.command;
    let lin_err = (cmd_x - v_body.x).powi(2) + (cmd_y - v_body.y).powi(2);
    let ang_err = (cmd_yaw - omega.z).powi(2);
    let gravity = gravity_orientation(state);
    let feet = foot_kinematics(model, state);

    let mut slip = 0.0;
    let mut contact_velocity = 0.0;
    let mut air_time = 0.0;
    for leg in 0..NUM_LEGS {
        let fc = &contact.feet[leg];
        let v = feet[leg].velocity;
        if fc.in_contact {
            slip += v.x * v.x + v.y * v.y;
        }
        if fc.touchdown {
            air_time += fc.air_time - config.air_time_target;
        }
        contact_velocity += match config.contact_velocity_mode {
            ContactVelocityMode::Touchdown if fc.touchdown => fc.touchdown_speed.powi(2),
            ContactVelocityMode::Continuous if fc.in_contact => v.norm_squared(),
            _ => 0.0,
        };
    }

    let sq_diff = |a: &[f64; NUM_JOINTS], b: &[f64; NUM_JOINTS]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let joint_accel: f64 =
        (0..NUM_JOINTS).map(|j| ((state.joint_velocities[j] - state_prev.joint_velocities[j]) / dt).powi(2)).sum();
    let ang_accel: Vector3<f64> = (state.base_angular_velocity - state_prev.base_angular_velocity) / dt;

    [
        (-lin_err / config.tracking_sigma).exp(),
        (-ang_err / config.tracking_sigma).exp(),
        tau.iter().map(|t| t * t).sum(),
        v_body.z * v_body.z,
        gravity.x * gravity.x + gravity.y * gravity.y,
        omega.x * omega.x + omega.y * omega.y,
        slip,
        contact.self_collision_count as f64,
        air_time,
        sq_diff(&episode.prev_joint_targets, &episode.joint_targets),
        sq_diff(&episode.prev_gain_inputs, &episode.gain_inputs),
        contact_velocity,
        joint_accel,
        ang_accel.x * ang_accel.x + ang_accel.y * ang_accel.y,
    ]
}

#[allow(clippy::too_many_arguments)]
pub fn compute_rewards(
    config: &EnvConfig,
    phase: Phase,
    model: &RobotModel,
    state: &SimState,
    state_prev: &SimState,
    contact: &ContactReport,
    episode: &EpisodeState,
    tau: &[f64; NUM_JOINTS],
) -> RewardBreakdown {
    let raw = raw_terms(config, model, state, state_prev, contact, episode, tau);
    let scales = config.rewards.for_phase(phase).as_array();
    let mut terms = [0.0; NUM_REWARD_TERMS];
    for k in 0..NUM_REWARD_TERMS {
        terms[k] = raw[k] * scales[k] * config.control_dt;
    }
    RewardBreakdown { terms }
}
