//! Single-environment episode logic: reset, action mapping, control step, termination.

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rigidsim::{
    self, apply_velocity_impulse, pd_torques_with, ActuatorCommand, ContactReport, FootContact, RobotModel, SimError,
    SimState, StepOptions, Terrain, NUM_JOINTS, NUM_LEGS,
};

use super::config::{EnvConfig, Phase};
use super::observation::{observe, Observation};
use super::randomize::{randomize, sample_command, sample_disturbance, DrSample};
use super::reward::{compute_rewards, RewardBreakdown};

/// Length of the raw policy action: 12 joint offsets then 12 gain inputs.
pub const ACTION_DIM: usize = 2 * NUM_JOINTS;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Per-episode bookkeeping that is not part of the physical state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeState {
    /// `(v_x, v_y, w_z)` in the base frame, m/s and rad/s.
    pub command: [f64; 3],
    /// Absolute joint targets of the last applied action, rad.
    pub joint_targets: [f64; NUM_JOINTS],
    /// Clipped gain inputs of the last applied action.
    pub gain_inputs: [f64; NUM_JOINTS],
    pub prev_joint_targets: [f64; NUM_JOINTS],
    pub prev_gain_inputs: [f64; NUM_JOINTS],
    pub phase: Phase,
    /// Running sum of scaled tracking rewards divided by the episode length.
    pub tracking_score: f64,
    /// s
    pub time_since_disturbance: f64,
    pub dr: DrSample,
    /// s
    pub elapsed: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    Timeout,
    Fall,
    TrunkContact,
    Diverged,
}

impl DoneReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DoneReason::Timeout => "timeout",
            DoneReason::Fall => "fall",
            DoneReason::TrunkContact => "trunk_contact",
            DoneReason::Diverged => "diverged",
        }
    }

    /// True for terminations caused by the time limit rather than the robot.
    pub fn is_truncation(&self) -> bool {
        matches!(self, DoneReason::Timeout)
    }
}

/// Everything one environment instance owns between control steps.
#[derive(Debug, Clone)]
pub struct Episode {
    /// Robot with the episode's mass randomisation applied.
    pub model: RobotModel,
    pub terrain: Terrain,
    pub state: SimState,
    pub episode: EpisodeState,
    /// Contact summary of the most recent control step.
    pub contact: ContactReport,
}

/// Diagnostics of one control step.
#[derive(Debug, Clone)]
pub struct StepInfo {
    /// Torques of the final substep, N·m.
    pub tau: [f64; NUM_JOINTS],
    pub contact: ContactReport,
    /// Control-rate joint accelerations, rad/s².
    pub joint_accelerations: [f64; NUM_JOINTS],
    /// Control-rate base angular acceleration, base frame, rad/s².
    pub base_angular_acceleration: Vector3<f64>,
    pub disturbed: bool,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    pub done: Option<DoneReason>,
    pub info: StepInfo,
}

fn build_terrain<R: Rng + ?Sized>(config: &EnvConfig, dr: &DrSample, rng: &mut R) -> Terrain {
    match config.terrain.slope_angle {
        Some(angle) => Terrain::ramp(angle, dr.friction),
        None => Terrain::rough(
            rng,
            [0.0, 0.0],
            config.terrain.half_size,
            config.terrain.cell_size,
            dr.terrain_amplitude,
            dr.friction,
        ),
    }
}

/// Start a new episode. Joints are perturbed uniformly around the default pose,
/// the base is dropped from just above the terrain with a random heading.
pub fn reset<R: Rng + ?Sized>(config: &EnvConfig, nominal: &RobotModel, phase: Phase, rng: &mut R) -> (Episode, Observation) {
    let dr = randomize(config, rng);
    let model = nominal.with_base_mass_delta(dr.base_mass_delta);
    let terrain = build_terrain(config, &dr, rng);
    let command = sample_command(&config.commands, rng);

    let mut state = SimState::standing(&model);
    let limits = model.joint_limits();
    let w = config.init_joint_noise;
    for j in 0..NUM_JOINTS {
        let noise = if w > 0.0 { rng.random_range(-w..=w) } else { 0.0 };
        state.joint_positions[j] = (model.default_pose[j] + noise).clamp(limits[j].0, limits[j].1);
    }
    let yaw = if config.random_initial_yaw { rng.random_range(-std::f64::consts::PI..std::f64::consts::PI) } else { 0.0 };
    state.base_orientation = UnitQuaternion::from_euler_angles(0.0, 0.0, yaw);
    state.base_position.z = model.stand_height + terrain.height(0.0, 0.0).max(dr.terrain_amplitude);

    let episode = EpisodeState {
        command,
        joint_targets: model.default_pose,
        gain_inputs: [initial_gain_input(config); NUM_JOINTS],
        prev_joint_targets: model.default_pose,
        prev_gain_inputs: [initial_gain_input(config); NUM_JOINTS],
        phase,
        tracking_score: 0.0,
        time_since_disturbance: 0.0,
        dr,
        elapsed: 0.0,
        steps: 0,
    };
    let contact = ContactReport::default();
    let obs = observe(config, &state, &contact, &episode, rng);
    (Episode { model, terrain, state, episode, contact }, obs)
}

fn initial_gain_input(config: &EnvConfig) -> f64 {
    if config.gain_action_enabled {
        0.0
    } else {
        config.fixed_gain_input
    }
}

/// Map a raw 24-dim policy output to joint targets and gain inputs.
pub fn apply_action(config: &EnvConfig, model: &RobotModel, raw_action: &[f64]) -> Result<ActuatorCommand, EnvError> {
    if raw_action.len() != ACTION_DIM {
        return Err(EnvError::InvalidAction(format!("expected {ACTION_DIM} entries, got {}", raw_action.len())));
    }
    if let Some(i) = raw_action.iter().position(|v| !v.is_finite()) {
        return Err(EnvError::InvalidAction(format!("entry {i} is not finite")));
    }
    let limits = model.joint_limits();
    let mut cmd = ActuatorCommand::hold(model);
    for j in 0..NUM_JOINTS {
        let a = raw_action[j].clamp(-config.action_clip, config.action_clip);
        cmd.target_joint_positions[j] = (model.default_pose[j] + config.action_scale * a).clamp(limits[j].0, limits[j].1);
        cmd.gain_scale_inputs[j] = if config.gain_action_enabled {
            raw_action[NUM_JOINTS + j].clamp(-config.gain_clip, config.gain_clip)
        } else {
            config.fixed_gain_input
        };
    }
    Ok(cmd)
}

/// True when any corner of the trunk box lies below the ground.
pub fn trunk_touches_ground(model: &RobotModel, state: &SimState, terrain: &Terrain) -> bool {
    let [hx, hy, hz] = model.trunk_half_extents;
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let corner = state.base_position + state.base_orientation * Vector3::new(sx * hx, sy * hy, sz * hz);
                if terrain.surface(&corner).distance < 0.0 {
                    return true;
                }
            }
        }
    }
    false
}

/// Merge substep reports: contact state from the last substep, touchdown
/// events from the first substep that reported one.
fn aggregate(reports: &[ContactReport]) -> ContactReport {
    let last = reports.last().copied().unwrap_or_default();
    let mut feet: [FootContact; NUM_LEGS] = last.feet;
    for leg in 0..NUM_LEGS {
        feet[leg].touchdown = false;
        feet[leg].touchdown_speed = 0.0;
        feet[leg].air_time = 0.0;
        if let Some(r) = reports.iter().find(|r| r.feet[leg].touchdown) {
            feet[leg].touchdown = true;
            feet[leg].touchdown_speed = r.feet[leg].touchdown_speed;
            feet[leg].air_time = r.feet[leg].air_time;
        }
    }
    let self_collision_count = reports.iter().map(|r| r.self_collision_count).max().unwrap_or(0);
    ContactReport { feet, self_collision_count }
}

/// Advance one control period (`sim_substeps` physics steps).
pub fn step_env<R: Rng + ?Sized>(
    config: &EnvConfig,
    ep: &mut Episode,
    raw_action: &[f64],
    rng: &mut R,
) -> Result<StepOutcome, EnvError> {
    let cmd = apply_action(config, &ep.model, raw_action)?;
    let e = &mut ep.episode;
    e.prev_joint_targets = e.joint_targets;
    e.prev_gain_inputs = e.gain_inputs;
    e.joint_targets = cmd.target_joint_positions;
    e.gain_inputs = cmd.gain_scale_inputs;

    ep.state.mark_control_tick();
    let state_prev = ep.state.clone();

    e.time_since_disturbance += config.control_dt;
    let mut disturbed = false;
    if e.time_since_disturbance >= config.randomization.disturbance_period - 1e-9 {
        e.time_since_disturbance = 0.0;
        let kick = sample_disturbance(config, rng);
        ep.state = apply_velocity_impulse(&ep.state, &kick);
        disturbed = true;
    }

    let opts = StepOptions {
        contact: config.physics,
        external_force: Vector3::from(e.dr.external_force),
        external_torque: Vector3::from(e.dr.external_torque),
        ..StepOptions::default()
    };
    let mut reports = Vec::with_capacity(config.sim_substeps);
    let mut tau = [0.0; NUM_JOINTS];
    let mut diverged = false;
    for _ in 0..config.sim_substeps {
        tau = pd_torques_with(&config.gains, &ep.model, &ep.state, &cmd)?;
        match rigidsim::step_with(&ep.model, &ep.state, &tau, &ep.terrain, config.sim_dt, &opts) {
            Ok((next, report)) => {
                ep.state = next;
                reports.push(report);
            }
            Err(SimError::Diverged { .. }) => {
                diverged = true;
                break;
            }
            Err(other) => return Err(other.into()),
        }
    }
    let contact = aggregate(&reports);
    ep.contact = contact;
    e.elapsed += config.control_dt;
    e.steps += 1;

    let reward = if diverged {
        RewardBreakdown::default()
    } else {
        compute_rewards(config, e.phase, &ep.model, &ep.state, &state_prev, &contact, e, &tau)
    };
    e.tracking_score += reward.tracking() / config.episode_length;

    let (roll, pitch) = ep.state.roll_pitch();
    let done = if diverged {
        Some(DoneReason::Diverged)
    } else if roll.abs() > config.termination.max_roll_pitch || pitch.abs() > config.termination.max_roll_pitch {
        Some(DoneReason::Fall)
    } else if config.termination.trunk_contact && trunk_touches_ground(&ep.model, &ep.state, &ep.terrain) {
        Some(DoneReason::TrunkContact)
    } else if e.steps >= config.control_steps_per_episode() {
        Some(DoneReason::Timeout)
    } else {
        None
    };

    let observation = observe(config, &ep.state, &contact, &ep.episode, rng);
    let info = StepInfo {
        tau,
        contact,
        joint_accelerations: ep.state.joint_accelerations(config.control_dt),
        base_angular_acceleration: ep.state.base_angular_acceleration(config.control_dt),
        disturbed,
    };
    Ok(StepOutcome { observation, reward, done, info })
}
