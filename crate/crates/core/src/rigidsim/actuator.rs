//! Adaptive-gain PD actuator.
//!
//! One network output `x_i` per joint drives both gains through the same
//! sigmoid: `P_i = P* + alpha * s`, `D_i = D* + beta * s`, `s = sigmoid(x_i)`.

use serde::{Deserialize, Serialize};

use super::model::{RobotModel, NUM_JOINTS};
use super::state::SimState;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainSchedule {
    pub p_nominal: f64,
    pub d_nominal: f64,
    pub p_scale: f64,
    pub d_scale: f64,
}

impl Default for GainSchedule {
    fn default() -> Self {
        GainSchedule { p_nominal: 3.0, d_nominal: 0.03, p_scale: 4.0, d_scale: 0.02 }
    }
}

impl GainSchedule {
    /// `(P, D)` for one gain input.
    pub fn gains(&self, x: f64) -> (f64, f64) {
        let s = sigmoid(x);
        (self.p_nominal + self.p_scale * s, self.d_nominal + self.d_scale * s)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Joint targets plus per-joint gain inputs, held constant over a control period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorCommand {
    /// rad
    pub target_joint_positions: [f64; NUM_JOINTS],
    pub gain_scale_inputs: [f64; NUM_JOINTS],
}

impl ActuatorCommand {
    pub fn hold(model: &RobotModel) -> Self {
        ActuatorCommand { target_joint_positions: model.default_pose, gain_scale_inputs: [0.0; NUM_JOINTS] }
    }
}

pub fn pd_torques(model: &RobotModel, state: &SimState, cmd: &ActuatorCommand) -> Result<[f64; NUM_JOINTS], SimError> {
    pd_torques_with(&GainSchedule::default(), model, state, cmd)
}

pub fn pd_torques_with(
    gains: &GainSchedule,
    model: &RobotModel,
    state: &SimState,
    cmd: &ActuatorCommand,
) -> Result<[f64; NUM_JOINTS], SimError> {
    let finite = cmd.target_joint_positions.iter().chain(cmd.gain_scale_inputs.iter()).all(|v| v.is_finite());
    if !finite {
        return Err(SimError::InvalidInput("actuator command contains non-finite values".into()));
    }
    let mut tau = [0.0; NUM_JOINTS];
    for (j, t) in tau.iter_mut().enumerate() {
        let (p, d) = gains.gains(cmd.gain_scale_inputs[j]);
        let raw = p * (cmd.target_joint_positions[j] - state.joint_positions[j]) - d * state.joint_velocities[j];
        let limit = model.link(j).torque_limit;
        *t = raw.clamp(-limit, limit);
    }
    Ok(tau)
}
