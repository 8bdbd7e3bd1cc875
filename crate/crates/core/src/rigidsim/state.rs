use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::model::{RobotModel, NUM_JOINTS, NUM_LEGS};

/// Contact bookkeeping carried between steps for one foot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FootTracker {
    pub in_contact: bool,
    /// Time spent airborne since the last liftoff, s.
    pub air_time: f64,
    /// Time spent in contact since the last touchdown, s.
    pub contact_time: f64,
}

/// Generalised coordinates and velocities of one simulated robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub base_position: Vector3<f64>,
    /// Rotation from base to world.
    pub base_orientation: UnitQuaternion<f64>,
    /// World frame, m/s.
    pub base_linear_velocity: Vector3<f64>,
    /// Base frame, rad/s.
    pub base_angular_velocity: Vector3<f64>,
    pub joint_positions: [f64; NUM_JOINTS],
    pub joint_velocities: [f64; NUM_JOINTS],
    /// Joint velocities at the previous control tick (see [`SimState::mark_control_tick`]).
    pub previous_joint_velocities: [f64; NUM_JOINTS],
    /// Base angular velocity at the previous control tick.
    pub previous_base_angular_velocity: Vector3<f64>,
    pub sim_time: f64,
    pub feet: [FootTracker; NUM_LEGS],
}

impl SimState {
    /// Robot at rest in `default_pose`, base at `stand_height` above the origin.
    pub fn standing(model: &RobotModel) -> Self {
        SimState {
            base_position: Vector3::new(0.0, 0.0, model.stand_height),
            base_orientation: UnitQuaternion::identity(),
            base_linear_velocity: Vector3::zeros(),
            base_angular_velocity: Vector3::zeros(),
            joint_positions: model.default_pose,
            joint_velocities: [0.0; NUM_JOINTS],
            previous_joint_velocities: [0.0; NUM_JOINTS],
            previous_base_angular_velocity: Vector3::zeros(),
            sim_time: 0.0,
            feet: [FootTracker::default(); NUM_LEGS],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.base_position.iter().all(|v| v.is_finite())
            && self.base_orientation.coords.iter().all(|v| v.is_finite())
            && self.base_linear_velocity.iter().all(|v| v.is_finite())
            && self.base_angular_velocity.iter().all(|v| v.is_finite())
            && self.joint_positions.iter().all(|v| v.is_finite())
            && self.joint_velocities.iter().all(|v| v.is_finite())
    }

    /// Base linear velocity expressed in the base frame.
    pub fn base_linear_velocity_body(&self) -> Vector3<f64> {
        self.base_orientation.inverse_transform_vector(&self.base_linear_velocity)
    }

    /// Backward-difference joint acceleration over one control period.
    pub fn joint_accelerations(&self, control_dt: f64) -> [f64; NUM_JOINTS] {
        std::array::from_fn(|j| (self.joint_velocities[j] - self.previous_joint_velocities[j]) / control_dt)
    }

    /// Backward-difference base angular acceleration (base frame) over one control period.
    pub fn base_angular_acceleration(&self, control_dt: f64) -> Vector3<f64> {
        (self.base_angular_velocity - self.previous_base_angular_velocity) / control_dt
    }

    /// Latch the current velocities as the reference for the next control-rate finite difference.
    pub fn mark_control_tick(&mut self) {
        self.previous_joint_velocities = self.joint_velocities;
        self.previous_base_angular_velocity = self.base_angular_velocity;
    }

    /// Roll and pitch (XYZ intrinsic / ZYX extrinsic convention), rad.
    pub fn roll_pitch(&self) -> (f64, f64) {
        let (roll, pitch, _) = self.base_orientation.euler_angles();
        (roll, pitch)
    }

    pub fn yaw(&self) -> f64 {
        self.base_orientation.euler_angles().2
    }
}

/// Adds `delta_v` to the base linear velocity; nothing else changes.
pub fn apply_velocity_impulse(state: &SimState, delta_v: &Vector3<f64>) -> SimState {
    let mut next = state.clone();
    next.base_linear_velocity += delta_v;
    next
}
