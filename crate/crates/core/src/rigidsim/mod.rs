//! Deterministic floating-base quadruped simulation with penalty contacts.

mod actuator;
mod collision;
mod dynamics;
mod kinematics;
mod model;
mod state;
mod terrain;

pub use actuator::{pd_torques, pd_torques_with, sigmoid, ActuatorCommand, GainSchedule};
pub use collision::{segment_box_distance, segment_distance, self_collision_count};
pub use dynamics::{step, step_with, ContactParams, ContactReport, FootContact, StepOptions};
pub use kinematics::{center_of_mass, foot_kinematics, gravity_orientation, FootState};
pub use model::{
    LegParams, LinkParams, RobotModel, FORE_RIGHT, JOINTS_PER_LEG, JOINT_NAMES, LEG_NAMES, NUM_DOF, NUM_JOINTS,
    NUM_LEGS,
};
pub use state::{apply_velocity_impulse, FootTracker, SimState};
pub use terrain::{HeightField, SurfacePoint, Terrain, TerrainShape};

/// Nominal physics rate, Hz.
pub const SIM_RATE_HZ: f64 = 400.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid robot model: {0}")]
    InvalidModel(String),
    #[error("simulation diverged at {body}")]
    Diverged { body: String },
}

/// Kinetic plus gravitational potential energy (potential measured from world z = 0).
pub fn mechanical_energy(model: &RobotModel, state: &SimState, gravity: f64) -> f64 {
    dynamics::kinetic_energy(model, state) + model.total_mass() * gravity * center_of_mass(model, state).z
}
