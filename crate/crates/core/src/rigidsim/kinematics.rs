use nalgebra::Vector3;

use super::dynamics::{frames, generalized_velocity, point_jacobian};
use super::model::{RobotModel, JOINTS_PER_LEG, NUM_LEGS};
use super::state::SimState;

/// World-frame position and velocity of one foot sphere centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

pub fn foot_kinematics(model: &RobotModel, state: &SimState) -> [FootState; NUM_LEGS] {
    let fr = frames(model, &state.joint_positions);
    let rot = *state.base_orientation.to_rotation_matrix().matrix();
    let v = generalized_velocity(state);
    std::array::from_fn(|leg| {
        let p = fr.foot_base[leg];
        FootState { position: state.base_position + rot * p, velocity: point_jacobian(&fr, leg, &p, &rot) * v }
    })
}

/// World "down" expressed in the base frame.
pub fn gravity_orientation(state: &SimState) -> Vector3<f64> {
    state.base_orientation.inverse_transform_vector(&Vector3::new(0.0, 0.0, -1.0))
}

/// Whole-robot centre of mass, world frame.
pub fn center_of_mass(model: &RobotModel, state: &SimState) -> Vector3<f64> {
    let fr = frames(model, &state.joint_positions);
    let mut weighted = Vector3::zeros();
    for b in 0..NUM_LEGS * JOINTS_PER_LEG {
        let link = model.link(b);
        let com = fr.origin_base[b] + fr.rot_base[b] * Vector3::new(0.0, 0.0, -0.5 * link.length);
        weighted += com * link.mass;
    }
    let local = weighted / model.total_mass();
    state.base_position + state.base_orientation * local
}

/// Segment endpoints (base frame) of the upper and lower link of every leg.
pub(crate) fn link_segments(model: &RobotModel, state: &SimState) -> [[(Vector3<f64>, Vector3<f64>); 2]; NUM_LEGS] {
    let fr = frames(model, &state.joint_positions);
    std::array::from_fn(|leg| {
        let roll = leg * JOINTS_PER_LEG + 1;
        let ankle = leg * JOINTS_PER_LEG + 2;
        [(fr.origin_base[roll], fr.origin_base[ankle]), (fr.origin_base[ankle], fr.foot_base[leg])]
    })
}
