//! Kinematic and inertial description of a 12-joint floating-base quadruped.
//!
//! Every leg is a serial chain `base -> shoulder pitch -> shoulder roll ->
//! ankle pitch -> foot`. The body attached to joint `j` has its frame origin
//! on the joint axis; its link runs along the body's local `-z` for
//! `length` metres, ending at the next joint (or at the foot sphere centre
//! for the last link). Link centres of mass sit at the link midpoint.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::SimError;

pub const NUM_LEGS: usize = 4;
pub const JOINTS_PER_LEG: usize = 3;
pub const NUM_JOINTS: usize = NUM_LEGS * JOINTS_PER_LEG;
/// Generalised velocity dimension: 6 base DoF + 12 joints.
pub const NUM_DOF: usize = 6 + NUM_JOINTS;

/// Leg order used throughout the crate.
pub const LEG_NAMES: [&str; NUM_LEGS] = ["fore_right", "fore_left", "hind_right", "hind_left"];
pub const JOINT_NAMES: [&str; JOINTS_PER_LEG] = ["shoulder_pitch", "shoulder_roll", "ankle_pitch"];

/// Index of the fore-right foot.
pub const FORE_RIGHT: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    /// m
    pub length: f64,
    /// kg
    pub mass: f64,
    /// kg·m², about the link centre of mass, body axes.
    pub inertia: [[f64; 3]; 3],
    /// Unit joint axis in the body frame.
    pub joint_axis: [f64; 3],
    /// rad, `(lo, hi)`.
    pub joint_limits: [f64; 2],
    /// N·m
    pub torque_limit: f64,
    /// rad/s
    pub joint_velocity_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegParams {
    /// Shoulder position in the base frame, m.
    pub hip_offset: [f64; 3],
    pub links: [LinkParams; JOINTS_PER_LEG],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotModel {
    /// kg
    pub base_mass: f64,
    /// kg·m², about the base origin (which is also the base centre of mass).
    pub base_inertia: [[f64; 3]; 3],
    /// Half extents of the trunk box used for self-collision and ground-contact checks, m.
    pub trunk_half_extents: [f64; 3],
    pub legs: [LegParams; NUM_LEGS],
    /// m
    pub foot_radius: f64,
    /// Radius of the capsules wrapping the upper and lower leg links, m.
    pub link_radius: f64,
    /// Reflected rotor inertia added to every joint, kg·m².
    pub joint_armature: f64,
    /// rad, joint-major within leg-major order.
    pub default_pose: [f64; NUM_JOINTS],
    /// Base height at which the default pose just touches flat ground, m.
    pub stand_height: f64,
}

fn diag(x: f64, y: f64, z: f64) -> [[f64; 3]; 3] {
    [[x, 0.0, 0.0], [0.0, y, 0.0], [0.0, 0.0, z]]
}

fn rod_inertia(mass: f64, length: f64, radius: f64) -> [[f64; 3]; 3] {
    let across = mass * (3.0 * radius * radius + length * length) / 12.0;
    let along = 0.5 * mass * radius * radius;
    diag(across, across, along)
}

impl Default for RobotModel {
    /// A ~2.2 kg stand-in with 0.18 m x 0.10 m hip rectangle and two
    /// 0.075 m links per leg.
    fn default() -> Self {
        let upper = 0.075;
        let lower = 0.075;
        let foot_radius = 0.012;
        let stand_height = 0.12;
        let link_radius = 0.012;

        // foot centre sits directly below the shoulder at `stand_height - foot_radius`
        let drop: f64 = stand_height - foot_radius;
        let pitch = (drop / (upper + lower)).acos();
        let ankle = -2.0 * pitch;

        let link = |length: f64, mass: f64, axis: [f64; 3], limits: [f64; 2]| LinkParams {
            length,
            mass,
            inertia: if length > 0.0 {
                rod_inertia(mass, length, 0.015)
            } else {
                diag(1.5e-5, 1.5e-5, 1.5e-5)
            },
            joint_axis: axis,
            joint_limits: limits,
            torque_limit: 1.2,
            joint_velocity_limit: 30.0,
        };
        let leg = |x: f64, y: f64| LegParams {
            hip_offset: [x, y, 0.0],
            links: [
                link(0.0, 0.04, [0.0, 1.0, 0.0], [-1.0, 2.0]),
                link(upper, 0.07, [1.0, 0.0, 0.0], [-0.6, 0.6]),
                link(lower, 0.04, [0.0, 1.0, 0.0], [-2.6, 0.2]),
            ],
        };
        let half_x = 0.09;
        let half_y = 0.05;
        let base_mass = 1.6;
        let (bx, by, bz) = (0.24, 0.10, 0.06);
        RobotModel {
            base_mass,
            base_inertia: diag(
                base_mass * (by * by + bz * bz) / 12.0,
                base_mass * (bx * bx + bz * bz) / 12.0,
                base_mass * (bx * bx + by * by) / 12.0,
            ),
            trunk_half_extents: [0.12, 0.04, 0.03],
            legs: [
                leg(half_x, -half_y),
                leg(half_x, half_y),
                leg(-half_x, -half_y),
                leg(-half_x, half_y),
            ],
            foot_radius,
            link_radius,
            joint_armature: 2.0e-4,
            default_pose: [
                pitch, 0.0, ankle, pitch, 0.0, ankle, pitch, 0.0, ankle, pitch, 0.0, ankle,
            ],
            stand_height,
        }
    }
}

fn is_spd(m: &[[f64; 3]; 3]) -> bool {
    let mat = Matrix3::from_fn(|r, c| m[r][c]);
    let symmetric = (mat - mat.transpose()).amax() <= 1e-12 * mat.amax().max(1.0);
    symmetric && mat.cholesky().is_some()
}

impl RobotModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |what: String| Err(SimError::InvalidModel(what));
        if !(self.base_mass > 0.0) {
            return bad("base_mass must be > 0".into());
        }
        if !is_spd(&self.base_inertia) {
            return bad("base_inertia must be symmetric positive definite".into());
        }
        if !(self.foot_radius > 0.0) || !(self.link_radius > 0.0) {
            return bad("foot_radius and link_radius must be > 0".into());
        }
        if !(self.joint_armature >= 0.0) {
            return bad("joint_armature must be >= 0".into());
        }
        if self.trunk_half_extents.iter().any(|h| !(*h > 0.0)) {
            return bad("trunk_half_extents must be > 0".into());
        }
        for (l, leg) in self.legs.iter().enumerate() {
            for (j, link) in leg.links.iter().enumerate() {
                let name = format!("legs[{l}].links[{j}]");
                if !(link.mass > 0.0) {
                    return bad(format!("{name}.mass must be > 0"));
                }
                if !(link.length >= 0.0) {
                    return bad(format!("{name}.length must be >= 0"));
                }
                if !is_spd(&link.inertia) {
                    return bad(format!("{name}.inertia must be symmetric positive definite"));
                }
                let axis = Vector3::from(link.joint_axis);
                if (axis.norm() - 1.0).abs() > 1e-9 {
                    return bad(format!("{name}.joint_axis must be a unit vector"));
                }
                let [lo, hi] = link.joint_limits;
                if !(lo < hi) {
                    return bad(format!("{name}.joint_limits must satisfy lo < hi"));
                }
                if !(link.torque_limit > 0.0) || !(link.joint_velocity_limit > 0.0) {
                    return bad(format!("{name} torque and velocity limits must be > 0"));
                }
                let q = self.default_pose[l * JOINTS_PER_LEG + j];
                if !(lo..=hi).contains(&q) {
                    return bad(format!("default_pose[{}] outside joint limits", l * JOINTS_PER_LEG + j));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let model: RobotModel =
            serde_json::from_str(text).map_err(|e| SimError::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn link(&self, joint: usize) -> &LinkParams {
        &self.legs[joint / JOINTS_PER_LEG].links[joint % JOINTS_PER_LEG]
    }

    pub fn total_mass(&self) -> f64 {
        self.base_mass
            + self
                .legs
                .iter()
                .flat_map(|leg| leg.links.iter())
                .map(|l| l.mass)
                .sum::<f64>()
    }

    pub fn joint_limits(&self) -> [(f64, f64); NUM_JOINTS] {
        std::array::from_fn(|j| {
            let [lo, hi] = self.link(j).joint_limits;
            (lo, hi)
        })
    }

    pub fn torque_limits(&self) -> [f64; NUM_JOINTS] {
        std::array::from_fn(|j| self.link(j).torque_limit)
    }

    /// Copy of the model with the base mass shifted by `delta` kg.
    pub fn with_base_mass_delta(&self, delta: f64) -> Self {
        let mut m = self.clone();
        let scale = (self.base_mass + delta) / self.base_mass;
        m.base_mass += delta;
        for row in m.base_inertia.iter_mut() {
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
        m
    }
}
