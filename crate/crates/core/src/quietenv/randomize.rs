//! Per-episode domain randomisation and command sampling.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use super::config::{CommandRanges, EnvConfig, Range};

/// Physical parameters drawn once per episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrSample {
    /// kg
    pub base_mass_delta: f64,
    /// World frame, N, fixed direction for the episode.
    pub external_force: [f64; 3],
    /// Base frame, N·m.
    pub external_torque: [f64; 3],
    /// m
    pub terrain_amplitude: f64,
    pub friction: f64,
}

pub(crate) fn uniform<R: Rng + ?Sized>(rng: &mut R, r: Range) -> f64 {
    if r.max() > r.min() {
        rng.random_range(r.min()..=r.max())
    } else {
        r.min()
    }
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    Vector3::new(x, y, z)
}

pub fn randomize<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> DrSample {
    let r = &config.randomization;
    let base_mass_delta = uniform(rng, r.base_mass_delta);
    let force_mag = uniform(rng, r.external_force);
    let force_dir = random_direction(rng);
    let torque_mag = uniform(rng, r.external_torque);
    let torque_dir = random_direction(rng);
    let terrain_amplitude = uniform(rng, r.terrain_height);
    let friction = uniform(rng, r.friction);
    DrSample {
        base_mass_delta,
        external_force: (force_dir * force_mag).into(),
        external_torque: (torque_dir * torque_mag).into(),
        terrain_amplitude,
        friction,
    }
}

/// Velocity kick applied at each disturbance tick, drawn per axis.
pub fn sample_disturbance<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> Vector3<f64> {
    let r = config.randomization.velocity_disturbance;
    Vector3::new(uniform(rng, r), uniform(rng, r), uniform(rng, r))
}

/// `(v_x, v_y, w_z)` drawn uniformly within the configured ranges.
pub fn sample_command<R: Rng + ?Sized>(ranges: &CommandRanges, rng: &mut R) -> [f64; 3] {
    [uniform(rng, ranges.lin_vel_x), uniform(rng, ranges.lin_vel_y), uniform(rng, ranges.ang_vel_z)]
}
