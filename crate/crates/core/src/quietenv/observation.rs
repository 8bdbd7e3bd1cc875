//! Policy observation assembly.
//!
//! Layout: joint positions (12), joint velocities (12), last joint targets (12),
//! last gain inputs (12), foot contacts (4), gravity direction (3), command (3),
//! then optionally the base gyro (3).

use rand::Rng;

use crate::rigidsim::{gravity_orientation, ContactReport, SimState, NUM_JOINTS, NUM_LEGS};

use super::config::EnvConfig;
use super::env::EpisodeState;

pub const BASE_OBSERVATION_DIM: usize = 4 * NUM_JOINTS + NUM_LEGS + 3 + 3;

/// Named slices of the observation vector.
pub mod layout {
    use std::ops::Range;
    pub const JOINT_POSITIONS: Range<usize> = 0..12;
    pub const JOINT_VELOCITIES: Range<usize> = 12..24;
    pub const JOINT_TARGETS: Range<usize> = 24..36;
    pub const GAIN_INPUTS: Range<usize> = 36..48;
    pub const FOOT_CONTACTS: Range<usize> = 48..52;
    pub const GRAVITY: Range<usize> = 52..55;
    pub const COMMAND: Range<usize> = 55..58;
    pub const GYRO: Range<usize> = 58..61;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn push_noisy<R: Rng + ?Sized>(out: &mut Vec<f64>, values: &[f64], level: f64, rng: &mut R) {
    for &v in values {
        let noise = if level > 0.0 { rng.random_range(-level..=level) } else { 0.0 };
        out.push(v + noise);
    }
}

pub fn observe<R: Rng + ?Sized>(
    config: &EnvConfig,
    state: &SimState,
    contact: &ContactReport,
    episode: &EpisodeState,
    rng: &mut R,
) -> Observation {
    let n = &config.noise;
    let mut out = Vec::with_capacity(config.observation_dim());
    push_noisy(&mut out, &state.joint_positions, n.joint_positions, rng);
    push_noisy(&mut out, &state.joint_velocities, n.joint_velocities, rng);
    push_noisy(&mut out, &episode.joint_targets, n.last_joint_targets, rng);
    push_noisy(&mut out, &episode.gain_inputs, n.last_gain_scales, rng);
    let contacts: [f64; NUM_LEGS] = std::array::from_fn(|leg| {
        if !config.mask_foot_contacts && contact.feet[leg].in_contact {
            1.0
        } else {
            0.0
        }
    });
    push_noisy(&mut out, &contacts, n.foot_contacts, rng);
    let g = gravity_orientation(state);
    push_noisy(&mut out, g.as_slice(), n.gravity_orientation, rng);
    push_noisy(&mut out, &episode.command, n.commands, rng);
    if config.include_gyro_observation {
        push_noisy(&mut out, state.base_angular_velocity.as_slice(), n.gyro, rng);
    }
    Observation(out)
}
