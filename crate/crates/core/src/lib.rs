//! Quiet-walking quadruped training lab.
//!
//! * [`rigidsim`] floating-base dynamics, penalty contacts and the adaptive-gain PD actuator
//! * [`quietenv`] the vectorised RL environment: observations, rewards, curriculum, randomisation
//! * [`ppolearn`] actor-critic MLPs trained with clipped PPO and GAE
//! * [`acoustics`] WAV ingestion, Welch PSD, band power and gait penalty metrics
//! * [`experiment`] the training / evaluation / sweep harness behind the `quietctl` CLI

pub mod acoustics;
pub mod experiment;
pub mod ppolearn;
pub mod quietenv;
pub mod rigidsim;

pub use rigidsim::{RobotModel, SimState, Terrain};
