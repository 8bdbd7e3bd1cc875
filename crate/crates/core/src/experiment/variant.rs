//! Named experiment variants and the config deltas each one applies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::quietenv::{EnvConfig, Phase, Range, RewardTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Proposed,
    Baseline,
    NoCurriculumNoisy,
    NoCurriculumQuiet,
    NoContactSensor,
    FixedPd,
    MoreDrFriction,
    MoreDrHeight,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Proposed,
        Variant::Baseline,
        Variant::NoCurriculumNoisy,
        Variant::NoCurriculumQuiet,
        Variant::NoContactSensor,
        Variant::FixedPd,
        Variant::MoreDrFriction,
        Variant::MoreDrHeight,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Proposed => "proposed",
            Variant::Baseline => "baseline",
            Variant::NoCurriculumNoisy => "no-curriculum-noisy",
            Variant::NoCurriculumQuiet => "no-curriculum-quiet",
            Variant::NoContactSensor => "no-contact-sensor",
            Variant::FixedPd => "fixed-pd",
            Variant::MoreDrFriction => "more-dr-friction",
            Variant::MoreDrHeight => "more-dr-height",
        }
    }

    /// Apply this variant's deltas on top of `config`.
    pub fn apply(&self, config: &mut EnvConfig) {
        match self {
            Variant::Proposed => {}
            Variant::Baseline => {
                // constant gain input 0 gives the midpoint gains P = 5.0, D = 0.04
                config.gain_action_enabled = false;
                config.fixed_gain_input = 0.0;
                for term in RewardTerm::NOISE_PENALTIES {
                    config.rewards.noisy.set(term, 0.0);
                    config.rewards.quiet.set(term, 0.0);
                }
                config.curriculum.enabled = false;
                config.curriculum.initial_phase = Phase::Noisy;
            }
            Variant::NoCurriculumNoisy => {
                config.curriculum.enabled = false;
                config.curriculum.initial_phase = Phase::Noisy;
            }
            Variant::NoCurriculumQuiet => {
                config.curriculum.enabled = false;
                config.curriculum.initial_phase = Phase::Quiet;
            }
            Variant::NoContactSensor => config.mask_foot_contacts = true,
            Variant::FixedPd => {
                config.gain_action_enabled = false;
                config.fixed_gain_input = 0.0;
            }
            Variant::MoreDrFriction => config.randomization.friction = Range(0.2, 0.9),
            Variant::MoreDrHeight => {
                config.randomization.terrain_height = Range(config.randomization.terrain_height.min(), 0.03)
            }
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
                format!("unknown variant '{s}', expected one of: {}", names.join(", "))
            })
    }
}
