//! The resolved configuration of a run: environment, learner and robot.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ppolearn::PpoConfig;
use crate::quietenv::{ConfigError, EnvConfig};
use crate::rigidsim::RobotModel;

use super::Variant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub robot: RobotModel,
}

impl RunConfig {
    /// Parse a JSON document; omitted sections and fields take defaults.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let text = if text.trim().is_empty() { "{}" } else { text };
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| ConfigError::new(e.path().to_string(), e.into_inner().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.env.validate().map_err(|e| ConfigError::new(format!("env.{}", e.path), e.message))?;
        self.ppo.validate().map_err(|m| ConfigError::new("ppo", m))?;
        self.robot.validate().map_err(|e| ConfigError::new("robot", e.to_string()))?;
        Ok(())
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        variant.apply(&mut self.env);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// First 16 hex digits of the SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_string(self).expect("config serialises").as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
