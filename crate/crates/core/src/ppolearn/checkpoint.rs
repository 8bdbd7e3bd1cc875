//! Single-document JSON checkpoints with exact float round-trip.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::quietenv::{EnvConfig, Phase};

use super::mlp::{Layer, Mlp};
use super::policy::{ObsNormalizer, PolicyParams};
use super::ppo::PpoConfig;
use super::PpoError;

pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    pub name: String,
    /// Row-major, `outputs` rows of `inputs` entries.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: u32,
    pub iteration: usize,
    pub phase: Phase,
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub env_config: EnvConfig,
    pub ppo_config: PpoConfig,
    pub actor: Vec<LayerDoc>,
    pub critic: Vec<LayerDoc>,
    pub log_std: Vec<f64>,
    pub normalizer: ObsNormalizer,
}

fn layer_docs(prefix: &str, net: &Mlp) -> Vec<LayerDoc> {
    net.layers
        .iter()
        .enumerate()
        .map(|(i, l)| LayerDoc {
            name: format!("{prefix}.{i}"),
            weights: l.weights.row_iter().map(|r| r.iter().copied().collect()).collect(),
            bias: l.bias.iter().copied().collect(),
        })
        .collect()
}

fn layers_from_docs(docs: &[LayerDoc]) -> Result<Mlp, PpoError> {
    let mut layers = Vec::with_capacity(docs.len());
    let mut prev_out: Option<usize> = None;
    for doc in docs {
        let rows = doc.weights.len();
        let cols = doc.weights.first().map(|r| r.len()).unwrap_or(0);
        let incompatible = |message: String| PpoError::Incompatible { layer: doc.name.clone(), message };
        if rows == 0 || cols == 0 {
            return Err(incompatible("empty weight matrix".into()));
        }
        if doc.weights.iter().any(|r| r.len() != cols) {
            return Err(incompatible("ragged weight rows".into()));
        }
        if doc.bias.len() != rows {
            return Err(incompatible(format!("bias has {} entries for {rows} outputs", doc.bias.len())));
        }
        if let Some(p) = prev_out {
            if p != cols {
                return Err(incompatible(format!("expects {cols} inputs but previous layer emits {p}")));
            }
        }
        if doc.weights.iter().flatten().chain(&doc.bias).any(|v| !v.is_finite()) {
            return Err(incompatible("non-finite parameter".into()));
        }
        prev_out = Some(rows);
        layers.push(Layer {
            weights: DMatrix::from_fn(rows, cols, |r, c| doc.weights[r][c]),
            bias: DVector::from_column_slice(&doc.bias),
        });
    }
    if layers.is_empty() {
        return Err(PpoError::Incompatible { layer: "(none)".into(), message: "network has no layers".into() });
    }
    Ok(Mlp { layers })
}

impl Checkpoint {
    pub fn new(params: &PolicyParams, env_config: &EnvConfig, ppo_config: &PpoConfig, iteration: usize, phase: Phase) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            iteration,
            phase,
            variant: None,
            seed: None,
            env_config: env_config.clone(),
            ppo_config: ppo_config.clone(),
            actor: layer_docs("actor", &params.actor),
            critic: layer_docs("critic", &params.critic),
            log_std: params.log_std.iter().copied().collect(),
            normalizer: params.normalizer.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, PpoError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let ck: Checkpoint = serde_path_to_error::deserialize(de).map_err(|e| PpoError::Parse {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(PpoError::Parse { path: "format".into(), message: format!("unsupported format {}", ck.format) });
        }
        Ok(ck)
    }

    /// Rebuild the network, checking internal shape consistency.
    pub fn params(&self) -> Result<PolicyParams, PpoError> {
        let actor = layers_from_docs(&self.actor)?;
        let critic = layers_from_docs(&self.critic)?;
        if critic.output_dim() != 1 {
            let layer = self.critic.last().map(|l| l.name.clone()).unwrap_or_default();
            return Err(PpoError::Incompatible { layer, message: "critic must have a single output".into() });
        }
        if actor.input_dim() != critic.input_dim() {
            return Err(PpoError::Incompatible {
                layer: self.critic[0].name.clone(),
                message: format!("critic takes {} inputs, actor {}", critic.input_dim(), actor.input_dim()),
            });
        }
        if self.log_std.len() != actor.output_dim() {
            return Err(PpoError::Incompatible {
                layer: "log_std".into(),
                message: format!("{} entries for {} actions", self.log_std.len(), actor.output_dim()),
            });
        }
        if self.normalizer.dim() != actor.input_dim() || self.normalizer.var.len() != actor.input_dim() {
            return Err(PpoError::Incompatible {
                layer: "normalizer".into(),
                message: format!("{} entries for {} observations", self.normalizer.dim(), actor.input_dim()),
            });
        }
        Ok(PolicyParams { actor, critic, log_std: DVector::from_vec(self.log_std.clone()), normalizer: self.normalizer.clone() })
    }

    /// Check the network against the observation and action sizes of `config`.
    pub fn check_compatible(&self, obs_dim: usize, action_dim: usize) -> Result<PolicyParams, PpoError> {
        let params = self.params()?;
        for (net, docs) in [(&params.actor, &self.actor), (&params.critic, &self.critic)] {
            if net.input_dim() != obs_dim {
                return Err(PpoError::Incompatible {
                    layer: docs[0].name.clone(),
                    message: format!("checkpoint expects {} observation inputs, config provides {obs_dim}", net.input_dim()),
                });
            }
        }
        if params.action_dim() != action_dim {
            return Err(PpoError::Incompatible {
                layer: self.actor.last().map(|l| l.name.clone()).unwrap_or_default(),
                message: format!("checkpoint emits {} actions, environment expects {action_dim}", params.action_dim()),
            });
        }
        Ok(params)
    }
}

pub fn save_checkpoint(params: &PolicyParams, env_config: &EnvConfig, ppo_config: &PpoConfig, iteration: usize, phase: Phase) -> String {
    Checkpoint::new(params, env_config, ppo_config, iteration, phase).to_json()
}

pub fn load_checkpoint(text: &str) -> Result<(PolicyParams, Checkpoint), PpoError> {
    let ck = Checkpoint::from_json(text)?;
    let params = ck.params()?;
    Ok((params, ck))
}
