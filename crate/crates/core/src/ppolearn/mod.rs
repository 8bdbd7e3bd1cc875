//! Actor-critic MLP and PPO with generalised advantage estimation.

mod checkpoint;
mod gae;
mod mlp;
mod policy;
mod ppo;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, LayerDoc, CHECKPOINT_FORMAT};
pub use gae::gae;
pub use mlp::{elu, ForwardCache, Layer, Mlp, MlpGrad};
pub use policy::{log_prob, sample_action, ObsNormalizer, PolicyGrad, PolicyParams, LOG_STD_MAX, LOG_STD_MIN};
pub use ppo::{
    adapt_learning_rate, clip_grad_norm, gaussian_kl, normalize_advantages, ppo_loss, ppo_update, Adam, LossParts,
    Minibatch, Optimizer, PpoConfig, RolloutBuffer, UpdateStats,
};

#[derive(Debug, thiserror::Error)]
pub enum PpoError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite loss, update aborted: {0}")]
    NonFinite(String),
    #[error("checkpoint parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("incompatible checkpoint layer {layer}: {message}")]
    Incompatible { layer: String, message: String },
}
