//! Clipped-surrogate PPO: rollout storage, loss with analytic gradient, Adam and
//! the KL-adaptive learning rate.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gae::gae;
use super::policy::{PolicyGrad, PolicyParams};
use super::PpoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub value_loss_coef: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    pub desired_kl: f64,
    pub max_grad_norm: f64,
    /// Control steps per environment per iteration.
    pub rollout_length: usize,
    pub init_std: f64,
    pub hidden: Vec<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 5,
            minibatches: 4,
            value_loss_coef: 1.0,
            entropy_coef: 0.01,
            learning_rate: 1e-3,
            lr_min: 1e-5,
            lr_max: 1e-2,
            desired_kl: 0.01,
            max_grad_norm: 1.0,
            rollout_length: 24,
            init_std: 0.5,
            hidden: vec![128, 128, 128],
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), String> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.gamma) || !unit(self.lambda) {
            return Err("gamma and lambda must lie in (0, 1]".into());
        }
        if !(self.clip > 0.0) {
            return Err("clip must be > 0".into());
        }
        if self.epochs == 0 || self.minibatches == 0 || self.rollout_length == 0 {
            return Err("epochs, minibatches and rollout_length must be >= 1".into());
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.learning_rate && self.learning_rate <= self.lr_max) {
            return Err("learning rate bounds must satisfy 0 < lr_min <= learning_rate <= lr_max".into());
        }
        if !(self.init_std > 0.0) || self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err("init_std must be > 0 and hidden sizes >= 1".into());
        }
        Ok(())
    }
}

/// Transitions of `n_envs` environments over `n_steps` steps, indexed `t * n_envs + env`.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub n_steps: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    /// Normalised observations as seen by the policy.
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub action_means: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value of the state after the final step, per env.
    pub bootstrap: Vec<f64>,
    /// Log-std in effect while collecting.
    pub log_std: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize, n_steps: usize, obs_dim: usize, action_dim: usize) -> Self {
        let n = n_envs * n_steps;
        RolloutBuffer {
            n_envs,
            n_steps,
            obs_dim,
            action_dim,
            observations: Vec::with_capacity(n * obs_dim),
            actions: Vec::with_capacity(n * action_dim),
            action_means: Vec::with_capacity(n * action_dim),
            log_probs: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            bootstrap: vec![],
            log_std: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.n_envs * self.n_steps && self.bootstrap.len() == self.n_envs
    }

    /// Advantages and returns in buffer order, computed per environment.
    pub fn advantages(&self, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut adv = vec![0.0; n];
        let mut ret = vec![0.0; n];
        for e in 0..self.n_envs {
            let idx: Vec<usize> = (0..self.n_steps).map(|t| t * self.n_envs + e).collect();
            let r: Vec<f64> = idx.iter().map(|&i| self.rewards[i]).collect();
            let v: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
            let d: Vec<bool> = idx.iter().map(|&i| self.dones[i]).collect();
            let (a, rt) = gae(&r, &v, &d, self.bootstrap[e], gamma, lambda);
            for (k, &i) in idx.iter().enumerate() {
                adv[i] = a[k];
                ret[i] = rt[k];
            }
        }
        (adv, ret)
    }
}

/// Column-batched training samples.
#[derive(Debug, Clone)]
pub struct Minibatch {
    pub observations: DMatrix<f64>,
    pub actions: DMatrix<f64>,
    pub old_means: DMatrix<f64>,
    pub old_log_std: DVector<f64>,
    pub old_log_probs: DVector<f64>,
    pub old_values: DVector<f64>,
    pub advantages: DVector<f64>,
    pub returns: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

/// Normalise to zero mean and unit population standard deviation.
pub fn normalize_advantages(adv: &mut DVector<f64>) {
    let n = adv.len() as f64;
    let mean = adv.sum() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    adv.apply(|a| *a = (*a - mean) / (std + 1e-12));
}

/// Total loss and, optionally, its gradient with respect to every trainable parameter.
pub fn ppo_loss(params: &PolicyParams, mb: &Minibatch, config: &PpoConfig, with_grad: bool) -> (LossParts, Option<PolicyGrad>) {
    let m = mb.actions.ncols();
    let mf = m as f64;
    let a_dim = params.action_dim();
    let (mean, actor_cache) = params.actor.forward_cached(&mb.observations);
    let (value, critic_cache) = params.critic.forward_cached(&mb.observations);
    let inv_std: DVector<f64> = params.log_std.map(|s| (-s).exp());
    let log_norm: f64 = params.log_std.sum() + 0.5 * a_dim as f64 * 1.8378770664093453;

    let mut d_mean = DMatrix::zeros(a_dim, m);
    let mut d_log_std = DVector::zeros(a_dim);
    let mut d_value = DMatrix::zeros(1, m);
    let mut policy_loss = 0.0;
    let mut value_loss = 0.0;
    for j in 0..m {
        let mut sq = 0.0;
        for i in 0..a_dim {
            let z = (mb.actions[(i, j)] - mean[(i, j)]) * inv_std[i];
            sq += z * z;
        }
        let lp = -0.5 * sq - log_norm;
        let ratio = (lp - mb.old_log_probs[j]).exp();
        let adv = mb.advantages[j];
        let clipped = ratio.clamp(1.0 - config.clip, 1.0 + config.clip);
        let unclipped_term = ratio * adv;
        let clipped_term = clipped * adv;
        let (surrogate, d_ratio) = if unclipped_term <= clipped_term {
            (unclipped_term, adv)
        } else {
            (clipped_term, 0.0)
        };
        policy_loss -= surrogate / mf;
        // d loss / d log_prob
        let g_lp = -d_ratio * ratio / mf;
        if g_lp != 0.0 {
            for i in 0..a_dim {
                let diff = mb.actions[(i, j)] - mean[(i, j)];
                d_mean[(i, j)] = g_lp * diff * inv_std[i] * inv_std[i];
                d_log_std[i] += g_lp * (diff * diff * inv_std[i] * inv_std[i] - 1.0);
            }
        }

        let v = value[(0, j)];
        let v_old = mb.old_values[j];
        let ret = mb.returns[j];
        let dv = v - v_old;
        let v_clip = v_old + dv.clamp(-config.clip, config.clip);
        let l1 = (v - ret).powi(2);
        let l2 = (v_clip - ret).powi(2);
        let g_v = if l1 >= l2 {
            value_loss += l1 / mf;
            2.0 * (v - ret)
        } else {
            value_loss += l2 / mf;
            if dv.abs() < config.clip {
                2.0 * (v_clip - ret)
            } else {
                0.0
            }
        };
        d_value[(0, j)] = config.value_loss_coef * g_v / mf;
    }
    let entropy = params.entropy();
    let total = policy_loss + config.value_loss_coef * value_loss - config.entropy_coef * entropy;
    let parts = LossParts { total, policy: policy_loss, value: value_loss, entropy };
    if !with_grad {
        return (parts, None);
    }
    d_log_std.add_scalar_mut(-config.entropy_coef);
    let grad = PolicyGrad {
        actor: params.actor.backward(&actor_cache, &d_mean),
        critic: params.critic.backward(&critic_cache, &d_value),
        log_std: d_log_std,
    };
    (parts, Some(grad))
}

/// Mean KL(old || new) between diagonal Gaussians over a minibatch.
pub fn gaussian_kl(old_mean: &DMatrix<f64>, old_log_std: &DVector<f64>, new_mean: &DMatrix<f64>, new_log_std: &DVector<f64>) -> f64 {
    let m = old_mean.ncols();
    let mut kl = 0.0;
    for j in 0..m {
        for i in 0..old_mean.nrows() {
            let so = old_log_std[i].exp();
            let sn = new_log_std[i].exp();
            let dm = old_mean[(i, j)] - new_mean[(i, j)];
            kl += new_log_std[i] - old_log_std[i] + (so * so + dm * dm) / (2.0 * sn * sn) - 0.5;
        }
    }
    kl / m as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grads[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grads[k] * grads[k];
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Scale `grads` so their Euclidean norm is at most `max_norm`; returns the original norm.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / (norm + 1e-12);
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Halve or double `lr` depending on how far the measured KL is from the target.
pub fn adapt_learning_rate(lr: f64, kl: f64, config: &PpoConfig) -> f64 {
    let next = if kl > 2.0 * config.desired_kl {
        lr / 2.0
    } else if kl < config.desired_kl / 2.0 && kl > 0.0 {
        lr * 2.0
    } else {
        lr
    };
    next.clamp(config.lr_min, config.lr_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    /// Mean learning rate over the minibatch steps of this update.
    pub learning_rate: f64,
}

/// Mutable optimiser state carried across iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub adam: Adam,
    pub learning_rate: f64,
}

impl Optimizer {
    pub fn new(params: &PolicyParams, config: &PpoConfig) -> Self {
        Optimizer { adam: Adam::new(params.num_params()), learning_rate: config.learning_rate }
    }
}

fn gather(buffer: &RolloutBuffer, idx: &[usize], adv: &[f64], ret: &[f64]) -> Minibatch {
    let d = buffer.obs_dim;
    let a = buffer.action_dim;
    let m = idx.len();
    let mut advantages = DVector::from_iterator(m, idx.iter().map(|&i| adv[i]));
    normalize_advantages(&mut advantages);
    Minibatch {
        observations: DMatrix::from_fn(d, m, |r, c| buffer.observations[idx[c] * d + r]),
        actions: DMatrix::from_fn(a, m, |r, c| buffer.actions[idx[c] * a + r]),
        old_means: DMatrix::from_fn(a, m, |r, c| buffer.action_means[idx[c] * a + r]),
        old_log_std: DVector::from_column_slice(&buffer.log_std),
        old_log_probs: DVector::from_iterator(m, idx.iter().map(|&i| buffer.log_probs[i])),
        old_values: DVector::from_iterator(m, idx.iter().map(|&i| buffer.values[i])),
        advantages,
        returns: DVector::from_iterator(m, idx.iter().map(|&i| ret[i])),
    }
}

/// Run `epochs x minibatches` gradient steps on a full buffer. On a non-finite
/// loss the parameters and optimiser are restored and an error is returned.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    opt: &mut Optimizer,
    buffer: &RolloutBuffer,
    config: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, PpoError> {
    if !buffer.is_full() {
        return Err(PpoError::Shape(format!(
            "rollout buffer holds {} of {} transitions",
            buffer.len(),
            buffer.n_envs * buffer.n_steps
        )));
    }
    let backup = (params.clone(), opt.clone());
    let (adv, ret) = buffer.advantages(config.gamma, config.lambda);
    let n = buffer.len();
    let mb_size = (n / config.minibatches).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();
    let mut count = 0.0;
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        for (k, chunk) in order.chunks(mb_size).enumerate() {
            if k >= config.minibatches {
                break;
            }
            let mb = gather(buffer, chunk, &adv, &ret);
            let (new_mean, _) = params.forward(&mb.observations);
            let kl = gaussian_kl(&mb.old_means, &mb.old_log_std, &new_mean, &params.log_std);
            opt.learning_rate = adapt_learning_rate(opt.learning_rate, kl, config);

            let (loss, grad) = ppo_loss(params, &mb, config, true);
            let mut g = grad.expect("gradient requested").to_flat();
            if !loss.total.is_finite() || g.iter().any(|v| !v.is_finite()) {
                *params = backup.0;
                *opt = backup.1;
                return Err(PpoError::NonFinite(format!(
                    "epoch {epoch} minibatch {k}: policy {} value {} entropy {} kl {kl}",
                    loss.policy, loss.value, loss.entropy
                )));
            }
            clip_grad_norm(&mut g, config.max_grad_norm);
            let mut flat = params.to_flat();
            opt.adam.step(&mut flat, &g, opt.learning_rate);
            params.set_flat(&flat);
            params.clamp_log_std();

            stats.policy_loss += loss.policy;
            stats.value_loss += loss.value;
            stats.entropy += loss.entropy;
            stats.approx_kl += kl;
            stats.learning_rate += opt.learning_rate;
            count += 1.0;
        }
    }
    stats.policy_loss /= count;
    stats.value_loss /= count;
    stats.entropy /= count;
    stats.approx_kl /= count;
    stats.learning_rate /= count;
    Ok(stats)
}
