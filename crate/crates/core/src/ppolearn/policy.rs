//! Actor-critic parameters, the diagonal Gaussian action distribution and
//! the running observation normaliser.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpGrad};

pub const LOG_STD_MIN: f64 = -9.210340371976182; // ln 1e-4
pub const LOG_STD_MAX: f64 = std::f64::consts::LN_2 * 2.0; // ln 4
const LN_2PI: f64 = 1.8378770664093453;

/// Running mean and variance of observations (parallel-merge update).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
    pub clip: f64,
}

impl ObsNormalizer {
    pub fn new(dim: usize) -> Self {
        ObsNormalizer { mean: vec![0.0; dim], var: vec![1.0; dim], count: 0.0, clip: 10.0 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fold in a row-major batch of observations.
    pub fn update(&mut self, batch: &[f64]) {
        let d = self.dim();
        let n = (batch.len() / d) as f64;
        if n == 0.0 {
            return;
        }
        for i in 0..d {
            let col = batch.iter().skip(i).step_by(d);
            let m = col.clone().sum::<f64>() / n;
            let v = col.map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            let total = self.count + n;
            let delta = m - self.mean[i];
            let m2 = self.var[i] * self.count + v * n + delta * delta * self.count * n / total;
            self.mean[i] += delta * n / total;
            self.var[i] = m2 / total;
        }
        self.count += n;
    }

    /// Normalise a row-major batch into a `dim x batch` matrix.
    pub fn normalize(&self, batch: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let n = batch.len() / d;
        DMatrix::from_fn(d, n, |i, j| {
            ((batch[j * d + i] - self.mean[i]) / (self.var[i] + 1e-8).sqrt()).clamp(-self.clip, self.clip)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub critic: Mlp,
    pub log_std: DVector<f64>,
    pub normalizer: ObsNormalizer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrad {
    pub actor: MlpGrad,
    pub critic: MlpGrad,
    pub log_std: DVector<f64>,
}

impl PolicyGrad {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = vec![];
        self.actor.write_flat(&mut out);
        self.critic.write_flat(&mut out);
        out.extend_from_slice(self.log_std.as_slice());
        out
    }
}

impl PolicyParams {
    /// `hidden` sizes are shared by actor and critic.
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, hidden: &[usize], init_std: f64, rng: &mut R) -> Self {
        let sizes = |out: usize| {
            let mut s = vec![obs_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let actor = Mlp::orthogonal(&sizes(action_dim), 0.01, rng);
        let critic = Mlp::orthogonal(&sizes(1), 1.0, rng);
        PolicyParams {
            actor,
            critic,
            log_std: DVector::from_element(action_dim, init_std.ln().clamp(LOG_STD_MIN, LOG_STD_MAX)),
            normalizer: ObsNormalizer::new(obs_dim),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn num_params(&self) -> usize {
        self.actor.num_params() + self.critic.num_params() + self.log_std.len()
    }

    /// Trainable parameters in a fixed order: actor, critic, log-std.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.actor.write_flat(&mut out);
        self.critic.write_flat(&mut out);
        out.extend_from_slice(self.log_std.as_slice());
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut k = self.actor.read_flat(flat);
        k += self.critic.read_flat(&flat[k..]);
        let n = self.log_std.len();
        self.log_std.as_mut_slice().copy_from_slice(&flat[k..k + n]);
    }

    pub fn clamp_log_std(&mut self) {
        self.log_std.apply(|v| *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    }

    /// Action means and values for already-normalised observations (`obs_dim x batch`).
    pub fn forward(&self, obs: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let mean = self.actor.forward(obs);
        let value = self.critic.forward(obs);
        (mean, value.row(0).transpose())
    }

    /// Entropy of the diagonal Gaussian.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|s| s + 0.5 * (LN_2PI + 1.0)).sum()
    }
}

/// Log density of `action` under `N(mean, diag(exp(log_std))^2)`.
pub fn log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, s), a)| {
            let z = (a - m) * (-s).exp();
            -0.5 * z * z - s - 0.5 * LN_2PI
        })
        .sum()
}

/// Draw one action around `mean`; returns the action and its log density.
pub fn sample_action<R: Rng + ?Sized>(log_std: &[f64], mean: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let action: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(m, s)| {
            let e: f64 = rng.sample(StandardNormal);
            m + s.exp() * e
        })
        .collect();
    let lp = log_prob(mean, log_std, &action);
    (action, lp)
}
