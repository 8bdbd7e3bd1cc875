//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use quietgait::ppolearn::{log_prob, ppo_loss, Minibatch, PolicyParams, PpoConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Advantage as an explicit double sum over future TD errors.
pub fn gae_bruteforce(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    let delta = |t: usize| rewards[t] + gamma * next_value(t) * if dones[t] { 0.0 } else { 1.0 } - values[t];
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for l in 0..n - t {
                let alive = (t..t + l).all(|k| !dones[k]);
                if !alive {
                    break;
                }
                sum += (gamma * lambda).powi(l as i32) * delta(t + l);
            }
            sum
        })
        .collect()
}

/// Random toy problem for gradient checks: obs 6, hidden 4, 24 actions.
pub fn toy_problem(seed: u64, batch: usize) -> (PolicyParams, Minibatch, PpoConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = PolicyParams::new(6, 24, &[4, 4, 4], 1.0, &mut rng);
    // move away from the tiny-output init so every term contributes
    let mut flat = params.to_flat();
    for v in flat.iter_mut() {
        *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
    }
    params.set_flat(&flat);
    let obs = DMatrix::from_fn(6, batch, |_, _| rng.sample(StandardNormal));
    let (mean, values) = params.forward(&obs);
    let actions = DMatrix::from_fn(24, batch, |i, j| mean[(i, j)] + params.log_std[i].exp() * rng.sample::<f64, _>(StandardNormal));
    let ls: Vec<f64> = params.log_std.iter().copied().collect();
    let old_log_probs = DVector::from_fn(batch, |j, _| {
        let m: Vec<f64> = mean.column(j).iter().copied().collect();
        let a: Vec<f64> = actions.column(j).iter().copied().collect();
        log_prob(&m, &ls, &a) + rng.random_range(-0.5..0.5)
    });
    let old_values = DVector::from_fn(batch, |j, _| values[j] + rng.random_range(-0.5..0.5));
    let mut advantages = DVector::from_fn(batch, |_, _| rng.sample(StandardNormal));
    quietgait::ppolearn::normalize_advantages(&mut advantages);
    let returns = DVector::from_fn(batch, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mb = Minibatch {
        observations: obs,
        actions,
        old_means: mean,
        old_log_std: params.log_std.clone(),
        old_log_probs,
        old_values,
        advantages,
        returns,
    };
    (params, mb, PpoConfig::default())
}

/// Maximum relative error between the analytic gradient of the total PPO loss
/// and central differences with step 1e-5.
pub fn max_gradient_error(params: &PolicyParams, mb: &Minibatch, config: &PpoConfig) -> f64 {
    let (_, grad) = ppo_loss(params, mb, config, true);
    let analytic = grad.unwrap().to_flat();
    let base = params.to_flat();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut p = params.clone();
    for k in 0..base.len() {
        let mut plus = base.clone();
        plus[k] += eps;
        p.set_flat(&plus);
        let lp = ppo_loss(&p, mb, config, false).0.total;
        let mut minus = base.clone();
        minus[k] -= eps;
        p.set_flat(&minus);
        let lm = ppo_loss(&p, mb, config, false).0.total;
        let numeric = (lp - lm) / (2.0 * eps);
        let scale = analytic[k].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[k] - numeric).abs() / scale);
    }
    worst
}

/// Direct O(n^2) discrete Fourier transform.
pub fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re, im)
        })
        .collect()
}

/// Welch PSD computed from first principles: Hamming segments, 50% overlap,
/// one-sided power scaled so a bin-centred tone of amplitude A reports A^2/2.
pub fn naive_welch(x: &[f64], window: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..window)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / window as f64).cos())
        .collect();
    let sum_w: f64 = w.iter().sum();
    let hop = window / 2;
    let mut acc = vec![0.0; window / 2 + 1];
    let mut segments = 0;
    let mut start = 0;
    while start + window <= x.len() {
        let seg: Vec<f64> = (0..window).map(|i| x[start + i] * w[i]).collect();
        let spec = naive_dft(&seg);
        for k in 0..=window / 2 {
            let (re, im) = spec[k];
            let mag2 = (re * re + im * im) / (sum_w * sum_w);
            let one_sided = if k == 0 || k == window / 2 { 1.0 } else { 2.0 };
            acc[k] += one_sided * mag2;
        }
        segments += 1;
        start += hop;
    }
    acc.iter().map(|v| v / segments as f64).collect()
}
