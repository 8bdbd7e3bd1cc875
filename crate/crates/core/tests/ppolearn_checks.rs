//! PPO learner checks: forward re-evaluation, GAE and gradient oracles,
//! update mechanics and checkpoint round-trips.

mod common;

use nalgebra::{DMatrix, DVector};
use quietgait::ppolearn::{
    elu, gae, load_checkpoint, ppo_loss, ppo_update, save_checkpoint, Checkpoint, Minibatch, Optimizer, PolicyParams,
    PpoConfig, PpoError, RolloutBuffer,
};
use quietgait::quietenv::{EnvConfig, Phase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn forward_matches_layer_by_layer_reevaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let params = PolicyParams::new(61, 24, &[128, 128, 128], 1.0, &mut rng);
    let x = DMatrix::from_fn(61, 5, |_, _| rng.random_range(-2.0..2.0));
    let (mean, value) = params.forward(&x);
    for col in 0..5 {
        for (net, out) in [(&params.actor, mean.column(col).iter().copied().collect::<Vec<_>>()), (&params.critic, vec![value[col]])] {
            let mut a: Vec<f64> = x.column(col).iter().copied().collect();
            let last = net.layers.len() - 1;
            for (li, layer) in net.layers.iter().enumerate() {
                let mut next = vec![0.0; layer.outputs()];
                for r in 0..layer.outputs() {
                    let mut s = layer.bias[r];
                    for c in 0..layer.inputs() {
                        s += layer.weights[(r, c)] * a[c];
                    }
                    next[r] = if li < last { if s > 0.0 { s } else { s.exp() - 1.0 } } else { s };
                }
                a = next;
            }
            for (p, q) in a.iter().zip(&out) {
                assert!((p - q).abs() <= 1e-12, "{p} vs {q}");
            }
        }
    }
    assert!((elu(-1.0) - (std::f64::consts::E.recip() - 1.0)).abs() < 1e-15);
}

#[test]
fn zero_weights_give_zero_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut params = PolicyParams::new(58, 24, &[128, 128, 128], 1.0, &mut rng);
    params.set_flat(&vec![0.0; params.num_params()]);
    let x = DMatrix::from_fn(58, 3, |i, j| (i + j) as f64);
    let (mean, value) = params.forward(&x);
    assert!(mean.iter().all(|v| *v == 0.0) && value.iter().all(|v| *v == 0.0));
}

#[test]
fn gae_matches_bruteforce_on_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let n = 100;
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.05)).collect();
        let b = rng.random_range(-1.0..1.0);
        let (a, ret) = gae(&r, &v, &d, b, 0.99, 0.95);
        let want = common::gae_bruteforce(&r, &v, &d, b, 0.99, 0.95);
        for t in 0..n {
            assert!((a[t] - want[t]).abs() <= 1e-10);
            assert!((ret[t] - (want[t] + v[t])).abs() <= 1e-10);
        }
    }
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    for seed in 0..3 {
        let (params, mb, cfg) = common::toy_problem(seed, 16);
        let err = common::max_gradient_error(&params, &mb, &cfg);
        assert!(err < 1e-4, "seed {seed}: max relative error {err}");
    }
}

#[test]
fn zero_advantages_give_no_policy_gradient() {
    let (params, mut mb, mut cfg) = common::toy_problem(5, 8);
    mb.advantages = DVector::zeros(8);
    cfg.entropy_coef = 0.0;
    cfg.value_loss_coef = 0.0;
    let (loss, grad) = ppo_loss(&params, &mb, &cfg, true);
    assert_eq!(loss.policy, 0.0);
    assert!(grad.unwrap().to_flat().iter().all(|g| *g == 0.0));
}

#[test]
fn surrogate_uses_clipped_ratio() {
    // one sample with ratio 1.5 and positive advantage
    let (params, mb, cfg) = common::toy_problem(6, 1);
    let (mean, _) = params.forward(&mb.observations);
    let ls: Vec<f64> = params.log_std.iter().copied().collect();
    let m: Vec<f64> = mean.column(0).iter().copied().collect();
    let a: Vec<f64> = mb.actions.column(0).iter().copied().collect();
    let lp = quietgait::ppolearn::log_prob(&m, &ls, &a);
    let one = Minibatch {
        old_log_probs: DVector::from_element(1, lp - 1.5f64.ln()),
        advantages: DVector::from_element(1, 2.0),
        ..mb
    };
    let (loss, _) = ppo_loss(&params, &one, &cfg, false);
    assert!((loss.policy + 1.2 * 2.0).abs() < 1e-12, "{}", loss.policy);
}

fn random_buffer(rng: &mut ChaCha8Rng, params: &PolicyParams, n_envs: usize, n_steps: usize) -> RolloutBuffer {
    let d = params.obs_dim();
    let a = params.action_dim();
    let mut buf = RolloutBuffer::new(n_envs, n_steps, d, a);
    for _ in 0..n_envs * n_steps {
        let obs: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (mean, value) = params.forward(&DMatrix::from_column_slice(d, 1, &obs));
        let m: Vec<f64> = mean.iter().copied().collect();
        let ls: Vec<f64> = params.log_std.iter().copied().collect();
        let (act, lp) = quietgait::ppolearn::sample_action(&ls, &m, rng);
        buf.observations.extend(obs);
        buf.actions.extend(act);
        buf.action_means.extend(m);
        buf.log_probs.push(lp);
        buf.values.push(value[0]);
        buf.rewards.push(rng.random_range(-1.0..1.0));
        buf.dones.push(rng.random_bool(0.05));
    }
    buf.bootstrap = (0..n_envs).map(|_| rng.random_range(-1.0..1.0)).collect();
    buf.log_std = params.log_std.iter().copied().collect();
    buf
}

#[test]
fn update_is_deterministic_and_keeps_bounds() {
    let cfg = PpoConfig { hidden: vec![16, 16], ..PpoConfig::default() };
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut params = PolicyParams::new(10, 24, &cfg.hidden, cfg.init_std, &mut rng);
        let mut opt = Optimizer::new(&params, &cfg);
        let mut lrs = vec![];
        for _ in 0..5 {
            let buf = random_buffer(&mut rng, &params, 8, 24);
            let stats = ppo_update(&mut params, &mut opt, &buf, &cfg, &mut rng).unwrap();
            assert!(stats.learning_rate >= cfg.lr_min && stats.learning_rate <= cfg.lr_max);
            assert!(params.log_std.iter().all(|s| *s >= quietgait::ppolearn::LOG_STD_MIN && *s <= quietgait::ppolearn::LOG_STD_MAX));
            lrs.push(stats.learning_rate);
        }
        (params.to_flat(), lrs)
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(la, lb);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn non_finite_loss_aborts_update() {
    let cfg = PpoConfig { hidden: vec![8], ..PpoConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut params = PolicyParams::new(4, 24, &cfg.hidden, 1.0, &mut rng);
    let mut opt = Optimizer::new(&params, &cfg);
    let mut buf = random_buffer(&mut rng, &params, 2, 24);
    buf.rewards[3] = f64::NAN;
    let before = params.clone();
    let err = ppo_update(&mut params, &mut opt, &buf, &cfg, &mut rng).unwrap_err();
    assert!(matches!(err, PpoError::NonFinite(_)));
    assert_eq!(params, before);
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut params = PolicyParams::new(61, 24, &[128, 128, 128], 1.0, &mut rng);
    params.normalizer.update(&(0..61 * 7).map(|i| (i as f64).sin() * 1e-3 + 1.0 / 3.0).collect::<Vec<_>>());
    let text = save_checkpoint(&params, &EnvConfig::default(), &PpoConfig::default(), 42, Phase::Quiet);
    let (loaded, ck) = load_checkpoint(&text).unwrap();
    assert_eq!(ck.iteration, 42);
    assert_eq!(ck.phase, Phase::Quiet);
    let a = params.to_flat();
    let b = loaded.to_flat();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(loaded.normalizer, params.normalizer);
}

#[test]
fn truncated_checkpoint_is_a_parse_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let params = PolicyParams::new(8, 24, &[4], 1.0, &mut rng);
    let text = save_checkpoint(&params, &EnvConfig::default(), &PpoConfig::default(), 1, Phase::Noisy);
    let err = load_checkpoint(&text[..text.len() / 2]).unwrap_err();
    assert!(matches!(err, PpoError::Parse { .. }), "{err}");
    let bad = text.replacen("\"iteration\":1", "\"iteration\":\"one\"", 1);
    match load_checkpoint(&bad).unwrap_err() {
        PpoError::Parse { path, .. } => assert_eq!(path, "iteration"),
        other => panic!("{other}"),
    }
}

#[test]
fn obs_dim_mismatch_names_the_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = PolicyParams::new(61, 24, &[8], 1.0, &mut rng);
    let text = save_checkpoint(&params, &EnvConfig::default(), &PpoConfig::default(), 1, Phase::Noisy);
    let ck = Checkpoint::from_json(&text).unwrap();
    match ck.check_compatible(58, 24).unwrap_err() {
        PpoError::Incompatible { layer, .. } => assert_eq!(layer, "actor.0"),
        other => panic!("{other}"),
    }
    assert!(ck.check_compatible(61, 24).is_ok());
}
