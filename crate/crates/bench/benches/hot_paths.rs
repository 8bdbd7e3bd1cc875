use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quietgait::acoustics::{welch_psd, AudioClip};
use quietgait::ppolearn::PolicyParams;
use quietgait::quietenv::{reset, step_env, EnvConfig, Phase, ACTION_DIM};
use quietgait::rigidsim::{pd_torques, step, ActuatorCommand, RobotModel, SimState, Terrain};

fn physics(c: &mut Criterion) {
    let model = RobotModel::default();
    let terrain = Terrain::flat(0.6);
    let state = SimState::standing(&model);
    let mut cmd = ActuatorCommand::hold(&model);
    cmd.target_joint_positions[0] += 0.2;
    c.bench_function("rigidsim_step", |b| {
        b.iter(|| {
            let tau = pd_torques(&model, &state, &cmd).unwrap();
            black_box(step(&model, black_box(&state), &tau, &terrain, 1.0 / 400.0).unwrap())
        })
    });
}

fn environment(c: &mut Criterion) {
    let config = EnvConfig::default();
    let model = RobotModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (episode, _) = reset(&config, &model, Phase::Noisy, &mut rng);
    let action = vec![0.1; ACTION_DIM];
    c.bench_function("quietenv_control_step", |b| {
        b.iter(|| {
            let mut ep = episode.clone();
            black_box(step_env(&config, &mut ep, &action, &mut rng).unwrap())
        })
    });
}

fn policy(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = PolicyParams::new(61, ACTION_DIM, &[128, 128, 128], 1.0, &mut rng);
    let obs = DMatrix::from_fn(61, 256, |_, _| rng.random_range(-1.0..1.0));
    c.bench_function("policy_forward_256", |b| b.iter(|| black_box(params.forward(black_box(&obs)))));
}

fn spectral(c: &mut Criterion) {
    let clip = AudioClip::tone(48_000.0, 996.09, 0.5, 48_000);
    c.bench_function("welch_psd_1s_48k", |b| b.iter(|| black_box(welch_psd(black_box(&clip), 4096, 0.5).unwrap())));
}

criterion_group!(benches, physics, environment, policy, spectral);
criterion_main!(benches);
