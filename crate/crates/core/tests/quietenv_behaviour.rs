//! Environment-level checks: reset statistics, action mapping, observation noise,
//! reward arithmetic, termination and an end-to-end standing episode.

use nalgebra::{UnitQuaternion, Vector3};
use quietgait::quietenv::{
    apply_action, compute_rewards, layout, observe, reset, step_env, CommandRanges, ContactVelocityMode, DoneReason,
    EnvConfig, EpisodeState, NoiseLevels, Phase, RandomizationConfig, Range, RewardTerm, VecEnv, ACTION_DIM,
    NUM_REWARD_TERMS,
};
use quietgait::rigidsim::{foot_kinematics, ContactReport, RobotModel, SimState, NUM_JOINTS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quiet_config() -> EnvConfig {
    EnvConfig {
        randomization: RandomizationConfig::disabled(),
        commands: CommandRanges { lin_vel_x: Range(0.0, 0.0), lin_vel_y: Range(0.0, 0.0), ang_vel_z: Range(0.0, 0.0) },
        ..EnvConfig::default()
    }
}

fn zero_noise() -> NoiseLevels {
    NoiseLevels {
        joint_positions: 0.0,
        joint_velocities: 0.0,
        last_joint_targets: 0.0,
        last_gain_scales: 0.0,
        foot_contacts: 0.0,
        gravity_orientation: 0.0,
        commands: 0.0,
        gyro: 0.0,
    }
}

/// Two-sided one-sample Kolmogorov-Smirnov p-value (asymptotic series).
fn ks_uniform_p_value(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

#[test]
fn equal_seeds_give_identical_resets() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let (a, oa) = reset(&cfg, &model, Phase::Noisy, &mut ChaCha8Rng::seed_from_u64(9));
    let (b, ob) = reset(&cfg, &model, Phase::Noisy, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(a.state, b.state);
    assert_eq!(a.episode, b.episode);
    assert_eq!(a.terrain, b.terrain);
    assert_eq!(oa, ob);
}

#[test]
fn zero_width_friction_is_the_only_value() {
    let mut cfg = EnvConfig::default();
    cfg.randomization.friction = Range(0.55, 0.55);
    let model = RobotModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let (ep, _) = reset(&cfg, &model, Phase::Noisy, &mut rng);
        assert_eq!(ep.terrain.friction_coefficient, 0.55);
        assert_eq!(ep.episode.dr.friction, 0.55);
    }
}

#[test]
fn initial_joint_perturbation_is_uniform() {
    let cfg = EnvConfig { randomization: RandomizationConfig::disabled(), ..EnvConfig::default() };
    let model = RobotModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut deltas = Vec::with_capacity(10_000);
    for k in 0..10_000 {
        let (ep, _) = reset(&cfg, &model, Phase::Noisy, &mut rng);
        let j = k % NUM_JOINTS;
        deltas.push(ep.state.joint_positions[j] - model.default_pose[j]);
    }
    assert!(deltas.iter().all(|d| d.abs() <= 0.05 + 1e-15));
    let p = ks_uniform_p_value(deltas, -0.05, 0.05);
    assert!(p > 0.01, "KS p-value {p}");
}

#[test]
fn reset_starts_at_rest_above_terrain() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let (ep, obs) = reset(&cfg, &model, Phase::Quiet, &mut ChaCha8Rng::seed_from_u64(3));
    assert_eq!(ep.state.base_linear_velocity, Vector3::zeros());
    assert_eq!(ep.state.joint_velocities, [0.0; NUM_JOINTS]);
    assert!(ep.state.base_position.z >= model.stand_height);
    assert_eq!(ep.episode.phase, Phase::Quiet);
    assert_eq!(obs.len(), 61);
}

#[test]
fn zero_action_holds_default_pose() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let cmd = apply_action(&cfg, &model, &[0.0; ACTION_DIM]).unwrap();
    assert_eq!(cmd.target_joint_positions, model.default_pose);
    assert_eq!(cmd.gain_scale_inputs, [0.0; NUM_JOINTS]);
}

#[test]
fn large_action_is_clipped_then_limited() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let mut a = [0.0; ACTION_DIM];
    a[0] = 10.0;
    let cmd = apply_action(&cfg, &model, &a).unwrap();
    let (lo, hi) = model.joint_limits()[0];
    let want = (model.default_pose[0] + 1.0).clamp(lo, hi);
    assert_eq!(cmd.target_joint_positions[0], want);
    // roll joint: 4 * 0.25 = 1.0 rad exceeds the 0.6 limit
    a[1] = 10.0;
    let cmd = apply_action(&cfg, &model, &a).unwrap();
    assert_eq!(cmd.target_joint_positions[1], 0.6);
}

#[test]
fn very_negative_gain_input_clips_to_six() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let mut a = [0.0; ACTION_DIM];
    a[NUM_JOINTS] = -100.0;
    let cmd = apply_action(&cfg, &model, &a).unwrap();
    assert_eq!(cmd.gain_scale_inputs[0], -6.0);
    let (p, _) = cfg.gains.gains(cmd.gain_scale_inputs[0]);
    // independent evaluation of 3 + 4 / (1 + e^6)
    let sigma = 1.0 / (1.0 + 6f64.exp());
    assert!((sigma - 0.00247).abs() < 1e-5);
    assert!((p - (3.0 + 4.0 * sigma)).abs() < 1e-12);
    assert!((p - 3.0099).abs() < 1e-4);
}

#[test]
fn non_finite_or_short_action_rejected() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let mut a = [0.0; ACTION_DIM];
    a[5] = f64::NAN;
    assert!(apply_action(&cfg, &model, &a).is_err());
    assert!(apply_action(&cfg, &model, &[0.0; 12]).is_err());
}

#[test]
fn disabled_gain_action_pins_inputs() {
    let cfg = EnvConfig { gain_action_enabled: false, fixed_gain_input: 0.0, ..EnvConfig::default() };
    let model = RobotModel::default();
    let a = [3.0; ACTION_DIM];
    let cmd = apply_action(&cfg, &model, &a).unwrap();
    assert_eq!(cmd.gain_scale_inputs, [0.0; NUM_JOINTS]);
    let (p, d) = cfg.gains.gains(0.0);
    assert_eq!((p, d), (5.0, 0.04));
}

fn sample_episode(model: &RobotModel) -> EpisodeState {
    let cfg = EnvConfig::default();
    let (ep, _) = reset(&cfg, model, Phase::Noisy, &mut ChaCha8Rng::seed_from_u64(4));
    let mut e = ep.episode;
    e.command = [0.2, -0.05, 0.3];
    e.joint_targets[3] += 0.1;
    e.gain_inputs[7] = 2.0;
    e
}

fn walking_state(model: &RobotModel) -> SimState {
    let mut s = SimState::standing(model);
    s.base_orientation = UnitQuaternion::from_euler_angles(0.1, -0.05, 0.7);
    s.base_linear_velocity = Vector3::new(0.1, 0.2, -0.03);
    s.base_angular_velocity = Vector3::new(0.3, -0.2, 0.4);
    for j in 0..NUM_JOINTS {
        s.joint_positions[j] += 0.05 * (j as f64).sin();
        s.joint_velocities[j] = (j as f64 * 0.7).cos();
    }
    s
}

#[test]
fn zero_noise_observation_is_ground_truth() {
    let cfg = EnvConfig { noise: zero_noise(), ..EnvConfig::default() };
    let model = RobotModel::default();
    let s = walking_state(&model);
    let e = sample_episode(&model);
    let mut contact = ContactReport::default();
    contact.feet[2].in_contact = true;
    let obs = observe(&cfg, &s, &contact, &e, &mut ChaCha8Rng::seed_from_u64(0));
    let o = obs.as_slice();
    assert_eq!(&o[layout::JOINT_POSITIONS], &s.joint_positions);
    assert_eq!(&o[layout::JOINT_VELOCITIES], &s.joint_velocities);
    assert_eq!(&o[layout::JOINT_TARGETS], &e.joint_targets);
    assert_eq!(&o[layout::GAIN_INPUTS], &e.gain_inputs);
    assert_eq!(&o[layout::FOOT_CONTACTS], &[0.0, 0.0, 1.0, 0.0]);
    let g = s.base_orientation.inverse_transform_vector(&Vector3::new(0.0, 0.0, -1.0));
    assert_eq!(&o[layout::GRAVITY], g.as_slice());
    assert_eq!(&o[layout::COMMAND], &e.command);
    assert_eq!(&o[layout::GYRO], s.base_angular_velocity.as_slice());

    // determinism with a different rng when noise is off
    let again = observe(&cfg, &s, &contact, &e, &mut ChaCha8Rng::seed_from_u64(99));
    assert_eq!(obs, again);

    let masked = EnvConfig { mask_foot_contacts: true, ..cfg };
    let o = observe(&masked, &s, &contact, &e, &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(&o.as_slice()[layout::FOOT_CONTACTS], &[0.0; 4]);
}

#[test]
fn observation_noise_is_bounded() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let s = walking_state(&model);
    let e = sample_episode(&model);
    let contact = ContactReport::default();
    let truth = observe(&EnvConfig { noise: zero_noise(), ..cfg.clone() }, &s, &contact, &e, &mut ChaCha8Rng::seed_from_u64(0));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut max_pos: f64 = 0.0;
    let mut max_grav: f64 = 0.0;
    for _ in 0..5000 {
        let o = observe(&cfg, &s, &contact, &e, &mut rng);
        for i in layout::JOINT_POSITIONS {
            max_pos = max_pos.max((o.0[i] - truth.0[i]).abs());
        }
        for i in layout::GRAVITY {
            max_grav = max_grav.max((o.0[i] - truth.0[i]).abs());
        }
        for i in layout::JOINT_TARGETS.chain(layout::GAIN_INPUTS).chain(layout::FOOT_CONTACTS) {
            assert_eq!(o.0[i], truth.0[i]);
        }
        assert!(o.0.iter().all(|v| v.is_finite()));
    }
    assert!(max_pos <= 0.01 && max_pos > 0.009);
    assert!(max_grav <= 0.05 && max_grav > 0.045);
}

fn rewards_for(
    cfg: &EnvConfig,
    phase: Phase,
    state: &SimState,
    contact: &ContactReport,
    episode: &EpisodeState,
) -> quietgait::quietenv::RewardBreakdown {
    let model = RobotModel::default();
    compute_rewards(cfg, phase, &model, state, state, contact, episode, &[0.0; NUM_JOINTS])
}

#[test]
fn perfect_tracking_earns_full_dt() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let mut s = SimState::standing(&model);
    s.base_orientation = UnitQuaternion::from_euler_angles(0.0, 0.0, 0.4);
    let mut e = sample_episode(&model);
    e.command = [0.2, 0.05, -0.3];
    s.base_linear_velocity = s.base_orientation * Vector3::new(0.2, 0.05, 0.0);
    s.base_angular_velocity = Vector3::new(0.0, 0.0, -0.3);
    let r = rewards_for(&cfg, Phase::Noisy, &s, &ContactReport::default(), &e);
    assert!((r.get(RewardTerm::LinVelTracking) - cfg.control_dt).abs() < 1e-12);
    assert!((r.get(RewardTerm::AngVelTracking) - cfg.control_dt).abs() < 1e-12);
}

#[test]
fn tracking_error_of_sigma_gives_inverse_e() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let mut s = SimState::standing(&model);
    let mut e = sample_episode(&model);
    e.command = [0.0, 0.0, 0.0];
    s.base_linear_velocity = Vector3::new(0.06f64.sqrt(), 0.0, 0.0);
    let r = rewards_for(&cfg, Phase::Noisy, &s, &ContactReport::default(), &e);
    let raw = r.get(RewardTerm::LinVelTracking) / cfg.control_dt;
    assert!((raw - 0.367879).abs() < 1e-6, "{raw}");
}

#[test]
fn air_time_credit_at_touchdown() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let s = SimState::standing(&model);
    let mut e = sample_episode(&model);
    e.prev_joint_targets = e.joint_targets;
    let mut contact = ContactReport::default();
    contact.feet[1].in_contact = true;
    contact.feet[1].touchdown = true;
    contact.feet[1].air_time = 0.5;
    let r = rewards_for(&cfg, Phase::Noisy, &s, &contact, &e);
    assert!((r.get(RewardTerm::FootAirTime) - 0.006).abs() < 1e-12);
    // no touchdown, no credit
    contact.feet[1].touchdown = false;
    let r = rewards_for(&cfg, Phase::Noisy, &s, &contact, &e);
    assert_eq!(r.get(RewardTerm::FootAirTime), 0.0);
}

#[test]
fn quiet_contact_velocity_penalty() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let s = SimState::standing(&model);
    let e = sample_episode(&model);
    let mut contact = ContactReport::default();
    contact.feet[0].in_contact = true;
    contact.feet[0].touchdown = true;
    contact.feet[0].touchdown_speed = 0.2;
    let r = rewards_for(&cfg, Phase::Quiet, &s, &contact, &e);
    assert!((r.get(RewardTerm::FootContactVelocity) + 0.01).abs() < 1e-12);
    let noisy = rewards_for(&cfg, Phase::Noisy, &s, &contact, &e);
    assert!((noisy.get(RewardTerm::FootContactVelocity) + 0.002).abs() < 1e-12);

    // default mode: no touchdown, no penalty even while in contact and moving
    contact.feet[0].touchdown = false;
    let mut moving = s.clone();
    moving.base_linear_velocity = Vector3::new(0.3, 0.0, 0.0);
    let r = rewards_for(&cfg, Phase::Quiet, &moving, &contact, &e);
    assert_eq!(r.get(RewardTerm::FootContactVelocity), 0.0);
    let continuous = EnvConfig { contact_velocity_mode: ContactVelocityMode::Continuous, ..cfg };
    let r = rewards_for(&continuous, Phase::Quiet, &moving, &contact, &e);
    assert!(r.get(RewardTerm::FootContactVelocity) < 0.0);
}

#[test]
fn phase_scale_ratios() {
    let cfg = EnvConfig::default();
    let (n, q) = (&cfg.rewards.noisy, &cfg.rewards.quiet);
    assert_eq!(q.get(RewardTerm::FootContactVelocity) / n.get(RewardTerm::FootContactVelocity), 5.0);
    assert_eq!(q.get(RewardTerm::JointAccel) / n.get(RewardTerm::JointAccel), 2.0);
    assert_eq!(q.get(RewardTerm::BaseAngAccel) / n.get(RewardTerm::BaseAngAccel), 2.0);
    for t in RewardTerm::ALL {
        if !RewardTerm::NOISE_PENALTIES.contains(&t) {
            assert_eq!(q.get(t), n.get(t), "{}", t.name());
        }
    }
}

#[test]
fn breakdown_is_complete_and_signed() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let s = walking_state(&model);
    let mut prev = s.clone();
    prev.joint_velocities[4] -= 3.0;
    prev.base_angular_velocity.x += 1.0;
    let e = sample_episode(&model);
    let mut contact = ContactReport::default();
    contact.feet[3].in_contact = true;
    contact.feet[3].touchdown = true;
    contact.feet[3].touchdown_speed = 0.3;
    contact.feet[3].air_time = 0.1;
    contact.self_collision_count = 1;
    let tau = [0.5; NUM_JOINTS];
    for phase in [Phase::Noisy, Phase::Quiet] {
        let r = compute_rewards(&cfg, phase, &model, &s, &prev, &contact, &e, &tau);
        assert_eq!(r.terms.len(), NUM_REWARD_TERMS);
        assert!((r.total() - r.terms.iter().sum::<f64>()).abs() <= 1e-12);
        for t in RewardTerm::ALL {
            let v = r.get(t);
            assert!(v.is_finite());
            match t {
                RewardTerm::LinVelTracking | RewardTerm::AngVelTracking => {
                    assert!(v > 0.0 && v <= cfg.control_dt)
                }
                RewardTerm::FootAirTime => {}
                _ => assert!(v <= 0.0, "{} = {v}", t.name()),
            }
        }
        assert!(r.get(RewardTerm::SelfCollision) < 0.0);
        assert!(r.get(RewardTerm::JointAccel) < 0.0);
        assert!(r.get(RewardTerm::BaseAngAccel) < 0.0);
    }
}

#[test]
fn slip_term_uses_forward_kinematics_velocities() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let s = walking_state(&model);
    let e = sample_episode(&model);
    let mut contact = ContactReport::default();
    contact.feet[0].in_contact = true;
    contact.feet[2].in_contact = true;
    let raw = quietgait::quietenv::raw_terms(&cfg, &model, &s, &s, &contact, &e, &[0.0; NUM_JOINTS]);
    let feet = foot_kinematics(&model, &s);
    let want: f64 = [0, 2].iter().map(|&l| feet[l].velocity.x.powi(2) + feet[l].velocity.y.powi(2)).sum();
    assert!((raw[RewardTerm::FootSlip.index()] - want).abs() < 1e-14);
}

#[test]
fn standing_with_zero_action_lasts_the_full_episode() {
    let mut cfg = quiet_config();
    cfg.noise = zero_noise();
    cfg.init_joint_noise = 0.0;
    cfg.random_initial_yaw = false;
    let model = RobotModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut ep, _) = reset(&cfg, &model, Phase::Noisy, &mut rng);
    let zero = [0.0; ACTION_DIM];
    let mut steps = 0;
    let mut tracking = 0.0;
    let mut other = 0.0;
    loop {
        let out = step_env(&cfg, &mut ep, &zero, &mut rng).unwrap();
        steps += 1;
        if steps > 100 {
            tracking += out.reward.tracking();
            other += out.reward.total() - out.reward.tracking();
        }
        if let Some(reason) = out.done {
            assert_eq!(reason, DoneReason::Timeout);
            break;
        }
    }
    assert_eq!(steps, 2000);
    assert!((ep.episode.elapsed - 20.0).abs() < 1e-9);
    assert!(ep.state.base_position.z > 0.1);
    assert!(other.abs() < 0.01 * tracking, "tracking {tracking} other {other}");
    assert!(ep.episode.tracking_score > 1.9 && ep.episode.tracking_score <= 2.0);
}

#[test]
fn large_tilt_terminates_as_fall() {
    let cfg = quiet_config();
    let model = RobotModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut ep, _) = reset(&cfg, &model, Phase::Noisy, &mut rng);
    ep.state.base_position.z = 1.0;
    ep.state.base_orientation = UnitQuaternion::from_euler_angles(1.05, 0.0, 0.0);
    let out = step_env(&cfg, &mut ep, &[0.0; ACTION_DIM], &mut rng).unwrap();
    assert_eq!(out.done, Some(DoneReason::Fall));

    let (mut ep, _) = reset(&cfg, &model, Phase::Noisy, &mut rng);
    ep.state.base_position.z = 1.0;
    ep.state.base_orientation = UnitQuaternion::from_euler_angles(0.0, 0.95, 0.0);
    let out = step_env(&cfg, &mut ep, &[0.0; ACTION_DIM], &mut rng).unwrap();
    assert_eq!(out.done, None);
}

#[test]
fn disturbance_fires_every_four_seconds() {
    let mut cfg = quiet_config();
    cfg.randomization.velocity_disturbance = Range(-0.2, 0.2);
    let model = RobotModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut ep, _) = reset(&cfg, &model, Phase::Noisy, &mut rng);
    let mut ticks = vec![];
    for k in 1..=1000 {
        let out = step_env(&cfg, &mut ep, &[0.0; ACTION_DIM], &mut rng).unwrap();
        if out.info.disturbed {
            ticks.push(k);
        }
    }
    assert_eq!(ticks, vec![400, 800]);
}

#[test]
fn vec_env_is_deterministic_and_phase_is_global() {
    let cfg = EnvConfig::default();
    let model = RobotModel::default();
    let run = || {
        let mut env = VecEnv::new(cfg.clone(), model.clone(), 4, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rewards = vec![];
        for k in 0..50 {
            if k == 25 {
                env.set_phase(Phase::Quiet);
            }
            let actions: Vec<f64> = (0..4 * ACTION_DIM).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
            let out = env.step(&actions, ACTION_DIM).unwrap();
            rewards.extend(out.rewards);
            assert_eq!(out.observations.len(), 4 * 61);
        }
        for i in 0..4 {
            assert_eq!(env.episode(i).episode.phase, Phase::Quiet);
        }
        (rewards, env.observations())
    };
    assert_eq!(run(), run());
}
