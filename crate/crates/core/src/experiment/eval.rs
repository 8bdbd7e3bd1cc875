//! Deterministic policy evaluation: penalty metrics, slope and DR sweeps, gain traces.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::acoustics::{
    band_power_db, impact_proxy_signal, sim_penalty_metrics, welch_psd, AudioClip, PenaltyMetrics, TrajectoryRecord,
    SILENCE_DB,
};
use crate::ppolearn::PolicyParams;
use crate::quietenv::{reset, step_env, worker_threads, DoneReason, EnvConfig, EnvError, Episode, Phase, Range, StepOutcome};
use crate::rigidsim::{foot_kinematics, sigmoid, RobotModel, FORE_RIGHT, JOINTS_PER_LEG, NUM_JOINTS, NUM_LEGS};

use super::metrics::fmt_f64;

/// Sample rate of the impact proxy signal, Hz.
pub const PROXY_RATE: f64 = 48_000.0;
/// Audible band used for proxy band power, Hz.
pub const AUDIBLE_BAND: (f64, f64) = (20.0, 20_000.0);
/// Window over which penalty metrics are averaged, s.
pub const METRICS_WINDOW: f64 = 10.0;
/// Distance that counts as having traversed a slope, m.
pub const SLOPE_SUCCESS_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub episodes: usize,
    /// s
    pub duration: f64,
    /// Body-frame (v_x, v_y, w_z).
    pub command: [f64; 3],
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { episodes: 10, duration: 20.0, command: [0.2, 0.0, 0.0], seed: 0 }
    }
}

/// Build the environment used to evaluate a policy: physical settings come from
/// `eval_env`, while everything the policy's input/output interface depends on
/// comes from the environment it was trained in. The command is pinned.
pub fn evaluation_env(policy_env: &EnvConfig, eval_env: &EnvConfig, command: [f64; 3], duration: f64) -> EnvConfig {
    let mut env = eval_env.clone();
    env.include_gyro_observation = policy_env.include_gyro_observation;
    env.mask_foot_contacts = policy_env.mask_foot_contacts;
    env.action_scale = policy_env.action_scale;
    env.action_clip = policy_env.action_clip;
    env.gain_clip = policy_env.gain_clip;
    env.gain_action_enabled = policy_env.gain_action_enabled;
    env.fixed_gain_input = policy_env.fixed_gain_input;
    env.gains = policy_env.gains;
    env.commands.lin_vel_x = Range(command[0], command[0]);
    env.commands.lin_vel_y = Range(command[1], command[1]);
    env.commands.ang_vel_z = Range(command[2], command[2]);
    env.episode_length = duration;
    env
}

/// Everything recorded from one deterministic rollout.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub index: usize,
    pub done: Option<DoneReason>,
    pub steps: usize,
    pub fell: bool,
    pub tracking_score: f64,
    /// Mean body-frame forward velocity, m/s.
    pub mean_forward_velocity: f64,
    /// Mean planar velocity tracking error, m/s.
    pub lin_vel_error: f64,
    /// Displacement along the terrain's forward axis, m.
    pub progress: f64,
    pub metrics: PenaltyMetrics,
    pub records: Vec<TrajectoryRecord>,
}

fn is_fall(reason: Option<DoneReason>) -> bool {
    matches!(reason, Some(DoneReason::Fall | DoneReason::TrunkContact | DoneReason::Diverged))
}

/// Roll out the mean action until termination, `max_steps`, or `stop` returns true.
pub fn run_episode<F>(
    params: &PolicyParams,
    config: &EnvConfig,
    robot: &RobotModel,
    seed: u64,
    index: usize,
    max_steps: usize,
    mut observer: F,
) -> Result<EpisodeResult, EnvError>
where
    F: FnMut(&Episode, &StepOutcome) -> bool,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let (mut ep, mut obs) = reset(config, robot, Phase::Quiet, &mut rng);
    let start = ep.state.base_position;
    let axis = ep.terrain.forward_axis();
    let dt = config.control_dt;
    let mut records = Vec::with_capacity(max_steps);
    let mut done = None;
    let mut forward = 0.0;
    let mut error = 0.0;
    let mut steps = 0;
    while steps < max_steps {
        let action = super::mean_actions(params, &obs.0);
        let out = step_env(config, &mut ep, action.as_slice(), &mut rng)?;
        steps += 1;
        let v = ep.state.base_linear_velocity_body();
        let cmd = ep.episode.command;
        forward += v.x;
        error += ((cmd[0] - v.x).powi(2) + (cmd[1] - v.y).powi(2)).sqrt();
        let touchdown_speeds = out.info.contact.feet.iter().filter(|f| f.touchdown).map(|f| f.touchdown_speed).collect();
        let acc: Vector3<f64> = out.info.base_angular_acceleration;
        records.push(TrajectoryRecord {
            time: (steps - 1) as f64 * dt,
            touchdown_speeds,
            joint_accelerations: out.info.joint_accelerations,
            base_angular_acceleration: [acc.x, acc.y, acc.z],
        });
        let stop = observer(&ep, &out);
        obs = out.observation;
        if out.done.is_some() {
            done = out.done;
            break;
        }
        if stop {
            break;
        }
    }
    let window = METRICS_WINDOW.min(steps as f64 * dt);
    let metrics = sim_penalty_metrics(&records, dt, window).unwrap_or(PenaltyMetrics {
        contact_velocity: None,
        joint_acceleration: 0.0,
        base_angular_acceleration: 0.0,
        duration: 0.0,
        touchdowns: 0,
    });
    let n = steps.max(1) as f64;
    Ok(EpisodeResult {
        index,
        done,
        steps,
        fell: is_fall(done),
        tracking_score: ep.episode.tracking_score,
        mean_forward_velocity: forward / n,
        lin_vel_error: error / n,
        progress: (ep.state.base_position - start).dot(&axis),
        metrics,
        records,
    })
}

/// Band power of the impact proxy built from the first metrics window of each episode.
pub fn proxy_band_power(results: &[EpisodeResult], dt: f64, total_mass: f64) -> f64 {
    let mut samples = vec![];
    for r in results {
        let n = ((METRICS_WINDOW / dt).round() as usize).min(r.records.len());
        samples.extend(impact_proxy_signal(&r.records[..n], dt, total_mass, PROXY_RATE).samples);
    }
    let clip = AudioClip { sample_rate: PROXY_RATE, samples };
    match welch_psd(&clip, 4096, 0.5) {
        Ok(report) => band_power_db(&report, AUDIBLE_BAND.0, AUDIBLE_BAND.1).unwrap_or(SILENCE_DB),
        Err(_) => SILENCE_DB,
    }
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub episodes: usize,
    pub falls: usize,
    pub metrics: PenaltyMetrics,
    pub tracking_score: f64,
    pub mean_forward_velocity: f64,
    pub lin_vel_error: f64,
    pub proxy_band_power_db: f64,
}

impl EvalSummary {
    pub fn from_results(results: &[EpisodeResult], dt: f64, total_mass: f64) -> Self {
        let n = results.len().max(1) as f64;
        let mean = |f: fn(&EpisodeResult) -> f64| results.iter().map(f).sum::<f64>() / n;
        let parts: Vec<PenaltyMetrics> = results.iter().map(|r| r.metrics.clone()).filter(|m| m.duration > 0.0).collect();
        EvalSummary {
            episodes: results.len(),
            falls: results.iter().filter(|r| r.fell).count(),
            metrics: PenaltyMetrics::merge(&parts),
            tracking_score: mean(|r| r.tracking_score),
            mean_forward_velocity: mean(|r| r.mean_forward_velocity),
            lin_vel_error: mean(|r| r.lin_vel_error),
            proxy_band_power_db: proxy_band_power(results, dt, total_mass),
        }
    }

    pub fn mean_touchdown_speed(&self) -> f64 {
        self.metrics.contact_velocity.unwrap_or(f64::NAN)
    }
}

fn pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(worker_threads()).build().expect("thread pool")
}

/// Run `opts.episodes` independent deterministic episodes (in parallel, results in index order).
pub fn evaluate(
    params: &PolicyParams,
    config: &EnvConfig,
    robot: &RobotModel,
    opts: &EvalOptions,
) -> Result<(Vec<EpisodeResult>, EvalSummary), EnvError> {
    let max_steps = (opts.duration / config.control_dt).round() as usize;
    let results: Result<Vec<_>, _> = pool().install(|| {
        (0..opts.episodes)
            .into_par_iter()
            .map(|i| run_episode(params, config, robot, opts.seed, i, max_steps, |_, _| false))
            .collect()
    });
    let results = results?;
    let summary = EvalSummary::from_results(&results, config.control_dt, robot.total_mass());
    Ok((results, summary))
}

pub fn episode_csv_header() -> String {
    "episode,done,steps,fell,tracking_score,mean_forward_velocity,lin_vel_error,progress,touchdowns,contact_velocity,joint_acceleration,base_angular_acceleration".into()
}

pub fn episode_csv_row(r: &EpisodeResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.index,
        r.done.map(|d| d.as_str()).unwrap_or("running"),
        r.steps,
        r.fell,
        fmt_f64(r.tracking_score),
        fmt_f64(r.mean_forward_velocity),
        fmt_f64(r.lin_vel_error),
        fmt_f64(r.progress),
        r.metrics.touchdowns,
        r.metrics.contact_velocity.map(fmt_f64).unwrap_or_default(),
        fmt_f64(r.metrics.joint_acceleration),
        fmt_f64(r.metrics.base_angular_acceleration),
    )
}

pub fn summary_csv_header() -> String {
    "label,episodes,falls,tracking_score,mean_forward_velocity,lin_vel_error,touchdowns,contact_velocity,joint_acceleration,base_angular_acceleration,proxy_band_power_db".into()
}

pub fn summary_csv_row(label: &str, s: &EvalSummary) -> String {
    format!(
        "{label},{},{},{},{},{},{},{},{},{},{}",
        s.episodes,
        s.falls,
        fmt_f64(s.tracking_score),
        fmt_f64(s.mean_forward_velocity),
        fmt_f64(s.lin_vel_error),
        s.metrics.touchdowns,
        s.metrics.contact_velocity.map(fmt_f64).unwrap_or_default(),
        fmt_f64(s.metrics.joint_acceleration),
        fmt_f64(s.metrics.base_angular_acceleration),
        fmt_f64(s.proxy_band_power_db),
    )
}

/// One point of a slope sweep.
#[derive(Debug, Clone)]
pub struct SlopeResult {
    /// deg
    pub angle: f64,
    pub episodes: usize,
    pub successes: usize,
    pub falls: usize,
    pub mean_progress: f64,
    pub mean_touchdown_speed: f64,
    pub proxy_band_power_db: f64,
}

impl SlopeResult {
    pub fn success_rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.successes as f64 / self.episodes as f64
        }
    }
}

/// Climb a ramp of each angle (degrees) heading straight uphill. An episode succeeds
/// once it has progressed `SLOPE_SUCCESS_DISTANCE` along the ramp without falling.
pub fn sweep_slope(
    params: &PolicyParams,
    config: &EnvConfig,
    robot: &RobotModel,
    angles_deg: &[f64],
    opts: &EvalOptions,
) -> Result<Vec<SlopeResult>, EnvError> {
    let max_steps = (opts.duration / config.control_dt).round() as usize;
    let pool = pool();
    let mut out = vec![];
    for &angle in angles_deg {
        let mut cfg = config.clone();
        cfg.terrain.slope_angle = Some(angle.to_radians());
        cfg.random_initial_yaw = false;
        let results: Result<Vec<_>, _> = pool.install(|| {
            (0..opts.episodes)
                .into_par_iter()
                .map(|i| {
                    let mut start = None;
                    run_episode(params, &cfg, robot, opts.seed, i, max_steps, |ep, _| {
                        let axis = ep.terrain.forward_axis();
                        let p0 = *start.get_or_insert(ep.state.base_position);
                        (ep.state.base_position - p0).dot(&axis) >= SLOPE_SUCCESS_DISTANCE
                    })
                })
                .collect()
        });
        let results = results?;
        let successes = results.iter().filter(|r| !r.fell && r.progress >= SLOPE_SUCCESS_DISTANCE - 0.02).count();
        let summary = EvalSummary::from_results(&results, cfg.control_dt, robot.total_mass());
        out.push(SlopeResult {
            angle,
            episodes: results.len(),
            successes,
            falls: summary.falls,
            mean_progress: results.iter().map(|r| r.progress).sum::<f64>() / results.len().max(1) as f64,
            mean_touchdown_speed: summary.mean_touchdown_speed(),
            proxy_band_power_db: summary.proxy_band_power_db,
        });
    }
    Ok(out)
}

/// Steepest angle whose success rate is at least one half, or `None`.
pub fn max_climbable_angle(results: &[SlopeResult]) -> Option<f64> {
    results.iter().filter(|r| r.success_rate() >= 0.5).map(|r| r.angle).fold(None, |m, a| Some(m.map_or(a, |m: f64| m.max(a))))
}

pub fn slope_csv_header() -> String {
    "label,angle_deg,episodes,successes,success_rate,falls,mean_progress,mean_touchdown_speed,proxy_band_power_db".into()
}

pub fn slope_csv_row(label: &str, r: &SlopeResult) -> String {
    format!(
        "{label},{},{},{},{},{},{},{},{}",
        fmt_f64(r.angle),
        r.episodes,
        r.successes,
        fmt_f64(r.success_rate()),
        r.falls,
        fmt_f64(r.mean_progress),
        fmt_f64(r.mean_touchdown_speed),
        fmt_f64(r.proxy_band_power_db),
    )
}

/// One evaluation setting of a DR sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrSetting {
    /// m
    pub terrain_height: f64,
    pub friction: Range,
}

/// Default grid: terrain height 0..0.03 m crossed with the nominal and widened friction ranges.
pub fn default_dr_grid() -> Vec<DrSetting> {
    let mut grid = vec![];
    for h in [0.0, 0.01, 0.02, 0.03] {
        for friction in [Range(0.4, 0.7), Range(0.2, 0.9)] {
            grid.push(DrSetting { terrain_height: h, friction });
        }
    }
    grid
}

pub fn sweep_dr(
    params: &PolicyParams,
    config: &EnvConfig,
    robot: &RobotModel,
    grid: &[DrSetting],
    opts: &EvalOptions,
) -> Result<Vec<(DrSetting, EvalSummary)>, EnvError> {
    grid.iter()
        .map(|s| {
            let mut cfg = config.clone();
            cfg.randomization.terrain_height = Range(0.0, s.terrain_height);
            cfg.randomization.friction = s.friction;
            evaluate(params, &cfg, robot, opts).map(|(_, summary)| (*s, summary))
        })
        .collect()
}

pub fn dr_csv_header() -> String {
    format!("terrain_height,friction_min,friction_max,{}", summary_csv_header())
}

pub fn dr_csv_row(label: &str, s: &DrSetting, summary: &EvalSummary) -> String {
    format!(
        "{},{},{},{}",
        fmt_f64(s.terrain_height),
        fmt_f64(s.friction.min()),
        fmt_f64(s.friction.max()),
        summary_csv_row(label, summary)
    )
}

/// One control-rate sample of a gain trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSample {
    /// s
    pub time: f64,
    /// Applied sigmoid gain scale per joint.
    pub sigma: [f64; NUM_JOINTS],
    pub contact: [bool; NUM_LEGS],
    pub touchdown: [bool; NUM_LEGS],
    /// Fore-right foot speed from forward kinematics, m/s.
    pub fore_right_speed: f64,
}

pub fn trace_gains(
    params: &PolicyParams,
    config: &EnvConfig,
    robot: &RobotModel,
    duration: f64,
    seed: u64,
    index: usize,
) -> Result<(Vec<GainSample>, EpisodeResult), EnvError> {
    let max_steps = (duration / config.control_dt).round() as usize;
    let mut trace = Vec::with_capacity(max_steps);
    let dt = config.control_dt;
    let result = run_episode(params, config, robot, seed, index, max_steps, |ep, out| {
        let feet = foot_kinematics(&ep.model, &ep.state);
        trace.push(GainSample {
            time: ep.episode.steps as f64 * dt,
            sigma: ep.episode.gain_inputs.map(sigmoid),
            contact: out.info.contact.feet.map(|f| f.in_contact),
            touchdown: out.info.contact.feet.map(|f| f.touchdown),
            fore_right_speed: feet[FORE_RIGHT].velocity.norm(),
        });
        false
    })?;
    Ok((trace, result))
}

pub fn gain_trace_header() -> String {
    let mut cols = vec!["time".to_string()];
    cols.extend((0..NUM_JOINTS).map(|j| format!("sigma_{j}")));
    cols.extend((0..NUM_LEGS).map(|l| format!("contact_{l}")));
    cols.push("fore_right_speed".into());
    cols.join(",")
}

pub fn gain_trace_row(s: &GainSample) -> String {
    let mut cols = vec![fmt_f64(s.time)];
    cols.extend(s.sigma.iter().map(|v| fmt_f64(*v)));
    cols.extend(s.contact.iter().map(|c| (*c as u8).to_string()));
    cols.push(fmt_f64(s.fore_right_speed));
    cols.join(",")
}

/// Mean fore-right-leg gain scale in the `pre` samples before each touchdown, and in
/// the middle third of each complete swing interval. `None` if no complete swing.
pub fn touchdown_gain_contrast(trace: &[GainSample], pre: usize) -> Option<(f64, f64)> {
    let leg = FORE_RIGHT;
    let joints = leg * JOINTS_PER_LEG..(leg + 1) * JOINTS_PER_LEG;
    let leg_sigma = |s: &GainSample| joints.clone().map(|j| s.sigma[j]).sum::<f64>() / JOINTS_PER_LEG as f64;
    let mut before = vec![];
    let mut mid = vec![];
    let mut lift = None;
    for (k, s) in trace.iter().enumerate() {
        if k > 0 && trace[k - 1].contact[leg] && !s.contact[leg] {
            lift = Some(k);
        }
        if s.touchdown[leg] {
            if let Some(l) = lift.take() {
                let len = k - l;
                if len >= 3 {
                    mid.extend(trace[l + len / 3..l + 2 * len / 3].iter().map(leg_sigma));
                }
                before.extend(trace[k.saturating_sub(pre).max(l)..k].iter().map(leg_sigma));
            }
        }
    }
    if before.is_empty() || mid.is_empty() {
        return None;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Some((mean(&before), mean(&mid)))
}
