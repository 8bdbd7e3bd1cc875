//! `quietctl`: train, evaluate and analyse quiet-walking policies.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use quietgait::acoustics::{band_power_db, read_wav, welch_psd};
use quietgait::experiment::{
    csv_comment, default_dr_grid, dr_csv_header, dr_csv_row, episode_csv_header, episode_csv_row, evaluate,
    evaluation_env, fmt_f64, gain_trace_header, gain_trace_row, git_describe, max_climbable_angle, metrics_header,
    slope_csv_header, slope_csv_row, summary_csv_header, summary_csv_row, sweep_dr, sweep_slope,
    touchdown_gain_contrast, trace_gains, EvalOptions, RunConfig, TrainError, Trainer, Variant,
};
use quietgait::ppolearn::{load_checkpoint, Checkpoint, PolicyParams, PpoError};
use quietgait::quietenv::{EnvConfig, ACTION_DIM};

#[derive(Parser)]
#[command(name = "quietctl", version, about = "Quiet quadruped locomotion: training, evaluation and acoustic analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy with PPO and the two-phase curriculum.
    Train(TrainArgs),
    /// Evaluate a checkpoint with deterministic actions at a fixed command.
    Eval(EvalArgs),
    /// Climb ramps of increasing angle.
    SweepSlope(SweepSlopeArgs),
    /// Evaluate under a grid of terrain-height and friction ranges.
    SweepDr(SweepDrArgs),
    /// Log applied gain scales, contacts and fore-right foot speed over one rollout.
    TraceGains(TraceGainsArgs),
    /// Welch PSD and band power of WAV recordings.
    AnalyzeWav(AnalyzeWavArgs),
    /// Print the fully resolved configuration.
    ValidateConfig(ValidateConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration; omitted fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment variant applied on top of the configuration.
    #[arg(long, default_value = "proposed")]
    variant: Variant,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    envs: usize,
    #[arg(long, default_value_t = 3000)]
    iters: usize,
    #[arg(long)]
    out: PathBuf,
    /// Save a checkpoint every this many iterations.
    #[arg(long, default_value_t = 50)]
    checkpoint_every: usize,
    /// Print a progress line every this many iterations (0 = silent).
    #[arg(long, default_value_t = 10)]
    log_every: usize,
}

#[derive(Args)]
struct EvalOpts {
    /// Evaluation environment; the policy interface is taken from the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    /// Episode duration, s.
    #[arg(long, default_value_t = 20.0)]
    duration: f64,
    /// Body-frame command v_x,v_y,w_z.
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.0, 0.0], allow_negative_numbers = true)]
    command: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    opts: EvalOpts,
}

#[derive(Args)]
struct SweepSlopeArgs {
    /// One or more checkpoints; each gets its own rows.
    #[arg(long, required = true, num_args = 1..)]
    checkpoint: Vec<PathBuf>,
    /// Ramp angles in degrees.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0])]
    angles: Vec<f64>,
    #[command(flatten)]
    opts: EvalOpts,
}

#[derive(Args)]
struct SweepDrArgs {
    #[arg(long, required = true, num_args = 1..)]
    checkpoint: Vec<PathBuf>,
    #[command(flatten)]
    opts: EvalOpts,
}

#[derive(Args)]
struct TraceGainsArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// s
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.0, 0.0], allow_negative_numbers = true)]
    command: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeWavArgs {
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Band edges in Hz.
    #[arg(long, value_delimiter = ',', default_values_t = [20.0, 20000.0])]
    band: Vec<f64>,
    #[arg(long, default_value_t = 4096)]
    window: usize,
    /// Directory for the summary and per-file PSD CSVs; summary goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateConfigArgs {
    /// Configuration file (same as --config).
    path: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

/// Errors the user can fix by changing arguments or configuration files.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn command_triple(values: &[f64]) -> Result<[f64; 3]> {
    match values {
        [vx, vy, wz] if values.iter().all(|v| v.is_finite()) => Ok([*vx, *vy, *wz]),
        _ => bail!(usage("--command needs three finite values v_x,v_y,w_z")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::SweepSlope(a) => sweep_slope_cmd(a),
        Command::SweepDr(a) => sweep_dr_cmd(a),
        Command::TraceGains(a) => trace_gains_cmd(a),
        Command::AnalyzeWav(a) => analyze_wav(a),
        Command::ValidateConfig(a) => validate_config(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn load_config(path: Option<&Path>, variant: Variant) -> Result<RunConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?,
        None => String::new(),
    };
    let config = RunConfig::from_json(&text).map_err(|e| usage(format!("invalid config: {e}")))?;
    let config = config.with_variant(variant);
    config.validate().map_err(|e| usage(format!("invalid config after variant {variant}: {e}")))?;
    Ok(config)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Write via a temporary file and rename so readers never see partial files.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))
}

fn csv_text(seed: u64, config_hash: &str, header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut text = format!("{}\n{header}\n", csv_comment(seed, &git_describe(), config_hash));
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    text
}

fn train(a: TrainArgs) -> Result<()> {
    if a.envs == 0 || a.iters == 0 {
        bail!(usage("--envs and --iters must be positive"));
    }
    if a.checkpoint_every == 0 {
        bail!(usage("--checkpoint-every must be positive"));
    }
    let config = load_config(a.cfg.config.as_deref(), a.cfg.variant)?;
    create_dir(&a.out)?;
    write_atomic(&a.out.join("config.json"), &config.to_json())?;

    let hash = config.hash();
    let metrics_path = a.out.join("metrics.csv");
    let mut metrics = fs::File::create(&metrics_path).with_context(|| format!("creating {}", metrics_path.display()))?;
    writeln!(metrics, "{}", csv_comment(a.seed, &git_describe(), &hash))?;
    writeln!(metrics, "{}", metrics_header())?;

    let mut trainer = Trainer::new(config, a.envs, a.seed);
    let ckpt_path = a.out.join("checkpoint.json");
    let save = |trainer: &Trainer| -> Result<()> {
        let mut ckpt = trainer.checkpoint();
        ckpt.variant = Some(a.cfg.variant.name().to_string());
        ckpt.seed = Some(a.seed);
        write_atomic(&ckpt_path, &ckpt.to_json())
    };
    save(&trainer)?;

    let start = Instant::now();
    let mut status = "completed";
    let mut failure = None;
    for i in 0..a.iters {
        let row = match trainer.iterate() {
            Ok(row) => row,
            Err(e) => {
                status = if matches!(e, TrainError::Ppo(PpoError::NonFinite(_))) { "diverged" } else { "failed" };
                failure = Some(e);
                break;
            }
        };
        writeln!(metrics, "{}", row.to_csv())?;
        if a.log_every > 0 && (i % a.log_every == 0 || i + 1 == a.iters) {
            eprintln!(
                "iter {:>5} {:>7.0}s return {:>9.3} tracking {:.3} len {:5.2}s td {:.3} lr {:.2e} {}",
                row.iteration,
                start.elapsed().as_secs_f64(),
                row.mean_return,
                row.tracking_score,
                row.mean_episode_length,
                row.mean_touchdown_speed,
                row.learning_rate,
                row.phase.as_str()
            );
        }
        if (i + 1) % a.checkpoint_every == 0 {
            metrics.flush()?;
            save(&trainer)?;
        }
    }
    metrics.flush()?;
    if failure.is_none() {
        save(&trainer)?;
    }

    let summary = format!(
        "{{\n  \"status\": \"{status}\",\n  \"variant\": \"{}\",\n  \"seed\": {},\n  \"envs\": {},\n  \"iterations\": {},\n  \"phase\": \"{}\",\n  \"phase_flip_iteration\": {},\n  \"config_hash\": \"{hash}\",\n  \"wall_seconds\": {:.1}\n}}\n",
        a.cfg.variant,
        a.seed,
        a.envs,
        trainer.iteration,
        trainer.phase().as_str(),
        trainer.phase_flip_iteration.map(|i| i.to_string()).unwrap_or_else(|| "null".into()),
        start.elapsed().as_secs_f64(),
    );
    write_atomic(&a.out.join("run.json"), &summary)?;
    match failure {
        None => Ok(()),
        Some(e) => Err(anyhow!(e).context(format!(
            "training stopped at iteration {}; last good checkpoint kept at {}",
            trainer.iteration,
            ckpt_path.display()
        ))),
    }
}

struct LoadedPolicy {
    label: String,
    params: PolicyParams,
    checkpoint: Checkpoint,
}

fn load_policy(path: &Path) -> Result<LoadedPolicy> {
    let text = fs::read_to_string(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let (params, checkpoint) = load_checkpoint(&text).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let label = checkpoint.variant.clone().unwrap_or_else(|| {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "policy".into())
    });
    Ok(LoadedPolicy { label, params, checkpoint })
}

struct EvalSetup {
    options: EvalOptions,
    base: RunConfig,
}

fn eval_setup(o: &EvalOpts) -> Result<EvalSetup> {
    if o.episodes == 0 {
        bail!(usage("--episodes must be at least 1"));
    }
    if !(o.duration > 0.0) {
        bail!(usage("--duration must be positive"));
    }
    let base = load_config(o.config.as_deref(), Variant::Proposed)?;
    let options = EvalOptions { episodes: o.episodes, duration: o.duration, command: command_triple(&o.command)?, seed: o.seed };
    Ok(EvalSetup { options, base })
}

/// Evaluation env for `policy`, after checking the network fits it.
fn policy_env(policy: &LoadedPolicy, base: &EnvConfig, options: &EvalOptions) -> Result<EnvConfig> {
    let env = evaluation_env(&policy.checkpoint.env_config, base, options.command, options.duration);
    policy
        .checkpoint
        .check_compatible(env.observation_dim(), ACTION_DIM)
        .with_context(|| format!("checkpoint {} is incompatible with the evaluation environment", policy.label))?;
    Ok(env)
}

fn eval(a: EvalArgs) -> Result<()> {
    let setup = eval_setup(&a.opts)?;
    let policy = load_policy(&a.checkpoint)?;
    let env = policy_env(&policy, &setup.base.env, &setup.options)?;
    let (results, summary) = evaluate(&policy.params, &env, &setup.base.robot, &setup.options)?;
    create_dir(&a.opts.out)?;
    let hash = setup.base.hash();
    let seed = setup.options.seed;
    write_atomic(
        &a.opts.out.join("eval_episodes.csv"),
        &csv_text(seed, &hash, &episode_csv_header(), results.iter().map(episode_csv_row)),
    )?;
    write_atomic(
        &a.opts.out.join("eval_summary.csv"),
        &csv_text(seed, &hash, &summary_csv_header(), [summary_csv_row(&policy.label, &summary)]),
    )?;
    let mut metrics = format!("{}\n", csv_comment(seed, &git_describe(), &hash));
    metrics.push_str(&summary.metrics.to_csv());
    write_atomic(&a.opts.out.join("penalty_metrics.csv"), &metrics)?;
    println!("{}", summary_csv_header());
    println!("{}", summary_csv_row(&policy.label, &summary));
    Ok(())
}

fn sweep_slope_cmd(a: SweepSlopeArgs) -> Result<()> {
    if a.angles.is_empty() || a.angles.iter().any(|x| !x.is_finite() || x.abs() >= 60.0) {
        bail!(usage("--angles must be finite degrees below 60"));
    }
    let setup = eval_setup(&a.opts)?;
    let mut rows = vec![];
    for path in &a.checkpoint {
        let policy = load_policy(path)?;
        let env = policy_env(&policy, &setup.base.env, &setup.options)?;
        let results = sweep_slope(&policy.params, &env, &setup.base.robot, &a.angles, &setup.options)?;
        let max = max_climbable_angle(&results);
        eprintln!("{}: steepest slope with >= 50% success: {}", policy.label, max.map(|m| format!("{m} deg")).unwrap_or("none".into()));
        rows.extend(results.iter().map(|r| slope_csv_row(&policy.label, r)));
    }
    create_dir(&a.opts.out)?;
    let text = csv_text(setup.options.seed, &setup.base.hash(), &slope_csv_header(), rows);
    write_atomic(&a.opts.out.join("slope_sweep.csv"), &text)?;
    print!("{text}");
    Ok(())
}

fn sweep_dr_cmd(a: SweepDrArgs) -> Result<()> {
    let setup = eval_setup(&a.opts)?;
    let grid = default_dr_grid();
    let mut rows = vec![];
    for path in &a.checkpoint {
        let policy = load_policy(path)?;
        let env = policy_env(&policy, &setup.base.env, &setup.options)?;
        for (setting, summary) in sweep_dr(&policy.params, &env, &setup.base.robot, &grid, &setup.options)? {
            rows.push(dr_csv_row(&policy.label, &setting, &summary));
        }
    }
    create_dir(&a.opts.out)?;
    let text = csv_text(setup.options.seed, &setup.base.hash(), &dr_csv_header(), rows);
    write_atomic(&a.opts.out.join("dr_sweep.csv"), &text)?;
    print!("{text}");
    Ok(())
}

fn trace_gains_cmd(a: TraceGainsArgs) -> Result<()> {
    if !(a.duration > 0.0) {
        bail!(usage("--duration must be positive"));
    }
    let base = load_config(a.config.as_deref(), Variant::Proposed)?;
    let policy = load_policy(&a.checkpoint)?;
    let options = EvalOptions { episodes: 1, duration: a.duration, command: command_triple(&a.command)?, seed: a.seed };
    let env = policy_env(&policy, &base.env, &options)?;
    let (trace, result) = trace_gains(&policy.params, &env, &base.robot, a.duration, a.seed, 0)?;
    create_dir(&a.out)?;
    write_atomic(
        &a.out.join("gain_trace.csv"),
        &csv_text(a.seed, &base.hash(), &gain_trace_header(), trace.iter().map(gain_trace_row)),
    )?;
    match touchdown_gain_contrast(&trace, 5) {
        Some((before, mid)) => eprintln!("fore-right mean gain scale: 50 ms before touchdown {before:.4}, mid-swing {mid:.4}"),
        None => eprintln!("no complete fore-right swing in the trace"),
    }
    if result.fell {
        eprintln!("episode ended early: {}", result.done.map(|d| d.as_str()).unwrap_or("?"));
    }
    Ok(())
}

fn analyze_wav(a: AnalyzeWavArgs) -> Result<()> {
    let &[lo, hi] = a.band.as_slice() else {
        bail!(usage("--band needs two values low,high"));
    };
    if !(lo >= 0.0 && hi > lo) {
        bail!(usage("--band needs 0 <= low < high"));
    }
    if a.window < 2 || !a.window.is_power_of_two() {
        bail!(usage("--window must be a power of two"));
    }
    if let Some(dir) = &a.out {
        create_dir(dir)?;
    }
    let mut lines = vec!["file,status,band_power_db,peak_frequency_hz,segments,error".to_string()];
    let mut failed = 0;
    for path in &a.paths {
        let analysed = fs::read(path)
            .map_err(anyhow::Error::from)
            .and_then(|bytes| Ok(read_wav(&bytes)?))
            .and_then(|clip| Ok(welch_psd(&clip, a.window, 0.5)?))
            .and_then(|report| Ok((band_power_db(&report, lo, hi)?, report)));
        let name = path.display().to_string().replace(',', "_");
        match analysed {
            Ok((db, report)) => {
                lines.push(format!("{name},ok,{},{},{},", fmt_f64(db), fmt_f64(report.peak_frequency()), report.segments));
                if let Some(dir) = &a.out {
                    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "clip".into());
                    write_atomic(&dir.join(format!("psd_{stem}.csv")), &report.to_csv())?;
                }
            }
            Err(e) => {
                failed += 1;
                lines.push(format!("{name},error,,,,{}", format!("{e:#}").replace([',', '\n'], ";")));
            }
        }
    }
    let text = lines.join("\n") + "\n";
    match &a.out {
        Some(dir) => write_atomic(&dir.join("wav_analysis.csv"), &text)?,
        None => print!("{text}"),
    }
    if failed > 0 {
        bail!("{failed} of {} files could not be analysed", a.paths.len());
    }
    Ok(())
}

fn validate_config(a: ValidateConfigArgs) -> Result<()> {
    let path = match (&a.path, &a.cfg.config) {
        (Some(_), Some(_)) => bail!(usage("give the configuration either positionally or with --config, not both")),
        (p, c) => p.as_ref().or(c.as_ref()),
    };
    let config = load_config(path.map(PathBuf::as_path), a.cfg.variant)?;
    println!("{}", config.to_json());
    Ok(())
}
