//! Experiment harness: variants, run configuration, training driver, evaluation
//! and metric files. The `quietctl` binary is a thin wrapper over this module.

mod eval;
mod metrics;
mod run_config;
mod train;
mod variant;

pub use eval::{
    default_dr_grid, dr_csv_header, dr_csv_row, episode_csv_header, episode_csv_row, evaluate, evaluation_env,
    gain_trace_header, gain_trace_row, max_climbable_angle, proxy_band_power, run_episode, slope_csv_header,
    slope_csv_row, summary_csv_header, summary_csv_row, sweep_dr, sweep_slope, touchdown_gain_contrast, trace_gains,
    DrSetting, EpisodeResult, EvalOptions, EvalSummary, GainSample, SlopeResult, AUDIBLE_BAND, METRICS_WINDOW,
    PROXY_RATE, SLOPE_SUCCESS_DISTANCE,
};
pub use metrics::{csv_comment, fmt_f64, git_describe, metrics_header, MetricsRow};
pub use run_config::RunConfig;
pub use train::{mean_actions, TrainError, Trainer};
pub use variant::Variant;
