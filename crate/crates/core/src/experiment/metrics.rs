//! Per-iteration training metrics and CSV output.

use std::fmt::Write as _;

use crate::quietenv::{Phase, RewardTerm, NUM_REWARD_TERMS};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    /// Mean episodic sum of each scaled reward term over the recent-episode window.
    pub terms: [f64; NUM_REWARD_TERMS],
    pub mean_return: f64,
    pub tracking_score: f64,
    pub phase: Phase,
    pub mean_touchdown_speed: f64,
    pub mean_episode_length: f64,
    pub learning_rate: f64,
    pub approx_kl: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub completed_episodes: usize,
}

pub fn metrics_header() -> String {
    let mut cols = vec!["iteration".to_string()];
    cols.extend(RewardTerm::ALL.iter().map(|t| format!("reward_{}", t.name())));
    cols.extend(
        [
            "mean_return",
            "tracking_score",
            "phase",
            "mean_touchdown_speed",
            "mean_episode_length",
            "learning_rate",
            "approx_kl",
            "policy_loss",
            "value_loss",
            "entropy",
            "completed_episodes",
        ]
        .map(String::from),
    );
    cols.join(",")
}

/// Format a float so that it parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:?}")
    }
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        write!(s, "{}", self.iteration).unwrap();
        for t in self.terms {
            write!(s, ",{}", fmt_f64(t)).unwrap();
        }
        for v in [self.mean_return, self.tracking_score] {
            write!(s, ",{}", fmt_f64(v)).unwrap();
        }
        write!(s, ",{}", self.phase.as_str()).unwrap();
        for v in [
            self.mean_touchdown_speed,
            self.mean_episode_length,
            self.learning_rate,
            self.approx_kl,
            self.policy_loss,
            self.value_loss,
            self.entropy,
        ] {
            write!(s, ",{}", fmt_f64(v)).unwrap();
        }
        write!(s, ",{}", self.completed_episodes).unwrap();
        s
    }
}

/// Comment line recording provenance of a CSV file.
pub fn csv_comment(seed: u64, git: &str, config_hash: &str) -> String {
    format!("# seed={seed} git={git} config_hash={config_hash}")
}

/// `git describe --always --dirty` of the working directory, or "unknown".
pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}
