//! One-way switch from the noisy-walking to the quiet-walking reward schedule.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::config::{CurriculumConfig, Phase};

/// Global latch shared by every environment of a training run.
///
/// Completed-episode tracking scores are pushed as they arrive; the phase is
/// re-evaluated once per training iteration by [`CurriculumLatch::update`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumLatch {
    phase: Phase,
    enabled: bool,
    threshold: f64,
    window: usize,
    scores: VecDeque<f64>,
}

impl CurriculumLatch {
    pub fn new(config: &CurriculumConfig) -> Self {
        CurriculumLatch {
            phase: config.initial_phase,
            enabled: config.enabled,
            threshold: config.threshold,
            window: config.window,
            scores: VecDeque::with_capacity(config.window),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn record(&mut self, score: f64) {
        if self.scores.len() == self.window {
            self.scores.pop_front();
        }
        self.scores.push_back(score);
    }

    /// Mean over the most recent (up to `window`) completed episodes.
    pub fn running_mean(&self) -> Option<f64> {
        if self.scores.is_empty() {
            None
        } else {
            Some(self.scores.iter().sum::<f64>() / self.scores.len() as f64)
        }
    }

    /// Flip noisy -> quiet when the running mean exceeds the threshold. Never flips back.
    pub fn update(&mut self) -> Phase {
        if self.enabled && self.phase == Phase::Noisy {
            if let Some(mean) = self.running_mean() {
                if mean > self.threshold {
                    self.phase = Phase::Quiet;
                }
            }
        }
        self.phase
    }
}

/// Record a batch of completed episode scores and re-evaluate the latch.
pub fn curriculum_update(latch: &mut CurriculumLatch, completed_episode_scores: &[f64]) -> Phase {
    for &s in completed_episode_scores {
        latch.record(s);
    }
    latch.update()
}
