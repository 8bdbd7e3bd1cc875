//! Acoustic measurement pipeline (WAV, Welch PSD, band power) and simulated
//! footstep-noise metrics.

mod penalty;
mod spectral;
mod wav;

pub use penalty::{impact_proxy_signal, sim_penalty_metrics, PenaltyMetrics, TrajectoryRecord};
pub use spectral::{band_power_db, fft, hamming, power_db, welch_psd, SpectralReport, REFERENCE_POWER, SILENCE_DB};
pub use wav::{read_wav, write_wav};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    /// Hz
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

impl AudioClip {
    /// `amplitude * sin(2 pi f t)` sampled for `n` samples.
    pub fn tone(sample_rate: f64, frequency: f64, amplitude: f64, n: usize) -> Self {
        let samples = (0..n)
            .map(|i| amplitude * (2.0 * std::f64::consts::PI * frequency * i as f64 / sample_rate).sin())
            .collect();
        AudioClip { sample_rate, samples }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AcousticsError {
    #[error("WAV parse error in '{chunk}' chunk: {message}")]
    Wav { chunk: String, message: String },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("no frequency bins between {f_lo} Hz and {f_hi} Hz")]
    EmptyBand { f_lo: f64, f_hi: f64 },
    #[error("{0}")]
    InvalidInput(String),
}
