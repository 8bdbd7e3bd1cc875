//! FFT, Welch power spectral density and audible-band power.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{AcousticsError, AudioClip};

/// Power of a sinusoid with amplitude 1e-10: the 0 dB reference.
pub const REFERENCE_POWER: f64 = 1e-20 / 2.0;
pub const SILENCE_DB: f64 = -300.0;

/// Discrete Fourier transform of a real sequence whose length is a power of two.
pub fn fft(samples: &[f64]) -> Result<Vec<Complex<f64>>, AcousticsError> {
    let n = samples.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(AcousticsError::NotPowerOfTwo(n));
    }
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(buf)
}

/// Periodic Hamming window.
pub fn hamming(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Hz
    pub frequencies: Vec<f64>,
    /// One-sided power per bin, amplitude^2.
    pub power: Vec<f64>,
    pub window: usize,
    pub overlap: f64,
    pub segments: usize,
}

impl SpectralReport {
    /// Frequency of the bin with the largest power.
    pub fn peak_frequency(&self) -> f64 {
        let k = self
            .power
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0;
        self.frequencies[k]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz,psd\n");
        for (f, p) in self.frequencies.iter().zip(&self.power) {
            s.push_str(&format!("{f},{p:e}\n"));
        }
        s
    }
}

/// Welch estimate with Hamming segments. Each periodogram is divided by the
/// squared window sum, so a tone of amplitude A centred on a bin reports A^2/2 there.
pub fn welch_psd(clip: &AudioClip, window: usize, overlap: f64) -> Result<SpectralReport, AcousticsError> {
    if !window.is_power_of_two() || window < 2 {
        return Err(AcousticsError::NotPowerOfTwo(window));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(AcousticsError::InvalidInput(format!("overlap {overlap} must lie in [0, 1)")));
    }
    if !(clip.sample_rate > 0.0) {
        return Err(AcousticsError::InvalidInput("sample rate must be > 0".into()));
    }
    if clip.samples.len() < window {
        return Err(AcousticsError::InsufficientData { needed: window, got: clip.samples.len() });
    }
    let w = hamming(window);
    let norm = w.iter().sum::<f64>().powi(2);
    let hop = (window - (window as f64 * overlap).round() as usize).max(1);
    let plan = FftPlanner::new().plan_fft_forward(window);
    let bins = window / 2 + 1;
    let mut power = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); window];
    let mut segments = 0;
    let mut start = 0;
    while start + window <= clip.samples.len() {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(clip.samples[start + i] * w[i], 0.0);
        }
        plan.process(&mut buf);
        for (k, p) in power.iter_mut().enumerate() {
            let one_sided = if k == 0 || k == window / 2 { 1.0 } else { 2.0 };
            *p += one_sided * buf[k].norm_sqr() / norm;
        }
        segments += 1;
        start += hop;
    }
    power.iter_mut().for_each(|p| *p /= segments as f64);
    let frequencies = (0..bins).map(|k| k as f64 * clip.sample_rate / window as f64).collect();
    Ok(SpectralReport { frequencies, power, window, overlap, segments })
}

/// Power expressed in dB relative to [`REFERENCE_POWER`], floored at -300 dB.
pub fn power_db(power: f64) -> f64 {
    if power > 0.0 {
        (10.0 * (power / REFERENCE_POWER).log10()).max(SILENCE_DB)
    } else {
        SILENCE_DB
    }
}

/// Mean per-bin power over `[f_lo, f_hi]` in dB.
pub fn band_power_db(report: &SpectralReport, f_lo: f64, f_hi: f64) -> Result<f64, AcousticsError> {
    let (sum, n) = report
        .frequencies
        .iter()
        .zip(&report.power)
        .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
        .fold((0.0, 0usize), |(s, n), (_, p)| (s + p, n + 1));
    if n == 0 {
        return Err(AcousticsError::EmptyBand { f_lo, f_hi });
    }
    Ok(power_db(sum / n as f64))
}
