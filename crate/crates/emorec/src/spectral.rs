//! Short-time spectral analysis: framing, windowing and per-frame power spectra.
//!
//! A clip is cut into overlapping frames of `frame_len` samples, each frame is
//! multiplied by a window, and the squared DFT magnitudes of the non-negative
//! frequency bins are kept. Phase is discarded; everything downstream works on
//! energy.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Window applied to each frame before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Identity window.
    Rectangular,
    #[default]
    Hamming,
    Hann,
}

/// Frame geometry and window selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FramingConfig {
    /// Samples per frame. Must be even and at least 16.
    pub frame_len: usize,
    /// Samples between consecutive frame starts, in `1..=frame_len`.
    pub hop: usize,
    pub window: WindowKind,
    /// Optional first-order pre-emphasis coefficient; 0 disables it.
    pub pre_emphasis: f64,
}

impl Default for FramingConfig {
    fn default() -> Self {
        Self {
            frame_len: 512,
            hop: 256,
            window: WindowKind::Hamming,
            pre_emphasis: 0.0,
        }
    }
}

impl FramingConfig {
    pub fn validate(&self) -> Result<(), SpectralError> {
        if self.frame_len < 16 || !self.frame_len.is_multiple_of(2) {
            return Err(SpectralError::InvalidConfig(format!(
                "frame_len must be even and >= 16, got {}",
                self.frame_len
            )));
        }
        if self.hop == 0 || self.hop > self.frame_len {
            return Err(SpectralError::InvalidConfig(format!(
                "hop must be in 1..={}, got {}",
                self.frame_len, self.hop
            )));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(SpectralError::InvalidConfig(format!(
                "pre_emphasis must be in [0, 1), got {}",
                self.pre_emphasis
            )));
        }
        Ok(())
    }

    /// Number of full frames a signal of `len` samples yields, if any.
    pub fn frame_count(&self, len: usize) -> Option<usize> {
        if len < self.frame_len {
            None
        } else {
            Some((len - self.frame_len) / self.hop + 1)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("clip too short: {len} samples, need at least {frame_len}")]
    ClipTooShort { len: usize, frame_len: usize },
    #[error("frame length mismatch: frame has {got} samples, expected {expected}")]
    FrameLengthMismatch { got: usize, expected: usize },
    #[error("invalid framing config: {0}")]
    InvalidConfig(String),
}

/// Per-frame energies |X_t[k]|^2 for k = 0..=N/2.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    frames: Vec<Vec<f64>>,
    bin_count: usize,
}

impl PowerSpectrogram {
    /// Wrap precomputed per-frame energies. Rows must be non-empty and all
    /// the same length.
    pub fn from_frames(frames: Vec<Vec<f64>>) -> Result<Self, SpectralError> {
        let bin_count = match frames.first() {
            Some(row) if !row.is_empty() => row.len(),
            _ => {
                return Err(SpectralError::InvalidConfig(
                    "spectrogram needs at least one non-empty frame".into(),
                ))
            }
        };
        if let Some(bad) = frames.iter().find(|r| r.len() != bin_count) {
            return Err(SpectralError::FrameLengthMismatch {
                got: bad.len(),
                expected: bin_count,
            });
        }
        Ok(Self { frames, bin_count })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t]
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }
}

/// Split `samples` into overlapping frames. The trailing remainder that does
/// not fill a whole frame is discarded.
pub fn frame_signal<'a>(
    samples: &'a [f64],
    cfg: &FramingConfig,
) -> Result<Vec<&'a [f64]>, SpectralError> {
    cfg.validate()?;
    let count = cfg
        .frame_count(samples.len())
        .ok_or(SpectralError::ClipTooShort {
            len: samples.len(),
            frame_len: cfg.frame_len,
        })?;
    Ok((0..count)
        .map(|t| &samples[t * cfg.hop..t * cfg.hop + cfg.frame_len])
        .collect())
}

/// Window weights of length `n`.
pub fn window_weights(kind: WindowKind, n: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    match kind {
        WindowKind::Rectangular => vec![1.0; n],
        WindowKind::Hamming => (0..n)
            .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
            .collect(),
        WindowKind::Hann => (0..n)
            .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos()))
            .collect(),
    }
}

/// Elementwise product of a frame with precomputed window weights.
pub fn apply_window(frame: &[f64], weights: &[f64]) -> Result<Vec<f64>, SpectralError> {
    if frame.len() != weights.len() {
        return Err(SpectralError::FrameLengthMismatch {
            got: frame.len(),
            expected: weights.len(),
        });
    }
    Ok(frame.iter().zip(weights).map(|(x, w)| x * w).collect())
}

/// First-order high-pass `y[n] = x[n] - a*x[n-1]`, disabled at a = 0.
pub fn pre_emphasize(samples: &[f64], coeff: f64) -> Vec<f64> {
    if coeff == 0.0 || samples.is_empty() {
        return samples.to_vec();
    }
    let mut out = Vec::with_capacity(samples.len());
    out.push(samples[0]);
    for i in 1..samples.len() {
        out.push(samples[i] - coeff * samples[i - 1]);
    }
    out
}

/// Reusable transform plan for frames of a fixed length.
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    frame_len: usize,
}

impl SpectrumAnalyzer {
    pub fn new(frame_len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(frame_len);
        Self { fft, frame_len }
    }

    /// Squared DFT magnitudes of the non-negative bins, k = 0..=N/2.
    pub fn power_spectrum(&self, frame: &[f64]) -> Result<Vec<f64>, SpectralError> {
        if frame.len() != self.frame_len {
            return Err(SpectralError::FrameLengthMismatch {
                got: frame.len(),
                expected: self.frame_len,
            });
        }
        let mut buf: Vec<Complex<f64>> =
            frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.fft.process(&mut buf);
        Ok(buf[..=self.frame_len / 2]
            .iter()
            .map(|c| c.norm_sqr())
            .collect())
    }
}

/// Full front half of the pipeline: pre-emphasis, framing, windowing, power
/// spectra.
pub fn power_spectrogram(
    samples: &[f64],
    cfg: &FramingConfig,
) -> Result<PowerSpectrogram, SpectralError> {
    cfg.validate()?;
    let emphasized = pre_emphasize(samples, cfg.pre_emphasis);
    let frames = frame_signal(&emphasized, cfg)?;
    let weights = window_weights(cfg.window, cfg.frame_len);
    let analyzer = SpectrumAnalyzer::new(cfg.frame_len);
    let rows = frames
        .iter()
        .map(|frame| {
            let windowed = apply_window(frame, &weights)?;
            analyzer.power_spectrum(&windowed)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PowerSpectrogram {
        bin_count: cfg.frame_len / 2 + 1,
        frames: rows,
    })
}
