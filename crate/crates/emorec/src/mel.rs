//! Mel-cepstral features: scaled triangular filter banks, cepstra, deltas,
//! and the pooled per-clip feature vector.
//!
//! The mel scale used throughout is `B(f) = 2595·log10(1 + f/700)` with exact
//! inverse `B⁻¹(b) = 700·(10^{b/2595} − 1)`. Filter centers live in
//! fractional DFT-bin units so a single multiplicative factor rescales the
//! whole bank; that factor is how pitch-shifted copies of a clip are emulated
//! without touching the waveform.

use crate::spectral::{self, FramingConfig, PowerSpectrogram, SpectralError};
use crate::wav::AudioClip;
use serde::{Deserialize, Serialize};

/// Geometry and numeric guards for the filter bank and cepstrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelBankConfig {
    /// Number of triangular filters F.
    pub filter_count: usize,
    /// Number of cepstral coefficients C kept per frame. Must satisfy C < F.
    pub coeff_count: usize,
    /// DFT frame length N; must match the framing stage.
    pub frame_len: usize,
    /// Sample rate the bank is laid out for, in Hz.
    pub sample_rate: f64,
    /// Floor applied to filter energies before the logarithm.
    pub log_floor: f64,
    /// Differentiation shift d for the delta track.
    pub delta_shift: usize,
}

impl Default for MelBankConfig {
    fn default() -> Self {
        Self {
            filter_count: 26,
            coeff_count: 25,
            frame_len: 512,
            sample_rate: 16_000.0,
            log_floor: 1e-10,
            delta_shift: 2,
        }
    }
}

impl MelBankConfig {
    pub fn validate(&self) -> Result<(), MelError> {
        if self.coeff_count < 1 || self.coeff_count >= self.filter_count {
            return Err(MelError::InvalidConfig(format!(
                "need 1 <= coeff_count < filter_count, got C={} F={}",
                self.coeff_count, self.filter_count
            )));
        }
        if self.log_floor <= 0.0 || self.log_floor.is_nan() {
            return Err(MelError::InvalidConfig(format!(
                "log_floor must be positive, got {}",
                self.log_floor
            )));
        }
        if self.sample_rate <= 0.0 || self.sample_rate.is_nan() {
            return Err(MelError::InvalidConfig(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if self.frame_len < 16 || !self.frame_len.is_multiple_of(2) {
            return Err(MelError::InvalidConfig(format!(
                "frame_len must be even and >= 16, got {}",
                self.frame_len
            )));
        }
        if self.delta_shift == 0 {
            return Err(MelError::InvalidConfig(
                "delta_shift must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("filter centers must be strictly increasing: {0}")]
    InvalidCenters(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("track too short: {frames} frames, delta shift {shift} needs more")]
    TrackTooShort { frames: usize, shift: usize },
    #[error("clip too short for features: {frames} cepstral frames, need at least {needed}")]
    ClipTooShortForFeatures { frames: usize, needed: usize },
    #[error("invalid mel config: {0}")]
    InvalidConfig(String),
    #[error("clip sample rate {clip} Hz does not match configured {configured} Hz")]
    SampleRateMismatch { clip: u32, configured: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Hz → mel.
pub fn mel_of(f: f64) -> Result<f64, MelError> {
    if f < 0.0 || f.is_nan() {
        return Err(MelError::Domain(format!("mel_of needs f >= 0, got {f}")));
    }
    Ok(2595.0 * (1.0 + f / 700.0).log10())
}

/// Mel → Hz; exact inverse of [`mel_of`].
pub fn mel_inv(b: f64) -> Result<f64, MelError> {
    if b < 0.0 || b.is_nan() {
        return Err(MelError::Domain(format!("mel_inv needs b >= 0, got {b}")));
    }
    Ok(700.0 * (10f64.powf(b / 2595.0) - 1.0))
}

/// Filter-edge positions in fractional DFT-bin units, mel-equispaced between
/// 0 Hz and Nyquist and then multiplied by `scale`. Returns F+2 values
/// `f[0..=F+1]`; `f[0] = 0` always, and `f[F+1] = N/2` at `scale = 1`.
pub fn center_bins(cfg: &MelBankConfig, scale: f64) -> Result<Vec<f64>, MelError> {
    cfg.validate()?;
    if scale <= 0.0 || !scale.is_finite() {
        return Err(MelError::Domain(format!(
            "scale factor must be positive and finite, got {scale}"
        )));
    }
    let nyquist_mel = mel_of(cfg.sample_rate / 2.0)?;
    let hz_to_bin = cfg.frame_len as f64 / cfg.sample_rate;
    (0..=cfg.filter_count + 1)
        .map(|m| {
            let b = m as f64 * nyquist_mel / (cfg.filter_count + 1) as f64;
            Ok(scale * hz_to_bin * mel_inv(b)?)
        })
        .collect()
}

/// A bank of triangular filters sampled on the non-negative DFT bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterBank {
    centers: Vec<f64>,
    /// F rows of N/2+1 weights each.
    weights: Vec<Vec<f64>>,
    scale_factor: f64,
}

impl MelFilterBank {
    pub fn filter_count(&self) -> usize {
        self.weights.len()
    }

    pub fn bin_count(&self) -> usize {
        self.weights[0].len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn weights(&self, m: usize) -> &[f64] {
        &self.weights[m]
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale_factor
    }
}

/// Sample each triangle at the integer bins `0..=N/2`. Filter m rises from
/// `centers[m-1]` to peak `2/(centers[m+1] - centers[m-1])` at `centers[m]`
/// and falls back to zero at `centers[m+1]`; support beyond the Nyquist bin
/// is dropped.
pub fn build_filterbank(centers: &[f64], frame_len: usize) -> Result<MelFilterBank, MelError> {
    build_filterbank_scaled(centers, frame_len, 1.0)
}

fn build_filterbank_scaled(
    centers: &[f64],
    frame_len: usize,
    scale_factor: f64,
) -> Result<MelFilterBank, MelError> {
    if centers.len() < 3 {
        return Err(MelError::InvalidCenters(format!(
            "need at least 3 edge positions, got {}",
            centers.len()
        )));
    }
    for w in centers.windows(2) {
        if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) {
            return Err(MelError::InvalidCenters(format!(
                "{} does not exceed {}",
                w[1], w[0]
            )));
        }
    }
    let bin_count = frame_len / 2 + 1;
    let weights = (1..centers.len() - 1)
        .map(|m| {
            let (lo, mid, hi) = (centers[m - 1], centers[m], centers[m + 1]);
            let peak = 2.0 / (hi - lo);
            (0..bin_count)
                .map(|k| {
                    let k = k as f64;
                    if k < lo || k > hi {
                        0.0
                    } else if k <= mid {
                        peak * (k - lo) / (mid - lo)
                    } else {
                        peak * (hi - k) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect();
    Ok(MelFilterBank {
        centers: centers.to_vec(),
        weights,
        scale_factor,
    })
}

/// Build the bank for `cfg` with its centers multiplied by `scale`.
pub fn scaled_filterbank(cfg: &MelBankConfig, scale: f64) -> Result<MelFilterBank, MelError> {
    let centers = center_bins(cfg, scale)?;
    build_filterbank_scaled(&centers, cfg.frame_len, scale)
}

/// Per-frame filter energies `E[t][m] = Σ_k |X_t[k]|²·H_m[k]`, floored at
/// `log_floor` so the logarithm downstream is always defined.
pub fn filter_energies(
    spectrogram: &PowerSpectrogram,
    bank: &MelFilterBank,
    log_floor: f64,
) -> Result<Vec<Vec<f64>>, MelError> {
    if spectrogram.bin_count() != bank.bin_count() {
        return Err(MelError::Shape(format!(
            "spectrogram has {} bins, bank expects {}",
            spectrogram.bin_count(),
            bank.bin_count()
        )));
    }
    Ok(spectrogram
        .frames()
        .iter()
        .map(|frame| {
            (0..bank.filter_count())
                .map(|m| {
                    let e: f64 = frame
                        .iter()
                        .zip(bank.weights(m))
                        .map(|(x, h)| x * h)
                        .sum();
                    e.max(log_floor)
                })
                .collect()
        })
        .collect())
}

/// Log-energy cosine transform: row t maps the F filter energies to C
/// cepstral coefficients `MFCC[t][m-1] = Σ_k ln(E[t][k])·cos(m(k−1/2)π/F)`
/// for m = 1..=C.
pub fn cepstrum(energies: &[Vec<f64>], coeff_count: usize) -> Result<Vec<Vec<f64>>, MelError> {
    let filter_count = match energies.first() {
        Some(row) => row.len(),
        None => return Ok(Vec::new()),
    };
    if coeff_count >= filter_count {
        return Err(MelError::InvalidConfig(format!(
            "coeff_count {coeff_count} must be below filter count {filter_count}"
        )));
    }
    let basis: Vec<Vec<f64>> = (1..=coeff_count)
        .map(|m| {
            (0..filter_count)
                .map(|k| {
                    (m as f64 * (k as f64 + 0.5) * std::f64::consts::PI / filter_count as f64)
                        .cos()
                })
                .collect()
        })
        .collect();
    energies
        .iter()
        .map(|row| {
            if row.len() != filter_count {
                return Err(MelError::Shape(format!(
                    "ragged energy rows: {} then {}",
                    filter_count,
                    row.len()
                )));
            }
            let logs = row
                .iter()
                .map(|&e| {
                    if e > 0.0 {
                        Ok(e.ln())
                    } else {
                        Err(MelError::Domain(format!("non-positive filter energy {e}")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(basis
                .iter()
                .map(|b| b.iter().zip(&logs).map(|(c, l)| c * l).sum())
                .collect())
        })
        .collect()
}

/// Lagged difference `Δ[t][m] = MFCC[t+d][m] − MFCC[t][m]`, one row per
/// frame that has a partner `d` frames later.
pub fn delta_track(mfcc: &[Vec<f64>], shift: usize) -> Result<Vec<Vec<f64>>, MelError> {
    if shift == 0 {
        return Err(MelError::InvalidConfig("delta shift must be >= 1".into()));
    }
    if mfcc.len() <= shift {
        return Err(MelError::TrackTooShort {
            frames: mfcc.len(),
            shift,
        });
    }
    Ok((0..mfcc.len() - shift)
        .map(|t| {
            mfcc[t + shift]
                .iter()
                .zip(&mfcc[t])
                .map(|(late, early)| late - early)
                .collect()
        })
        .collect())
}

/// Cepstra and their lagged differences for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct CepstralTrack {
    pub mfcc: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    pub shift: usize,
}

impl CepstralTrack {
    pub fn new(mfcc: Vec<Vec<f64>>, shift: usize) -> Result<Self, MelError> {
        let delta = delta_track(&mfcc, shift)?;
        Ok(Self { mfcc, delta, shift })
    }
}

/// Fixed-length per-clip descriptor: per-coefficient means of the cepstra,
/// then their standard deviations, then the delta standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn column_mean_std(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let t = rows.len() as f64;
    let cols = rows[0].len();
    let mut mean = vec![0.0; cols];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= t;
    }
    let mut var = vec![0.0; cols];
    for row in rows {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / t).sqrt()).collect();
    (mean, std)
}

/// Pool a track into `[mean(MFCC), std(MFCC), std(ΔMFCC)]`, 3·C values.
/// Standard deviations are population (divide-by-T) statistics.
pub fn pool_features(track: &CepstralTrack) -> Result<FeatureVector, MelError> {
    if track.delta.len() < 2 {
        return Err(MelError::ClipTooShortForFeatures {
            frames: track.mfcc.len(),
            needed: track.shift + 2,
        });
    }
    let (mean, std) = column_mean_std(&track.mfcc);
    let (_, delta_std) = column_mean_std(&track.delta);
    let mut values = mean;
    values.extend(std);
    values.extend(delta_std);
    Ok(FeatureVector { values })
}

/// Run the whole front end on one clip at pitch-shift parameter `p_sf`
/// semitones: framing, windowing, power spectra, the scaled filter bank,
/// log-DCT, deltas, pooling.
///
/// To make the *unshifted* clip stand in for a copy whose pitch sits `p_sf`
/// semitones higher, the analysis grid must slide the other way: the bank is
/// built with its centers multiplied by `2^(−p_sf/12)`. A clip genuinely
/// shifted up by `s` semitones and analyzed plain then lands on (nearly) the
/// same features as the original analyzed at `p_sf = s`.
pub fn extract_features(
    clip: &AudioClip,
    framing: &FramingConfig,
    bank_cfg: &MelBankConfig,
    p_sf: f64,
) -> Result<FeatureVector, MelError> {
    framing.validate()?;
    bank_cfg.validate()?;
    if !p_sf.is_finite() {
        return Err(MelError::Domain(format!(
            "pitch-shift parameter must be finite, got {p_sf}"
        )));
    }
    if framing.frame_len != bank_cfg.frame_len {
        return Err(MelError::InvalidConfig(format!(
            "framing uses frame_len {} but the bank is laid out for {}",
            framing.frame_len, bank_cfg.frame_len
        )));
    }
    if clip.sample_rate as f64 != bank_cfg.sample_rate {
        return Err(MelError::SampleRateMismatch {
            clip: clip.sample_rate,
            configured: bank_cfg.sample_rate,
        });
    }
    let spectrogram = spectral::power_spectrogram(&clip.samples, framing)?;
    let bank = scaled_filterbank(bank_cfg, (-p_sf / 12.0).exp2())?;
    let energies = filter_energies(&spectrogram, &bank, bank_cfg.log_floor)?;
    let mfcc = cepstrum(&energies, bank_cfg.coeff_count)?;
    let track = CepstralTrack::new(mfcc, bank_cfg.delta_shift)?;
    pool_features(&track)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::WindowKind;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn default_cfg() -> MelBankConfig {
        MelBankConfig::default()
    }

    #[test]
    fn mel_of_known_points() {
        assert_eq!(mel_of(0.0).unwrap(), 0.0);
        assert!((mel_of(700.0).unwrap() - 781.1728387480312).abs() < 1e-9);
        assert!((mel_of(8000.0).unwrap() - 2840.023046708319).abs() < 1e-9);
        assert!(mel_of(-1.0).is_err());
    }

    #[test]
    fn mel_inv_known_points() {
        assert_eq!(mel_inv(0.0).unwrap(), 0.0);
        assert!((mel_inv(2595.0).unwrap() - 6300.0).abs() < 1e-9);
        assert!(mel_inv(-0.5).is_err());
    }

    #[test]
    fn mel_round_trip() {
        for f in [0.0, 100.0, 700.0, 4000.0, 8000.0] {
            let back = mel_inv(mel_of(f).unwrap()).unwrap();
            let tol = if f == 0.0 { 1e-9 } else { 1e-9 * f };
            assert!((back - f).abs() < tol, "round trip at {f} gave {back}");
        }
    }

    #[test]
    fn center_bins_default_layout() {
        let cfg = default_cfg();
        let f = center_bins(&cfg, 1.0).unwrap();
        assert_eq!(f.len(), 28);
        assert_eq!(f[0], 0.0);
        assert!((f[1] - 2.1913367675743656).abs() < 1e-9);
        assert!((f[2] - 4.597046607868522).abs() < 1e-9);
        assert!((f[27] - 256.0).abs() < 1e-9);
        for w in f.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn center_bins_scaling_is_elementwise() {
        let cfg = default_cfg();
        let base = center_bins(&cfg, 1.0).unwrap();
        let doubled = center_bins(&cfg, 2.0).unwrap();
        for (b, d) in base.iter().zip(&doubled) {
            assert!((d - 2.0 * b).abs() < 1e-12);
        }
        assert!((doubled[27] - 512.0).abs() < 1e-9);
    }

    #[test]
    fn filterbank_tiny_example() {
        let bank = build_filterbank(&[0.0, 4.0, 8.0], 16).unwrap();
        assert_eq!(bank.filter_count(), 1);
        assert_eq!(bank.bin_count(), 9);
        let w = bank.weights(0);
        assert!((w[4] - 0.25).abs() < 1e-15);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[8], 0.0);
        assert!((w[2] - 0.125).abs() < 1e-15);
        assert!((w[6] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn filterbank_rejects_non_monotone_centers() {
        assert!(matches!(
            build_filterbank(&[0.0, 4.0, 4.0], 16),
            Err(MelError::InvalidCenters(_))
        ));
        assert!(matches!(
            build_filterbank(&[0.0, 5.0, 3.0], 16),
            Err(MelError::InvalidCenters(_))
        ));
        assert!(build_filterbank(&[0.0, 4.0], 16).is_err());
    }

    #[test]
    fn filter_above_nyquist_is_all_zero() {
        let bank = build_filterbank(&[9.0, 12.0, 15.0], 16).unwrap();
        assert!(bank.weights(0).iter().all(|&w| w == 0.0));
    }

    #[test]
    fn interior_filters_have_near_unit_area() {
        let cfg = default_cfg();
        let bank = scaled_filterbank(&cfg, 1.0).unwrap();
        let centers = bank.centers();
        let mut checked = 0;
        for m in 0..bank.filter_count() {
            if centers[m] > 0.0 && centers[m + 2] < 256.0 {
                let area: f64 = bank.weights(m).iter().sum();
                assert!(
                    (0.9..=1.1).contains(&area),
                    "filter {m} area {area} outside the coarse band"
                );
                assert!(
                    (0.988..=1.009).contains(&area),
                    "filter {m} area {area} drifted from the expected band"
                );
                checked += 1;
            }
        }
        assert_eq!(checked, 24);
    }

    fn spectrogram_from(frames: Vec<Vec<f64>>) -> PowerSpectrogram {
        PowerSpectrogram::from_frames(frames).unwrap()
    }

    #[test]
    fn energies_of_silence_hit_the_floor() {
        let bank = scaled_filterbank(&default_cfg(), 1.0).unwrap();
        let spec = spectrogram_from(vec![vec![0.0; 257]; 3]);
        let e = filter_energies(&spec, &bank, 1e-10).unwrap();
        assert_eq!(e.len(), 3);
        for row in &e {
            assert_eq!(row.len(), 26);
            assert!(row.iter().all(|&v| v == 1e-10));
        }
    }

    #[test]
    fn unit_impulse_spectrum_sifts_filter_weights() {
        let bank = scaled_filterbank(&default_cfg(), 1.0).unwrap();
        let k0 = 40;
        let mut frame = vec![0.0; 257];
        frame[k0] = 1.0;
        let e = filter_energies(&spectrogram_from(vec![frame]), &bank, 1e-10).unwrap();
        for (m, &v) in e[0].iter().enumerate() {
            let expected = bank.weights(m)[k0].max(1e-10);
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn energies_match_double_loop() {
        let mut rng = StdRng::seed_from_u64(7);
        let centers = center_bins(&default_cfg(), 1.0).unwrap();
        let bank = build_filterbank(&centers, 512).unwrap();
        let frames: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..257).map(|_| rng.gen_range(0.0..10.0)).collect())
            .collect();
        let fast = filter_energies(&spectrogram_from(frames.clone()), &bank, 1e-10).unwrap();
        for (t, frame) in frames.iter().enumerate() {
            for m in 0..26 {
                let mut acc = 0.0;
                for k in 0..257 {
                    acc += frame[k] * bank.weights(m)[k];
                }
                assert!((fast[t][m] - acc.max(1e-10)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn energies_reject_bin_mismatch() {
        let bank = build_filterbank(&[0.0, 4.0, 8.0], 16).unwrap();
        let spec = spectrogram_from(vec![vec![0.0; 257]]);
        assert!(matches!(
            filter_energies(&spec, &bank, 1e-10),
            Err(MelError::Shape(_))
        ));
    }

    #[test]
    fn constant_energies_give_zero_cepstra() {
        let energies = vec![vec![3.7; 26]; 4];
        let mfcc = cepstrum(&energies, 25).unwrap();
        for row in &mfcc {
            assert_eq!(row.len(), 25);
            for &v in row {
                assert!(v.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cepstrum_single_term_by_hand() {
        let energies = vec![vec![std::f64::consts::E, 1.0, 1.0, 1.0]];
        let mfcc = cepstrum(&energies, 2).unwrap();
        let pi = std::f64::consts::PI;
        assert!((mfcc[0][0] - (pi / 8.0).cos()).abs() < 1e-12);
        assert!((mfcc[0][1] - (pi / 4.0).cos()).abs() < 1e-12);
    }

    #[test]
    fn cepstrum_matches_double_loop() {
        let mut rng = StdRng::seed_from_u64(13);
        let energies: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..26).map(|_| rng.gen_range(1e-10..5.0)).collect())
            .collect();
        let fast = cepstrum(&energies, 25).unwrap();
        let pi = std::f64::consts::PI;
        for (t, row) in energies.iter().enumerate() {
            for m in 1..=25usize {
                let mut acc = 0.0;
                for (k, &e) in row.iter().enumerate() {
                    acc += e.ln() * (m as f64 * (k as f64 + 0.5) * pi / 26.0).cos();
                }
                assert!((fast[t][m - 1] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cepstrum_rejects_non_positive_energy() {
        let energies = vec![vec![1.0, 0.0, 1.0, 1.0]];
        assert!(matches!(
            cepstrum(&energies, 2),
            Err(MelError::Domain(_))
        ));
    }

    #[test]
    fn dct_rows_are_orthogonal_to_constants() {
        let pi = std::f64::consts::PI;
        for f in [4usize, 26, 40] {
            for m in 1..f {
                let s: f64 = (0..f)
                    .map(|k| (m as f64 * (k as f64 + 0.5) * pi / f as f64).cos())
                    .sum();
                assert!(s.abs() < 1e-9, "F={f} m={m} sum={s}");
            }
        }
    }

    #[test]
    fn delta_of_constant_track_is_zero() {
        let mfcc = vec![vec![1.0, -2.0]; 5];
        let delta = delta_track(&mfcc, 2).unwrap();
        assert_eq!(delta.len(), 3);
        assert!(delta.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn delta_of_ramp_is_the_shift() {
        let mfcc: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64; 3]).collect();
        let delta = delta_track(&mfcc, 2).unwrap();
        assert_eq!(delta.len(), 4);
        assert!(delta.iter().flatten().all(|&v| v == 2.0));
    }

    #[test]
    fn delta_short_track_errors() {
        let mfcc = vec![vec![0.0; 3]; 2];
        assert!(matches!(
            delta_track(&mfcc, 2),
            Err(MelError::TrackTooShort { frames: 2, shift: 2 })
        ));
    }

    #[test]
    fn pooling_constant_track() {
        let mfcc = vec![vec![4.0, -1.0]; 6];
        let track = CepstralTrack::new(mfcc, 2).unwrap();
        let fv = pool_features(&track).unwrap();
        assert_eq!(fv.values, vec![4.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn pooling_matches_direct_statistics() {
        let mut rng = StdRng::seed_from_u64(19);
        let mfcc: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..25).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let track = CepstralTrack::new(mfcc.clone(), 2).unwrap();
        let fv = pool_features(&track).unwrap();
        assert_eq!(fv.len(), 75);
        for c in 0..25 {
            let col: Vec<f64> = mfcc.iter().map(|r| r[c]).collect();
            let mean = col.iter().sum::<f64>() / 20.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 20.0;
            assert!((fv.values[c] - mean).abs() < 1e-12);
            assert!((fv.values[25 + c] - var.sqrt()).abs() < 1e-12);
            let dcol: Vec<f64> = (0..18).map(|t| mfcc[t + 2][c] - mfcc[t][c]).collect();
            let dmean = dcol.iter().sum::<f64>() / 18.0;
            let dvar = dcol.iter().map(|v| (v - dmean) * (v - dmean)).sum::<f64>() / 18.0;
            assert!((fv.values[50 + c] - dvar.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn pooling_needs_two_delta_rows() {
        let mfcc = vec![vec![0.0; 2]; 3];
        let track = CepstralTrack::new(mfcc, 2).unwrap();
        assert!(matches!(
            pool_features(&track),
            Err(MelError::ClipTooShortForFeatures { frames: 3, needed: 4 })
        ));
    }

    /// Harmonic tone with equal-amplitude partials below 90% of Nyquist.
    fn harmonic_clip(f0: f64, sample_rate: u32, samples: usize) -> AudioClip {
        let fs = sample_rate as f64;
        let partials = (0.45 * fs / f0).floor() as usize;
        let data = (0..samples)
            .map(|i| {
                let t = i as f64 / fs;
                (1..=partials)
                    .map(|h| (2.0 * std::f64::consts::PI * h as f64 * f0 * t).cos())
                    .sum::<f64>()
                    / partials as f64
            })
            .collect();
        AudioClip {
            sample_rate,
            samples: data,
        }
    }

    fn mean_mfcc_distance(a: &FeatureVector, b: &FeatureVector) -> f64 {
        a.values[..13]
            .iter()
            .zip(&b.values[..13])
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / 13.0
    }

    #[test]
    fn shift_parameter_tracks_a_genuinely_shifted_signal() {
        let framing = FramingConfig::default();
        let cfg = default_cfg();
        let f0 = 150.0;
        for s in [1.0f64, 2.0, 4.0] {
            let shifted = harmonic_clip(f0 * (s / 12.0).exp2(), 16_000, 16_000);
            let base = harmonic_clip(f0, 16_000, 16_000);
            let target = extract_features(&shifted, &framing, &cfg, 0.0).unwrap();
            let matched = extract_features(&base, &framing, &cfg, s).unwrap();
            let mismatched = extract_features(&base, &framing, &cfg, -s).unwrap();
            let d_match = mean_mfcc_distance(&target, &matched);
            let d_mismatch = mean_mfcc_distance(&target, &mismatched);
            assert!(
                d_match < d_mismatch,
                "s={s}: matched {d_match} should beat mismatched {d_mismatch}"
            );
        }
    }

    #[test]
    fn zero_shift_equals_plain_pipeline() {
        let clip = harmonic_clip(150.0, 16_000, 8_000);
        let framing = FramingConfig::default();
        let cfg = default_cfg();
        let via_param = extract_features(&clip, &framing, &cfg, 0.0).unwrap();

        let spec = spectral::power_spectrogram(&clip.samples, &framing).unwrap();
        let bank = scaled_filterbank(&cfg, 1.0).unwrap();
        let energies = filter_energies(&spec, &bank, cfg.log_floor).unwrap();
        let mfcc = cepstrum(&energies, cfg.coeff_count).unwrap();
        let track = CepstralTrack::new(mfcc, cfg.delta_shift).unwrap();
        let direct = pool_features(&track).unwrap();

        assert_eq!(via_param.values, direct.values);
    }

    #[test]
    fn extraction_is_deterministic() {
        let clip = harmonic_clip(180.0, 16_000, 8_000);
        let framing = FramingConfig {
            window: WindowKind::Hamming,
            ..FramingConfig::default()
        };
        let cfg = default_cfg();
        let a = extract_features(&clip, &framing, &cfg, 1.5).unwrap();
        let b = extract_features(&clip, &framing, &cfg, 1.5).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn short_clip_errors_propagate() {
        let clip = AudioClip {
            sample_rate: 16_000,
            samples: vec![0.0; 400],
        };
        let err =
            extract_features(&clip, &FramingConfig::default(), &default_cfg(), 0.0).unwrap_err();
        assert!(matches!(
            err,
            MelError::Spectral(SpectralError::ClipTooShort { len: 400, .. })
        ));
    }

    #[test]
    fn sample_rate_mismatch_is_rejected() {
        let clip = AudioClip {
            sample_rate: 8_000,
            samples: vec![0.0; 16_000],
        };
        let err =
            extract_features(&clip, &FramingConfig::default(), &default_cfg(), 0.0).unwrap_err();
        assert!(matches!(err, MelError::SampleRateMismatch { clip: 8000, .. }));
    }

    #[test]
    fn config_validation_rejects_degenerate_shapes() {
        let bad = [
            MelBankConfig { coeff_count: 26, ..default_cfg() },
            MelBankConfig { coeff_count: 0, ..default_cfg() },
            MelBankConfig { log_floor: 0.0, ..default_cfg() },
            MelBankConfig { sample_rate: -1.0, ..default_cfg() },
            MelBankConfig { delta_shift: 0, ..default_cfg() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?} should not validate");
        }
        assert!(default_cfg().validate().is_ok());
    }

    proptest! {
        #[test]
        fn center_bins_monotone_for_any_scale(scale in 0.25f64..4.0) {
            let f = center_bins(&default_cfg(), scale).unwrap();
            for w in f.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
        }

        #[test]
        fn center_bins_commute_with_scaling(a in 0.5f64..2.0, b in 0.5f64..2.0) {
            let cfg = default_cfg();
            let scaled = center_bins(&cfg, a * b).unwrap();
            let base = center_bins(&cfg, b).unwrap();
            for (s, x) in scaled.iter().zip(&base) {
                prop_assert!((s - a * x).abs() <= 1e-9 * s.abs().max(1.0));
            }
        }

        #[test]
        fn filter_weights_are_nonnegative(scale in 0.25f64..4.0) {
            let bank = scaled_filterbank(&default_cfg(), scale).unwrap();
            for m in 0..bank.filter_count() {
                prop_assert!(bank.weights(m).iter().all(|&w| w >= 0.0));
            }
        }
    }
}
