//! Training-set enlargement: gender-dependent pitch-shift grids and the
//! bookkeeping around them.
//!
//! A policy `(R, S, K)` expands every training clip into virtual copies at
//! pitch shifts `n·S` semitones. Male voices get the asymmetric range
//! `[−K·R, R]` (room to shift up), female voices the mirror `[−R, K·R]`.
//! Grids are built from integer multiples of `S` — never by accumulating the
//! step — so fractional steps like 1/32 produce exact counts.

use crate::corpus::{CorpusManifest, Gender};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Enlargement policy: maximum shift `range` (R, semitones), grid step
/// `step` (S, semitones), and the asymmetry knob `symmetry` (K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftPolicy {
    pub range: f64,
    pub step: f64,
    pub symmetry: f64,
}

impl Default for ShiftPolicy {
    fn default() -> Self {
        Self {
            range: 0.0,
            step: 1.0,
            symmetry: 0.75,
        }
    }
}

impl ShiftPolicy {
    pub fn new(range: f64, step: f64, symmetry: f64) -> Result<Self, AugmentError> {
        let policy = Self {
            range,
            step,
            symmetry,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.range < 0.0 || !self.range.is_finite() {
            return Err(AugmentError::InvalidPolicy(format!(
                "range must be finite and >= 0, got {}",
                self.range
            )));
        }
        if self.step <= 0.0 || !self.step.is_finite() {
            return Err(AugmentError::InvalidPolicy(format!(
                "step must be finite and > 0, got {}",
                self.step
            )));
        }
        if !(self.symmetry > 0.0 && self.symmetry <= 1.0) {
            return Err(AugmentError::InvalidPolicy(format!(
                "symmetry must be in (0, 1], got {}",
                self.symmetry
            )));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("invalid shift policy: {0}")]
    InvalidPolicy(String),
    #[error("training speaker {0:?} is not in the manifest")]
    UnknownSpeaker(String),
}

/// Semitone shift → multiplicative frequency scale factor, `2^(P_SF/12)`.
pub fn fsf(p_sf: f64) -> f64 {
    (p_sf / 12.0).exp2()
}

/// The pitch shifts one gender's training clips are expanded over.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftGrid {
    shifts: Vec<f64>,
    gender: Gender,
}

impl ShiftGrid {
    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn gender(&self) -> Gender {
        self.gender
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }
}

/// Tolerance for deciding whether a multiple of the step still sits inside
/// the range: counters an ulp of error in `K·R/S` without ever admitting a
/// genuinely out-of-range multiple at practical semitone magnitudes.
const GRID_EPS: f64 = 1e-9;

fn multiples_within(bound: f64, step: f64) -> i64 {
    (bound / step + GRID_EPS).floor() as i64
}

/// All shifts `n·S` (integer n) inside the gender's range, ascending.
/// Endpoints appear only when they are exact multiples of the step.
pub fn shift_grid(policy: &ShiftPolicy, gender: Gender) -> Result<ShiftGrid, AugmentError> {
    policy.validate()?;
    let up = match gender {
        Gender::Male => policy.range,
        Gender::Female => policy.symmetry * policy.range,
    };
    let down = match gender {
        Gender::Male => policy.symmetry * policy.range,
        Gender::Female => policy.range,
    };
    let shifts = (-multiples_within(down, policy.step)..=multiples_within(up, policy.step))
        .map(|n| n as f64 * policy.step)
        .collect();
    Ok(ShiftGrid { shifts, gender })
}

/// How many patterns each training clip becomes: the grid cardinality
/// `floor(R/S) + floor(K·R/S) + 1`, identical for both genders.
pub fn enlargement_factor(policy: &ShiftPolicy) -> Result<usize, AugmentError> {
    policy.validate()?;
    Ok((multiples_within(policy.range, policy.step)
        + multiples_within(policy.symmetry * policy.range, policy.step)
        + 1) as usize)
}

/// The closed form `ceil(R·(1+K)/S) + 1` sometimes quoted for the
/// enlargement factor. It overcounts whenever the range is not an exact
/// multiple of the step; [`enlargement_factor`] is authoritative and report
/// output flags cells where the two disagree.
pub fn enlargement_factor_ceiling(policy: &ShiftPolicy) -> Result<usize, AugmentError> {
    policy.validate()?;
    let ratio = policy.range * (1.0 + policy.symmetry) / policy.step;
    Ok(((ratio - GRID_EPS).ceil().max(0.0) as usize) + 1)
}

/// One feature-extraction job: a manifest entry index, the shift to extract
/// it at, and whether it belongs to the training side of the split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionTask {
    pub entry_index: usize,
    pub p_sf: f64,
    pub is_train: bool,
}

/// Expand a train/test split into extraction tasks: every training clip gets
/// one task per grid shift of its gender, every other clip exactly one task
/// at `P_SF = 0`.
pub fn augment_plan(
    manifest: &CorpusManifest,
    train_speakers: &BTreeSet<String>,
    policy: &ShiftPolicy,
) -> Result<Vec<ExtractionTask>, AugmentError> {
    for speaker in train_speakers {
        if manifest.gender_of_speaker(speaker).is_none() {
            return Err(AugmentError::UnknownSpeaker(speaker.clone()));
        }
    }
    let male_grid = shift_grid(policy, Gender::Male)?;
    let female_grid = shift_grid(policy, Gender::Female)?;
    let mut tasks = Vec::new();
    for (entry_index, entry) in manifest.entries.iter().enumerate() {
        if train_speakers.contains(&entry.meta.speaker_id) {
            let grid = match entry.meta.gender {
                Gender::Male => &male_grid,
                Gender::Female => &female_grid,
            };
            tasks.extend(grid.shifts().iter().map(|&p_sf| ExtractionTask {
                entry_index,
                p_sf,
                is_train: true,
            }));
        } else {
            tasks.push(ExtractionTask {
                entry_index,
                p_sf: 0.0,
                is_train: false,
            });
        }
    }
    Ok(tasks)
}
