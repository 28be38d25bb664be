//! Evaluation harness: leave-one-couple-out folds, single experiments with
//! training-only enlargement, and the full parameter sweep.
//!
//! Error aggregation is integer counting and the normal-equation
//! accumulation is chunk-ordered, so a given `(corpus, config)` pair
//! produces bit-identical results whatever the thread count or cache
//! temperature.

use crate::augment::{self, AugmentError, ShiftPolicy};
use crate::classifier::{self, ClassifierError, ExpansionMode, LabeledDataset};
use crate::corpus::{CorpusError, CorpusManifest, Emotion, Gender};
use crate::mel::{self, MelBankConfig, MelError};
use crate::spectral::FramingConfig;
use crate::wav::{decode_wav, AudioClip, WavError};
use dashmap::DashMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// One cross-validation fold: a held-out (male, female) couple and the
/// remaining speakers for training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub test_male: String,
    pub test_female: String,
    pub train_speakers: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("extraction failed for clip {clip}: {source}")]
    Extraction {
        clip: PathBuf,
        #[source]
        source: MelError,
    },
    #[error("could not decode clip {clip}: {source}")]
    Decode {
        clip: PathBuf,
        #[source]
        source: WavError,
    },
    #[error("could not read clip {clip}: {source}")]
    ClipIo {
        clip: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("fold is inconsistent with the corpus: {0}")]
    FoldMismatch(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("cache file {path}: {message}")]
    Cache { path: PathBuf, message: String },
}

/// All (male, female) speaker pairs, in sorted speaker order: 25 folds for a
/// 5+5 corpus.
pub fn loco_folds(manifest: &CorpusManifest) -> Result<Vec<FoldPlan>, HarnessError> {
    let males = manifest.speakers(Gender::Male);
    let females = manifest.speakers(Gender::Female);
    if males.len() < 2 || females.len() < 2 {
        return Err(CorpusError::InsufficientSpeakers {
            male: males.len(),
            female: females.len(),
        }
        .into());
    }
    let mut folds = Vec::with_capacity(males.len() * females.len());
    for m in &males {
        for f in &females {
            let train_speakers = males
                .iter()
                .chain(&females)
                .filter(|s| *s != m && *s != f)
                .cloned()
                .collect();
            folds.push(FoldPlan {
                test_male: m.clone(),
                test_female: f.clone(),
                train_speakers,
            });
        }
    }
    Ok(folds)
}

/// Everything one experiment cell needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub policy: ShiftPolicy,
    pub mode: ExpansionMode,
    pub framing: FramingConfig,
    pub bank: MelBankConfig,
    pub ridge: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            policy: ShiftPolicy::default(),
            mode: ExpansionMode::default(),
            framing: FramingConfig::default(),
            bank: MelBankConfig::default(),
            ridge: 0.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.policy
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        self.framing
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        self.bank
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        if self.framing.frame_len != self.bank.frame_len {
            return Err(HarnessError::InvalidConfig(format!(
                "framing frame_len {} != bank frame_len {}",
                self.framing.frame_len, self.bank.frame_len
            )));
        }
        if self.ridge < 0.0 || self.ridge.is_nan() {
            return Err(HarnessError::InvalidConfig(format!(
                "ridge must be >= 0, got {}",
                self.ridge
            )));
        }
        Ok(())
    }

    /// Stable hash over the parameters that determine feature values
    /// (framing + bank). Policies and classifier settings deliberately do
    /// not contribute: features at a given shift are shared across cells.
    pub fn feature_config_hash(&self) -> u64 {
        let canonical = format!("{:?}|{:?}", self.framing, self.bank);
        // FNV-1a: stable across runs, platforms and toolchains
        let mut hash: u64 = 0xcbf29ce484222325;
        for byte in canonical.bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        hash
    }
}

/// Feature vectors for (clip, shift) pairs under one feature config,
/// optionally mirrored to a JSONL file so later runs skip extraction.
pub struct FeatureCache {
    config_hash: u64,
    map: DashMap<(String, u64), Vec<f64>>,
    disk_path: Option<PathBuf>,
    dirty: Mutex<Vec<CacheRow>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRow {
    clip: String,
    /// Bit pattern of the shift, the exact key.
    psf_bits: u64,
    /// The shift as a number, for human readers.
    psf: f64,
    values: Vec<f64>,
}

impl FeatureCache {
    pub fn in_memory(config_hash: u64) -> Self {
        Self {
            config_hash,
            map: DashMap::new(),
            disk_path: None,
            dirty: Mutex::new(Vec::new()),
        }
    }

    /// Cache backed by `dir/features-<hash>.jsonl`; existing rows are loaded
    /// eagerly.
    pub fn with_disk(config_hash: u64, dir: &Path) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("features-{config_hash:016x}.jsonl"));
        let cache = Self {
            config_hash,
            map: DashMap::new(),
            disk_path: Some(path.clone()),
            dirty: Mutex::new(Vec::new()),
        };
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            for (i, line) in text.lines().enumerate() {
                if line.is_empty() {
                    continue;
                }
                let row: CacheRow =
                    serde_json::from_str(line).map_err(|e| HarnessError::Cache {
                        path: path.clone(),
                        message: format!("line {}: {e}", i + 1),
                    })?;
                cache.map.insert((row.clip, row.psf_bits), row.values);
            }
        }
        Ok(cache)
    }

    pub fn config_hash(&self) -> u64 {
        self.config_hash
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, clip: &str, p_sf: f64) -> Option<Vec<f64>> {
        self.map
            .get(&(clip.to_string(), p_sf.to_bits()))
            .map(|v| v.clone())
    }

    /// Idempotent: a key already present keeps its first value and is not
    /// re-queued for the disk mirror.
    pub fn insert(&self, clip: &str, p_sf: f64, values: Vec<f64>) {
        let key = (clip.to_string(), p_sf.to_bits());
        let mut fresh = false;
        self.map.entry(key).or_insert_with(|| {
            fresh = true;
            values.clone()
        });
        if fresh && self.disk_path.is_some() {
            self.dirty.lock().unwrap().push(CacheRow {
                clip: clip.to_string(),
                psf_bits: p_sf.to_bits(),
                psf: p_sf,
                values,
            });
        }
    }

    /// Append rows added since the last flush to the disk mirror.
    pub fn flush(&self) -> Result<(), HarnessError> {
        let Some(path) = &self.disk_path else {
            return Ok(());
        };
        let mut dirty = self.dirty.lock().unwrap();
        if dirty.is_empty() {
            return Ok(());
        }
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        let mut buf = String::new();
        for row in dirty.iter() {
            buf.push_str(&serde_json::to_string(row).map_err(|e| HarnessError::Cache {
                path: path.clone(),
                message: e.to_string(),
            })?);
            buf.push('\n');
        }
        file.write_all(buf.as_bytes())?;
        dirty.clear();
        Ok(())
    }
}

/// Counts from one fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub test_errors: usize,
    pub test_count: usize,
    /// Errors of the fitted model on its own (augmented) training set.
    pub train_errors: usize,
    pub train_count: usize,
    /// Extraction tasks the fold executed (training expansions + test clips).
    pub task_count: usize,
    /// True when the solver needed the automatic ridge fallback.
    pub ridge_fallback: bool,
}

/// Deterministic class indexing for a manifest: the emotions present, in
/// canonical order.
pub fn class_map(manifest: &CorpusManifest) -> Vec<Emotion> {
    let present: BTreeSet<Emotion> = manifest.entries.iter().map(|e| e.meta.emotion).collect();
    Emotion::ALL
        .into_iter()
        .filter(|e| present.contains(e))
        .collect()
}

fn feature_or_extract(
    manifest: &CorpusManifest,
    clips: &HashMap<usize, AudioClip>,
    config: &ExperimentConfig,
    cache: &FeatureCache,
    entry_index: usize,
    p_sf: f64,
) -> Result<Vec<f64>, HarnessError> {
    let path = &manifest.entries[entry_index].path;
    let clip_id = path.to_string_lossy();
    if let Some(values) = cache.get(&clip_id, p_sf) {
        return Ok(values);
    }
    let clip = clips
        .get(&entry_index)
        .expect("clip decoded for every uncached task");
    let features = mel::extract_features(clip, &config.framing, &config.bank, p_sf)
        .map_err(|source| HarnessError::Extraction {
            clip: path.clone(),
            source,
        })?;
    cache.insert(&clip_id, p_sf, features.values.clone());
    Ok(features.values)
}

/// Train on the augmented training speakers, test on the untouched couple.
pub fn run_fold(
    manifest: &CorpusManifest,
    fold: &FoldPlan,
    config: &ExperimentConfig,
    cache: &FeatureCache,
) -> Result<FoldOutcome, HarnessError> {
    config.validate()?;
    // structural purity: the held-out couple never overlaps training
    if fold.train_speakers.contains(&fold.test_male)
        || fold.train_speakers.contains(&fold.test_female)
    {
        return Err(HarnessError::FoldMismatch(format!(
            "test couple ({}, {}) appears in the training set",
            fold.test_male, fold.test_female
        )));
    }
    for speaker in [&fold.test_male, &fold.test_female] {
        if manifest.gender_of_speaker(speaker).is_none() {
            return Err(HarnessError::FoldMismatch(format!(
                "test speaker {speaker:?} is not in the corpus"
            )));
        }
    }

    let tasks = augment::augment_plan(manifest, &fold.train_speakers, &config.policy)?;
    // purity: test clips are exactly the untouched P_SF = 0 extractions
    debug_assert!(tasks.iter().all(|t| t.is_train || t.p_sf == 0.0));

    // decode each clip once, and only if some task of it is uncached
    let needed: BTreeSet<usize> = tasks
        .iter()
        .filter(|t| {
            cache
                .get(
                    &manifest.entries[t.entry_index].path.to_string_lossy(),
                    t.p_sf,
                )
                .is_none()
        })
        .map(|t| t.entry_index)
        .collect();
    let decoded: HashMap<usize, AudioClip> = needed
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|i| {
            let path = &manifest.entries[i].path;
            let bytes = std::fs::read(path).map_err(|source| HarnessError::ClipIo {
                clip: path.clone(),
                source,
            })?;
            let clip = decode_wav(&bytes).map_err(|source| HarnessError::Decode {
                clip: path.clone(),
                source,
            })?;
            Ok((i, clip))
        })
        .collect::<Result<_, HarnessError>>()?;

    let features: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|t| feature_or_extract(manifest, &decoded, config, cache, t.entry_index, t.p_sf))
        .collect::<Result<_, _>>()?;

    let classes = class_map(manifest);
    let label_of = |emotion: Emotion| -> usize {
        classes.iter().position(|&e| e == emotion).unwrap()
    };
    let mut train_features = Vec::new();
    let mut train_labels = Vec::new();
    let mut test_features = Vec::new();
    let mut test_labels = Vec::new();
    for (task, values) in tasks.iter().zip(features) {
        let label = label_of(manifest.entries[task.entry_index].meta.emotion);
        if task.is_train {
            train_features.push(values);
            train_labels.push(label);
        } else {
            test_features.push(values);
            test_labels.push(label);
        }
    }

    let train = LabeledDataset::new(train_features, train_labels, classes.len())?;
    let test = LabeledDataset::new(test_features, test_labels, classes.len())?;
    let model = classifier::fit_least_squares(&train, config.mode, config.ridge)?;
    Ok(FoldOutcome {
        test_errors: classifier::error_count(&model, &test)?,
        test_count: test.len(),
        train_errors: classifier::error_count(&model, &train)?,
        train_count: train.len(),
        task_count: tasks.len(),
        ridge_fallback: model.ridge_fallback(),
    })
}

/// Pooled results over all folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    /// Pooled error: Σ errors / Σ test patterns.
    pub test_error: f64,
    /// Unweighted mean of per-fold error rates.
    pub test_error_macro: f64,
    /// Pooled error of each fold's model on its augmented training set.
    pub train_error_augmented: f64,
    pub enlargement_factor: usize,
    pub folds: Vec<FoldOutcome>,
    /// Folds whose solve needed the ridge fallback.
    pub ridge_fallbacks: usize,
}

/// Run every leave-one-couple-out fold and pool the counts.
pub fn run_experiment(
    manifest: &CorpusManifest,
    config: &ExperimentConfig,
    cache: &FeatureCache,
) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let folds = loco_folds(manifest)?;
    let mut outcomes = Vec::with_capacity(folds.len());
    for fold in &folds {
        outcomes.push(run_fold(manifest, fold, config, cache)?);
    }
    let test_errors: usize = outcomes.iter().map(|o| o.test_errors).sum();
    let test_count: usize = outcomes.iter().map(|o| o.test_count).sum();
    let train_errors: usize = outcomes.iter().map(|o| o.train_errors).sum();
    let train_count: usize = outcomes.iter().map(|o| o.train_count).sum();
    let macro_mean = outcomes
        .iter()
        .map(|o| o.test_errors as f64 / o.test_count as f64)
        .sum::<f64>()
        / outcomes.len() as f64;
    Ok(ExperimentResult {
        test_error: test_errors as f64 / test_count as f64,
        test_error_macro: macro_mean,
        train_error_augmented: train_errors as f64 / train_count as f64,
        enlargement_factor: augment::enlargement_factor(&config.policy)?,
        ridge_fallbacks: outcomes.iter().filter(|o| o.ridge_fallback).count(),
        folds: outcomes,
    })
}

/// One sweep cell: a `(range, step)` pair evaluated end to end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub range: f64,
    pub step: f64,
    pub enlargement_factor: usize,
    /// The ceiling-form enlargement count, kept so discrepancies stay
    /// visible in the rendered reports.
    pub enlargement_factor_ceiling: usize,
    pub test_error: f64,
    pub test_error_macro: f64,
    pub train_error_augmented: f64,
    pub folds: Vec<FoldOutcome>,
}

/// All cells for one (symmetry, classifier mode) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub symmetry: f64,
    pub mode: ExpansionMode,
    pub ridge: f64,
    pub config_hash: u64,
    /// Row-major over (step, range) in input order.
    pub cells: Vec<SweepCell>,
}

/// Header line of a sweep progress file; guards against resuming with a
/// different configuration.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct ProgressHeader {
    config_hash: u64,
    symmetry: f64,
    mode: ExpansionMode,
    ridge: f64,
}

fn progress_file(dir: &Path, mode: ExpansionMode, symmetry: f64) -> PathBuf {
    dir.join(format!("sweep-{}-k{}.jsonl", mode.name(), symmetry))
}

fn load_progress(
    path: &Path,
    header: &ProgressHeader,
) -> Result<BTreeMap<(u64, u64), SweepCell>, HarnessError> {
    let mut done = BTreeMap::new();
    if !path.exists() {
        return Ok(done);
    }
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.is_empty());
    let Some(first) = lines.next() else {
        return Ok(done);
    };
    let on_disk: ProgressHeader = match serde_json::from_str(first) {
        Ok(h) => h,
        Err(_) => return Ok(done), // unreadable header: recompute from scratch
    };
    if on_disk != *header {
        return Ok(done); // different config: stale progress is ignored
    }
    for line in lines {
        let cell: SweepCell = serde_json::from_str(line).map_err(|e| HarnessError::Cache {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        done.insert((cell.step.to_bits(), cell.range.to_bits()), cell);
    }
    Ok(done)
}

/// Sweep every (symmetry, mode, step, range) combination. With a progress
/// directory, each completed cell is appended to a per-report JSONL file and
/// a rerun resumes after the last finished cell.
#[allow(clippy::too_many_arguments)]
pub fn run_sweep(
    manifest: &CorpusManifest,
    base: &ExperimentConfig,
    ranges: &[f64],
    steps: &[f64],
    symmetries: &[f64],
    modes: &[ExpansionMode],
    cache: &FeatureCache,
    progress_dir: Option<&Path>,
) -> Result<Vec<SweepReport>, HarnessError> {
    if ranges.is_empty() || steps.is_empty() || symmetries.is_empty() || modes.is_empty() {
        return Err(HarnessError::InvalidConfig(
            "sweep lists must be non-empty".into(),
        ));
    }
    if let Some(dir) = progress_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut reports = Vec::new();
    for &symmetry in symmetries {
        for &mode in modes {
            let header = ProgressHeader {
                config_hash: base.feature_config_hash(),
                symmetry,
                mode,
                ridge: base.ridge,
            };
            let path = progress_dir.map(|d| progress_file(d, mode, symmetry));
            let mut done = match &path {
                Some(p) => load_progress(p, &header)?,
                None => BTreeMap::new(),
            };
            if let Some(p) = &path {
                if done.is_empty() {
                    // fresh or stale file: rewrite with the current header
                    let mut text = serde_json::to_string(&header).unwrap();
                    text.push('\n');
                    std::fs::write(p, text)?;
                }
            }

            let mut cells = Vec::with_capacity(steps.len() * ranges.len());
            for &step in steps {
                for &range in ranges {
                    let key = (step.to_bits(), range.to_bits());
                    if let Some(cell) = done.remove(&key) {
                        cells.push(cell);
                        continue;
                    }
                    let config = ExperimentConfig {
                        policy: ShiftPolicy {
                            range,
                            step,
                            symmetry,
                        },
                        mode,
                        ..*base
                    };
                    let result = run_experiment(manifest, &config, cache)?;
                    let cell = SweepCell {
                        range,
                        step,
                        enlargement_factor: result.enlargement_factor,
                        enlargement_factor_ceiling: augment::enlargement_factor_ceiling(
                            &config.policy,
                        )?,
                        test_error: result.test_error,
                        test_error_macro: result.test_error_macro,
                        train_error_augmented: result.train_error_augmented,
                        folds: result.folds,
                    };
                    if let Some(p) = &path {
                        let mut line = serde_json::to_string(&cell).unwrap();
                        line.push('\n');
                        std::fs::OpenOptions::new()
                            .append(true)
                            .open(p)?
                            .write_all(line.as_bytes())?;
                    }
                    cache.flush()?;
                    cells.push(cell);
                }
            }
            reports.push(SweepReport {
                symmetry,
                mode,
                ridge: base.ridge,
                config_hash: base.feature_config_hash(),
                cells,
            });
        }
    }
    cache.flush()?;
    Ok(reports)
}
