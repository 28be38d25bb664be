//! Run configuration: a single TOML file that pins every parameter of an
//! experiment or sweep, so results are reproducible from one checked-in
//! artifact. Command-line flags may override the top-level paths and seeds,
//! but never the numeric pipeline parameters.

use crate::augment::ShiftPolicy;
use crate::classifier::ExpansionMode;
use crate::harness::ExperimentConfig;
use crate::mel::MelBankConfig;
use crate::spectral::FramingConfig;
use crate::synth::SynthSpec;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("could not read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("could not parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Classifier settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub mode: ExpansionMode,
    /// Explicit ridge term added to the normal equations; 0 relies on the
    /// automatic fallback for singular systems.
    pub ridge: f64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        Self {
            mode: ExpansionMode::None,
            ridge: 0.0,
        }
    }
}

/// The grid a sweep covers. Defaults reproduce the full published grid:
/// seven step sizes by ten ranges, one symmetry, both classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub ranges: Vec<f64>,
    pub steps: Vec<f64>,
    pub symmetries: Vec<f64>,
    /// Classifier modes by name: `none` (alias `linear`), `diagonal`
    /// (alias `quadratic`), `full`.
    pub modes: Vec<String>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            ranges: vec![0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            steps: vec![
                1.0 / 32.0,
                1.0 / 16.0,
                1.0 / 8.0,
                1.0 / 4.0,
                1.0 / 2.0,
                1.0,
                2.0,
            ],
            symmetries: vec![0.75],
            modes: vec!["none".into(), "diagonal".into()],
        }
    }
}

impl SweepSection {
    pub fn parsed_modes(&self) -> Result<Vec<ExpansionMode>, ConfigError> {
        self.modes
            .iter()
            .map(|name| {
                ExpansionMode::from_str(name)
                    .map_err(|e| ConfigError::Invalid(format!("sweep mode {name:?}: {e}")))
            })
            .collect()
    }
}

/// Everything a command needs, with defaults for every key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Corpus root directory, listing file, or saved manifest.
    pub corpus: Option<PathBuf>,
    /// Where reports, audit records and manifests are written.
    pub out: PathBuf,
    /// Feature-cache directory; unset means in-memory caching only.
    pub cache: Option<PathBuf>,
    /// Worker threads; unset lets the runtime decide.
    pub jobs: Option<usize>,
    /// Seed for synthetic-corpus generation.
    pub seed: u64,
    pub framing: FramingConfig,
    pub melbank: MelBankConfig,
    pub classifier: ClassifierSection,
    /// Shift policy used by single runs (sweeps use the `sweep` lists).
    pub policy: ShiftPolicy,
    pub sweep: SweepSection,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            out: PathBuf::from("out"),
            cache: None,
            jobs: None,
            seed: 0,
            framing: FramingConfig::default(),
            melbank: MelBankConfig::default(),
            classifier: ClassifierSection::default(),
            policy: ShiftPolicy::default(),
            sweep: SweepSection::default(),
            synth: SynthSpec::default(),
        }
    }
}

impl RunConfig {
    /// Parse a TOML file. Unknown keys anywhere are errors, so typos fail
    /// before any work starts.
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Check every nested invariant. Commands call this before touching any
    /// data, so an invalid config never produces partial outputs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.framing.validate().map_err(|e| invalid(&e))?;
        self.melbank.validate().map_err(|e| invalid(&e))?;
        self.policy.validate().map_err(|e| invalid(&e))?;
        self.synth.validate().map_err(|e| invalid(&e))?;
        if self.framing.frame_len != self.melbank.frame_len {
            return Err(ConfigError::Invalid(format!(
                "framing.frame_len = {} but melbank.frame_len = {}; they must match",
                self.framing.frame_len, self.melbank.frame_len
            )));
        }
        if !(self.classifier.ridge >= 0.0 && self.classifier.ridge.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "classifier.ridge must be a finite value >= 0, got {}",
                self.classifier.ridge
            )));
        }
        if let Some(jobs) = self.jobs {
            if jobs == 0 {
                return Err(ConfigError::Invalid("jobs must be at least 1".into()));
            }
        }
        if self.sweep.ranges.is_empty()
            || self.sweep.steps.is_empty()
            || self.sweep.symmetries.is_empty()
            || self.sweep.modes.is_empty()
        {
            return Err(ConfigError::Invalid(
                "sweep.ranges, sweep.steps, sweep.symmetries and sweep.modes must be non-empty"
                    .into(),
            ));
        }
        self.sweep.parsed_modes()?;
        // every sweep cell must itself be a valid policy
        for &symmetry in &self.sweep.symmetries {
            for &step in &self.sweep.steps {
                for &range in &self.sweep.ranges {
                    ShiftPolicy::new(range, step, symmetry).map_err(|e| {
                        ConfigError::Invalid(format!(
                            "sweep cell (range {range}, step {step}, symmetry {symmetry}): {e}"
                        ))
                    })?;
                }
            }
        }
        Ok(())
    }

    /// The experiment a `run` command executes.
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            policy: self.policy,
            mode: self.classifier.mode,
            framing: self.framing,
            bank: self.melbank,
            ridge: self.classifier.ridge,
        }
    }

    /// The shared base (framing, bank, ridge) that a sweep varies policies
    /// and modes over.
    pub fn sweep_base(&self) -> ExperimentConfig {
        ExperimentConfig {
            policy: ShiftPolicy::default(),
            mode: ExpansionMode::None,
            framing: self.framing,
            bank: self.melbank,
            ridge: self.classifier.ridge,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_mirror_the_published_grid() {
        let config = RunConfig::default();
        config.validate().unwrap();
        assert_eq!(config.sweep.ranges.len(), 10);
        assert_eq!(config.sweep.steps.len(), 7);
        assert_eq!(config.sweep.symmetries, vec![0.75]);
        assert_eq!(
            config.sweep.parsed_modes().unwrap(),
            vec![ExpansionMode::None, ExpansionMode::Diagonal]
        );
        assert_eq!(config.framing.frame_len, 512);
        assert_eq!(config.melbank.coeff_count, 25);
    }

    #[test]
    fn toml_round_trip_preserves_every_field() {
        let config = RunConfig {
            corpus: Some(PathBuf::from("/data/speech")),
            cache: Some(PathBuf::from("/tmp/cache")),
            jobs: Some(4),
            seed: 99,
            policy: ShiftPolicy::new(4.0, 0.25, 0.75).unwrap(),
            classifier: ClassifierSection {
                mode: ExpansionMode::Diagonal,
                ridge: 1e-6,
            },
            ..RunConfig::default()
        };
        let text = config.to_toml();
        let reloaded: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(config, reloaded);
    }

    #[test]
    fn partial_files_fall_back_to_defaults() {
        let config: RunConfig = toml::from_str(
            r#"
            seed = 7
            [policy]
            range = 2.0
            step = 0.5
            [classifier]
            mode = "diagonal"
            "#,
        )
        .unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.policy.range, 2.0);
        assert_eq!(config.policy.symmetry, 0.75); // default kept
        assert_eq!(config.classifier.mode, ExpansionMode::Diagonal);
        assert_eq!(config.framing.frame_len, 512);
        config.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        assert!(toml::from_str::<RunConfig>("speling_mistake = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[framing]\nwindowing = \"hann\"").is_err());
        assert!(toml::from_str::<RunConfig>("[melbank]\nfilters = 26").is_err());
        assert!(toml::from_str::<RunConfig>("[policy]\nrage = 2.0").is_err());
        assert!(toml::from_str::<RunConfig>("[sweep]\nrange = [1.0]").is_err());
    }

    #[test]
    fn validation_catches_each_section() {
        let mut bad_step = RunConfig::default();
        bad_step.policy.step = 0.0;
        assert!(bad_step.validate().is_err());

        let mut bad_sweep = RunConfig::default();
        bad_sweep.sweep.steps = vec![0.5, -1.0];
        assert!(bad_sweep.validate().is_err());

        let mut bad_mode = RunConfig::default();
        bad_mode.sweep.modes = vec!["cubic".into()];
        assert!(bad_mode.validate().is_err());

        let bad_jobs = RunConfig {
            jobs: Some(0),
            ..RunConfig::default()
        };
        assert!(bad_jobs.validate().is_err());

        let mut mismatched = RunConfig::default();
        mismatched.framing.frame_len = 1024;
        assert!(matches!(mismatched.validate(), Err(ConfigError::Invalid(m)) if m.contains("frame_len")));

        let mut bad_ridge = RunConfig::default();
        bad_ridge.classifier.ridge = -1.0;
        assert!(bad_ridge.validate().is_err());
    }

    #[test]
    fn experiment_assembly_copies_the_right_sections() {
        let config = RunConfig {
            policy: ShiftPolicy::new(4.0, 0.25, 0.75).unwrap(),
            classifier: ClassifierSection {
                mode: ExpansionMode::Full,
                ridge: 0.5,
            },
            ..RunConfig::default()
        };
        let experiment = config.experiment();
        assert_eq!(experiment.policy, config.policy);
        assert_eq!(experiment.mode, ExpansionMode::Full);
        assert_eq!(experiment.ridge, 0.5);
        experiment.validate().unwrap();
        // sweep base shares features but not the single-run policy
        let base = config.sweep_base();
        assert_eq!(base.feature_config_hash(), experiment.feature_config_hash());
        assert_eq!(base.policy, ShiftPolicy::default());
    }

    #[test]
    fn load_surfaces_read_and_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("none.toml");
        assert!(matches!(
            RunConfig::load(&missing),
            Err(ConfigError::Read { .. })
        ));
        let bad = dir.path().join("bad.toml");
        std::fs::write(&bad, "corpus = [not toml").unwrap();
        assert!(matches!(
            RunConfig::load(&bad),
            Err(ConfigError::Parse { .. })
        ));
        let good = dir.path().join("good.toml");
        std::fs::write(&good, "seed = 3\n").unwrap();
        assert_eq!(RunConfig::load(&good).unwrap().seed, 3);
    }
}
