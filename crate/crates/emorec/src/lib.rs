//! Speech emotion recognition from mel-cepstral statistics.
//!
//! The crate covers the whole experiment loop: decoding a corpus of WAV
//! clips, reducing every clip to a fixed-length vector of cepstral
//! statistics, enlarging the training set with gender-dependent pitch-shift
//! copies, fitting regularized least-squares classifiers, and sweeping the
//! enlargement parameters under leave-one-couple-out cross-validation.
//!
//! Modules mirror the stages of that loop:
//!
//! - [`wav`] / [`corpus`]: clip decoding and corpus manifests
//! - [`spectral`]: framing, windowing, per-frame power spectra
//! - [`mel`]: filter banks, cepstra, deltas, pooled feature vectors
//! - [`augment`]: pitch-shift grids and enlargement bookkeeping
//! - [`classifier`]: least-squares models over expanded features
//! - [`harness`]: folds, experiments, sweeps, the feature cache
//! - [`synth`]: deterministic synthetic corpora for end-to-end runs
//! - [`report`]: CSV/JSONL rendering of sweep results
//! - [`config`]: TOML run configuration

pub mod augment;
pub mod classifier;
pub mod config;
pub mod corpus;
pub mod harness;
pub mod mel;
pub mod report;
pub mod spectral;
pub mod synth;
pub mod wav;

/// Compile every code block of the guide (`book/`) as a doc-test, so the
/// prose can never drift from the API it demonstrates.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/augmentation.md")]
    mod augmentation {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    mod classifier {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
