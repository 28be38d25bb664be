//! `emorec` — corpus ingestion, single experiments, parameter sweeps,
//! report rendering, and synthetic-corpus generation.
//!
//! Every command resolves its settings in the same order: built-in defaults,
//! then the `--config` TOML file, then individual command-line flags. The
//! full configuration is validated before any data is touched, and the exit
//! status is zero only when the command completed and wrote everything it
//! declared.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use emorec::augment;
use emorec::config::RunConfig;
use emorec::corpus::{load_manifest, CorpusManifest, Emotion, Gender, SpeakerGenderTable};
use emorec::harness::{self, ExperimentConfig, FeatureCache, SweepCell, SweepReport};
use emorec::report::{self, AuditRecord};
use emorec::synth;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "emorec", version, about = "Speech emotion recognition experiments")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the matching key of the
/// configuration file.
#[derive(Args)]
struct Overrides {
    /// Corpus directory, listing file, or saved manifest
    #[arg(long, global = true, value_name = "PATH")]
    corpus: Option<PathBuf>,
    /// TOML configuration file
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for manifests, tables and audit records
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Feature-cache directory (omit for in-memory caching)
    #[arg(long, global = true, value_name = "DIR")]
    cache: Option<PathBuf>,
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Seed for synthetic-corpus generation
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a corpus, write its manifest, and print summary counts
    Ingest,
    /// Run one experiment and print its error probabilities
    Run,
    /// Evaluate the full (range, step) grid and render CSV tables
    Sweep,
    /// Generate a deterministic synthetic corpus
    Synth,
    /// Re-render CSV tables from a previous audit file
    Report,
}

fn effective_config(overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match &overrides.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(corpus) = &overrides.corpus {
        config.corpus = Some(corpus.clone());
    }
    if let Some(out) = &overrides.out {
        config.out = out.clone();
    }
    if let Some(cache) = &overrides.cache {
        config.cache = Some(cache.clone());
    }
    if let Some(jobs) = overrides.jobs {
        config.jobs = Some(jobs);
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    config.validate()?;
    if let Some(jobs) = config.jobs {
        // the pool can only be sized once per process; later calls would fail
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("could not configure the worker pool")?;
    }
    Ok(config)
}

fn load_corpus(config: &RunConfig) -> Result<CorpusManifest> {
    let path = config
        .corpus
        .as_ref()
        .context("no corpus given: pass --corpus or set `corpus` in the config file")?;
    let manifest = load_manifest(path, &SpeakerGenderTable::default())
        .with_context(|| format!("could not load corpus {}", path.display()))?;
    for warning in &manifest.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(manifest)
}

fn open_cache(config: &RunConfig, experiment: &ExperimentConfig) -> Result<FeatureCache> {
    let hash = experiment.feature_config_hash();
    Ok(match &config.cache {
        Some(dir) => FeatureCache::with_disk(hash, dir)
            .with_context(|| format!("could not open feature cache in {}", dir.display()))?,
        None => FeatureCache::in_memory(hash),
    })
}

fn cmd_ingest(config: &RunConfig) -> Result<()> {
    let manifest = load_corpus(config)?;
    for rejection in &manifest.rejections {
        eprintln!(
            "rejected {}: {}",
            rejection.path.display(),
            rejection.reason
        );
    }
    let mut by_emotion: BTreeMap<Emotion, usize> = BTreeMap::new();
    let mut by_speaker: BTreeMap<String, usize> = BTreeMap::new();
    for entry in &manifest.entries {
        *by_emotion.entry(entry.meta.emotion).or_default() += 1;
        *by_speaker.entry(entry.meta.speaker_id.clone()).or_default() += 1;
    }
    let speaker_count =
        manifest.speakers(Gender::Male).len() + manifest.speakers(Gender::Female).len();
    println!(
        "{} clips, {} speakers, {} emotions",
        manifest.entries.len(),
        speaker_count,
        by_emotion.len()
    );
    for emotion in Emotion::ALL {
        if let Some(n) = by_emotion.get(&emotion) {
            println!("  {emotion}: {n}");
        }
    }
    for (speaker, n) in &by_speaker {
        let gender = manifest
            .gender_of_speaker(speaker)
            .expect("every entry speaker is known");
        println!("  {speaker} ({gender}): {n}");
    }
    std::fs::create_dir_all(&config.out)
        .with_context(|| format!("could not create {}", config.out.display()))?;
    let manifest_path = config.out.join("manifest.toml");
    manifest
        .save_toml(&manifest_path)
        .context("could not write manifest")?;
    println!("manifest written to {}", manifest_path.display());
    Ok(())
}

/// Wrap a single run's outcome as a one-cell report so audit files have a
/// single shape for `run` and `sweep` alike.
fn single_cell_report(
    config: &RunConfig,
    result: &harness::ExperimentResult,
) -> Result<SweepReport> {
    let experiment = config.experiment();
    Ok(SweepReport {
        symmetry: config.policy.symmetry,
        mode: config.classifier.mode,
        ridge: config.classifier.ridge,
        config_hash: experiment.feature_config_hash(),
        cells: vec![SweepCell {
            range: config.policy.range,
            step: config.policy.step,
            enlargement_factor: result.enlargement_factor,
            enlargement_factor_ceiling: augment::enlargement_factor_ceiling(&config.policy)?,
            test_error: result.test_error,
            test_error_macro: result.test_error_macro,
            train_error_augmented: result.train_error_augmented,
            folds: result.folds.clone(),
        }],
    })
}

fn cmd_run(config: &RunConfig) -> Result<()> {
    let manifest = load_corpus(config)?;
    let experiment = config.experiment();
    let cache = open_cache(config, &experiment)?;
    let result = harness::run_experiment(&manifest, &experiment, &cache)?;
    cache.flush()?;

    println!(
        "policy: range {} step {} symmetry {} ({} classifier)",
        config.policy.range,
        config.policy.step,
        config.policy.symmetry,
        config.classifier.mode.name()
    );
    println!("enlargement factor: {}", result.enlargement_factor);
    println!(
        "test error: {:.4} (macro {:.4})",
        result.test_error, result.test_error_macro
    );
    println!(
        "train error (augmented): {:.4}",
        result.train_error_augmented
    );
    if result.ridge_fallbacks > 0 {
        eprintln!(
            "note: {} of {} folds needed the ridge fallback (under-determined solve)",
            result.ridge_fallbacks,
            result.folds.len()
        );
    }

    let record = AuditRecord {
        label: format!(
            "run-{}-k{}-r{}-s{}",
            config.classifier.mode.name(),
            config.policy.symmetry,
            config.policy.range,
            config.policy.step
        ),
        report: single_cell_report(config, &result)?,
    };
    let path = report::write_audit(&config.out, &[record])?;
    println!("audit written to {}", path.display());
    Ok(())
}

fn cmd_sweep(config: &RunConfig) -> Result<()> {
    let manifest = load_corpus(config)?;
    let base = config.sweep_base();
    let cache = open_cache(config, &base)?;
    let modes = config.sweep.parsed_modes()?;
    let progress = config.out.join("progress");
    let reports = harness::run_sweep(
        &manifest,
        &base,
        &config.sweep.ranges,
        &config.sweep.steps,
        &config.sweep.symmetries,
        &modes,
        &cache,
        Some(&progress),
    )?;

    let records: Vec<AuditRecord> = reports
        .iter()
        .map(|r| AuditRecord {
            label: format!("sweep-{}-k{}", r.mode.name(), r.symmetry),
            report: r.clone(),
        })
        .collect();
    let audit_path = report::write_audit(&config.out, &records)?;
    let tables = report::render_tables(&config.out, &reports)?;
    for path in &tables {
        println!("wrote {}", path.display());
    }
    println!("audit written to {}", audit_path.display());
    Ok(())
}

fn cmd_synth(config: &RunConfig) -> Result<()> {
    let corpus = synth::generate_corpus(&config.out, &config.synth, config.seed)
        .with_context(|| format!("could not generate corpus in {}", config.out.display()))?;
    println!(
        "{} files written, listing at {}",
        corpus.files,
        corpus.listing.display()
    );
    Ok(())
}

fn cmd_report(config: &RunConfig) -> Result<()> {
    let audit_path = config.out.join("audit.jsonl");
    let records = report::read_audit(&audit_path)
        .with_context(|| format!("could not read {}", audit_path.display()))?;
    let reports: Vec<SweepReport> = records.into_iter().map(|r| r.report).collect();
    let tables = report::render_tables(&config.out, &reports)?;
    for path in &tables {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = effective_config(&cli.overrides).and_then(|config| match cli.command {
        Command::Ingest => cmd_ingest(&config),
        Command::Run => cmd_run(&config),
        Command::Sweep => cmd_sweep(&config),
        Command::Synth => cmd_synth(&config),
        Command::Report => cmd_report(&config),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
