//! Corpus metadata: clip naming, speaker/gender bookkeeping, and validated
//! manifests.
//!
//! A manifest can be built three ways: scanning a directory of WAV files
//! whose names follow the Berlin emotional-speech convention, reading an
//! explicit `path,speaker,gender,emotion` listing that overrides name
//! parsing, or reloading a previously serialized manifest. Files that cannot
//! be accepted are collected with reasons rather than dropped silently.

use crate::wav;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "male",
            Gender::Female => "female",
        })
    }
}

impl FromStr for Gender {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            other => Err(CorpusError::Listing(format!("unknown gender {other:?}"))),
        }
    }
}

/// The seven emotion classes. The declaration order fixes the class indices
/// used by the classifiers and confusion bookkeeping everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Neutral,
    Anger,
    Fear,
    Happiness,
    Sadness,
    Disgust,
    Boredom,
}

impl Emotion {
    pub const ALL: [Emotion; 7] = [
        Emotion::Neutral,
        Emotion::Anger,
        Emotion::Fear,
        Emotion::Happiness,
        Emotion::Sadness,
        Emotion::Disgust,
        Emotion::Boredom,
    ];

    pub fn class_index(self) -> usize {
        Self::ALL.iter().position(|&e| e == self).unwrap()
    }

    /// Single-letter code from the corpus naming convention.
    pub fn from_code(code: char) -> Option<Emotion> {
        Some(match code {
            'W' => Emotion::Anger,
            'L' => Emotion::Boredom,
            'E' => Emotion::Disgust,
            'A' => Emotion::Fear,
            'F' => Emotion::Happiness,
            'T' => Emotion::Sadness,
            'N' => Emotion::Neutral,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Anger => "anger",
            Emotion::Fear => "fear",
            Emotion::Happiness => "happiness",
            Emotion::Sadness => "sadness",
            Emotion::Disgust => "disgust",
            Emotion::Boredom => "boredom",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Emotion::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CorpusError::Listing(format!("unknown emotion {s:?}")))
    }
}

/// Everything known about one clip besides its audio.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub speaker_id: String,
    pub gender: Gender,
    pub emotion: Emotion,
    pub text_code: String,
    pub version: String,
}

/// Speaker-to-gender assignment used when parsing file names. Defaults to
/// the published Berlin database speakers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerGenderTable {
    speakers: BTreeMap<String, Gender>,
}

impl Default for SpeakerGenderTable {
    fn default() -> Self {
        let mut speakers = BTreeMap::new();
        for id in ["03", "10", "11", "12", "15"] {
            speakers.insert(id.to_string(), Gender::Male);
        }
        for id in ["08", "09", "13", "14", "16"] {
            speakers.insert(id.to_string(), Gender::Female);
        }
        Self { speakers }
    }
}

impl SpeakerGenderTable {
    pub fn empty() -> Self {
        Self {
            speakers: BTreeMap::new(),
        }
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, Gender)>,
        S: Into<String>,
    {
        Self {
            speakers: pairs.into_iter().map(|(s, g)| (s.into(), g)).collect(),
        }
    }

    pub fn insert(&mut self, speaker: impl Into<String>, gender: Gender) {
        self.speakers.insert(speaker.into(), gender);
    }

    pub fn gender_of(&self, speaker: &str) -> Option<Gender> {
        self.speakers.get(speaker).copied()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("malformed clip name {0:?}: expected 2-digit speaker, 3-char text code, emotion letter, version")]
    MalformedName(String),
    #[error("speaker {0:?} is not in the gender table")]
    UnknownSpeaker(String),
    #[error("unknown emotion code {0:?}")]
    UnknownEmotion(char),
    #[error("need at least 2 speakers per gender for couple folds, found {male} male / {female} female")]
    InsufficientSpeakers { male: usize, female: usize },
    #[error("no valid clips found")]
    EmptyCorpus,
    #[error("listing error: {0}")]
    Listing(String),
    #[error("manifest parse error: {0}")]
    ManifestParse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parse a clip file name like `03a01Fa.wav`: 2-digit speaker, 3-char text
/// code, emotion letter, version character. The speaker is resolved before
/// the emotion letter so an unrecognized speaker is the error reported even
/// when both codes are bad.
pub fn parse_clip_name(name: &str, table: &SpeakerGenderTable) -> Result<ClipMeta, CorpusError> {
    let stem = name
        .strip_suffix(".wav")
        .or_else(|| name.strip_suffix(".WAV"))
        .unwrap_or(name);
    if stem.len() != 7 || !stem.is_ascii() {
        return Err(CorpusError::MalformedName(name.to_string()));
    }
    let bytes = stem.as_bytes();
    if !bytes[0].is_ascii_digit() || !bytes[1].is_ascii_digit() {
        return Err(CorpusError::MalformedName(name.to_string()));
    }
    let speaker_id = &stem[0..2];
    let text_code = &stem[2..5];
    let emotion_code = bytes[5] as char;
    let version = &stem[6..7];

    let gender = table
        .gender_of(speaker_id)
        .ok_or_else(|| CorpusError::UnknownSpeaker(speaker_id.to_string()))?;
    let emotion =
        Emotion::from_code(emotion_code).ok_or(CorpusError::UnknownEmotion(emotion_code))?;
    Ok(ClipMeta {
        speaker_id: speaker_id.to_string(),
        gender,
        emotion,
        text_code: text_code.to_string(),
        version: version.to_string(),
    })
}

/// One accepted clip: where it lives and what it is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub path: PathBuf,
    pub meta: ClipMeta,
}

/// A file that could not be accepted, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub path: PathBuf,
    pub reason: String,
}

/// Validated view of a corpus: accepted entries, per-gender speaker lists,
/// and everything that was turned away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub entries: Vec<CorpusEntry>,
    #[serde(default)]
    pub rejections: Vec<Rejection>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl CorpusManifest {
    /// Assemble and validate: at least one entry and at least two speakers
    /// of each gender. Entries are sorted by path for reproducibility.
    pub fn new(
        mut entries: Vec<CorpusEntry>,
        rejections: Vec<Rejection>,
        warnings: Vec<String>,
    ) -> Result<Self, CorpusError> {
        if entries.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Self {
            entries,
            rejections,
            warnings,
        };
        let (m, f) = (
            manifest.speakers(Gender::Male).len(),
            manifest.speakers(Gender::Female).len(),
        );
        if m < 2 || f < 2 {
            return Err(CorpusError::InsufficientSpeakers { male: m, female: f });
        }
        Ok(manifest)
    }

    /// Sorted unique speaker ids of one gender.
    pub fn speakers(&self, gender: Gender) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.meta.gender == gender)
            .map(|e| e.meta.speaker_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn gender_of_speaker(&self, speaker: &str) -> Option<Gender> {
        self.entries
            .iter()
            .find(|e| e.meta.speaker_id == speaker)
            .map(|e| e.meta.gender)
    }

    pub fn save_toml(&self, path: &Path) -> Result<(), CorpusError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CorpusError::ManifestParse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_toml(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        let manifest: Self =
            toml::from_str(&text).map_err(|e| CorpusError::ManifestParse(e.to_string()))?;
        // Re-validate: serialized manifests are not trusted blindly.
        Self::new(manifest.entries, manifest.rejections, manifest.warnings)
    }
}

/// Decode just enough of each file to learn its sample rate; undecodable
/// files become rejections.
fn probe_rate(path: &Path) -> Result<u32, String> {
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    wav::decode_wav(&bytes)
        .map(|clip| clip.sample_rate)
        .map_err(|e| e.to_string())
}

fn mixed_rate_warning(rates: &BTreeSet<u32>) -> Option<String> {
    (rates.len() > 1).then(|| {
        let list: Vec<String> = rates.iter().map(|r| r.to_string()).collect();
        format!(
            "corpus mixes sample rates: {} Hz; features across rates are not comparable",
            list.join(", ")
        )
    })
}

/// Build a manifest from `root`: a directory of WAV files, a
/// `path,speaker,gender,emotion` listing, or a serialized manifest
/// (`.toml`). Every referenced file is probed so undecodable audio is
/// reported up front.
pub fn load_manifest(root: &Path, table: &SpeakerGenderTable) -> Result<CorpusManifest, CorpusError> {
    if root.is_dir() {
        return load_from_directory(root, table);
    }
    match root.extension().and_then(|e| e.to_str()) {
        Some("toml") => CorpusManifest::load_toml(root),
        _ => load_from_listing(root),
    }
}

fn load_from_directory(
    dir: &Path,
    table: &SpeakerGenderTable,
) -> Result<CorpusManifest, CorpusError> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    names.sort();

    let mut entries = Vec::new();
    let mut rejections = Vec::new();
    let mut rates = BTreeSet::new();
    for path in names {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let meta = match parse_clip_name(&name, table) {
            Ok(meta) => meta,
            Err(e) => {
                rejections.push(Rejection {
                    path,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match probe_rate(&path) {
            Ok(rate) => {
                rates.insert(rate);
                entries.push(CorpusEntry { path, meta });
            }
            Err(reason) => rejections.push(Rejection { path, reason }),
        }
    }
    let warnings = mixed_rate_warning(&rates).into_iter().collect();
    CorpusManifest::new(entries, rejections, warnings)
}

/// Name-derived fields for files that happen to follow the corpus naming
/// convention, so a listing over conventionally named files produces the
/// same manifest a directory scan would.
fn structural_name_parts(path: &Path) -> Option<(String, String)> {
    let stem = path.file_stem()?.to_str()?;
    let bytes = stem.as_bytes();
    (stem.len() == 7
        && stem.is_ascii()
        && bytes[0].is_ascii_digit()
        && bytes[1].is_ascii_digit())
    .then(|| (stem[2..5].to_string(), stem[6..7].to_string()))
}

fn load_from_listing(listing: &Path) -> Result<CorpusManifest, CorpusError> {
    let text = std::fs::read_to_string(listing)?;
    let base = listing.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::new();
    let mut rejections = Vec::new();
    let mut rates = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && fields == ["path", "speaker", "gender", "emotion"] {
            continue;
        }
        if fields.len() != 4 {
            return Err(CorpusError::Listing(format!(
                "line {}: expected path,speaker,gender,emotion, got {} fields",
                lineno + 1,
                fields.len()
            )));
        }
        let path = base.join(fields[0]);
        let (text_code, version) = structural_name_parts(&path).unwrap_or_default();
        let meta = ClipMeta {
            speaker_id: fields[1].to_string(),
            gender: fields[2].parse()?,
            emotion: fields[3].parse()?,
            text_code,
            version,
        };
        match probe_rate(&path) {
            Ok(rate) => {
                rates.insert(rate);
                entries.push(CorpusEntry { path, meta });
            }
            Err(reason) => rejections.push(Rejection { path, reason }),
        }
    }
    let warnings = mixed_rate_warning(&rates).into_iter().collect();
    CorpusManifest::new(entries, rejections, warnings)
}
