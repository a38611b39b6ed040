//! Dataset ingestion: manifests, WAV audio, 1000 ms clip slicing, corpus
//! validation, and the synthetic-corpus generator.
//!
//! A corpus is a manifest (CSV, one row per annotated grunt) plus audio. The
//! on-disk "clip store" layout is a directory of per-clip WAV files named
//! `<recording_id>_<start_ms>.wav` next to `manifest.csv`.

pub mod synth;
pub mod wav;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use synth::{generate_synthetic_corpus, SynthCorpus, SyntheticSpec};
pub use wav::{decode_wav, encode_wav};

/// Fixed clip length; every annotation covers exactly one second of audio.
pub const CLIP_MS: u64 = 1000;

/// Speaker sex label. Class ids follow declaration order: female = 0, male = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn class_id(self) -> usize {
        match self {
            Sex::Female => 0,
            Sex::Male => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stroke-outcome label. Class ids: scored = 0, not_scored = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    Scored,
    NotScored,
}

impl Score {
    pub fn class_id(self) -> usize {
        match self {
            Score::Scored => 0,
            Score::NotScored => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Score::Scored => "scored",
            Score::NotScored => "not_scored",
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One annotated grunt: a 1000 ms window into a recording plus its labels.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AnnotationRecord {
    pub recording_id: String,
    pub player_id: String,
    pub start_ms: u64,
    pub duration_ms: u64,
    pub sex: Sex,
    pub score: Score,
}

impl AnnotationRecord {
    /// Stable per-clip identifier, also the clip-store file stem.
    pub fn clip_id(&self) -> String {
        format!("{}_{}", self.recording_id, self.start_ms)
    }
}

/// An ordered set of annotation records plus the paths of the recordings
/// they were cut from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub records: Vec<AnnotationRecord>,
    pub audio_paths: BTreeMap<String, PathBuf>,
}

/// Mono audio with its sample rate and, when sliced from a manifest, the
/// annotation it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source: Option<AnnotationRecord>,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
            source: None,
        }
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

pub const MANIFEST_HEADER: &str = "recording_id,player_id,start_ms,duration_ms,sex,score";

/// Parse a manifest document (CSV with the fixed header).
///
/// Record order is preserved. Duplicate `(recording_id, start_ms)` pairs are
/// rejected, as are records violating the 1000 ms clip-length invariant and
/// players spanning multiple recordings.
pub fn parse_manifest(text: &str) -> Result<DatasetManifest> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| syntax(1, "empty document, expected header"))?;
    if header.trim_end() != MANIFEST_HEADER {
        return Err(syntax(1, format!("bad header, expected '{MANIFEST_HEADER}'")));
    }

    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    // recording <-> player must be 1:1 (one recording per player)
    let mut rec_to_player: BTreeMap<String, String> = BTreeMap::new();
    let mut player_to_rec: BTreeMap<String, String> = BTreeMap::new();

    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(syntax(line_no, format!("expected 6 fields, got {}", fields.len())));
        }
        let recording_id = fields[0].trim().to_string();
        let player_id = fields[1].trim().to_string();
        if recording_id.is_empty() {
            return Err(invalid(line_no, "recording_id is empty"));
        }
        if player_id.is_empty() {
            return Err(invalid(line_no, "player_id is empty"));
        }
        let start_ms: u64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| syntax(line_no, format!("bad start_ms '{}'", fields[2])))?;
        let duration_ms: u64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| syntax(line_no, format!("bad duration_ms '{}'", fields[3])))?;
        if duration_ms != CLIP_MS {
            return Err(Error::BadDuration {
                line: line_no,
                got: duration_ms,
            });
        }
        let sex = match fields[4].trim() {
            "female" => Sex::Female,
            "male" => Sex::Male,
            other => {
                return Err(Error::UnknownEnum {
                    line: line_no,
                    field: "sex",
                    value: other.to_string(),
                })
            }
        };
        let score = match fields[5].trim() {
            "scored" => Score::Scored,
            "not_scored" => Score::NotScored,
            other => {
                return Err(Error::UnknownEnum {
                    line: line_no,
                    field: "score",
                    value: other.to_string(),
                })
            }
        };

        if !seen.insert((recording_id.clone(), start_ms)) {
            return Err(Error::DuplicateRecord {
                line: line_no,
                recording_id,
                start_ms,
            });
        }
        if let Some(p) = rec_to_player.get(&recording_id) {
            if *p != player_id {
                return Err(invalid(
                    line_no,
                    format!("recording {recording_id} already belongs to player {p}"),
                ));
            }
        } else {
            rec_to_player.insert(recording_id.clone(), player_id.clone());
        }
        if let Some(r) = player_to_rec.get(&player_id) {
            if *r != recording_id {
                return Err(invalid(
                    line_no,
                    format!("player {player_id} already has recording {r} (one recording per player)"),
                ));
            }
        } else {
            player_to_rec.insert(player_id.clone(), recording_id.clone());
        }

        records.push(AnnotationRecord {
            recording_id,
            player_id,
            start_ms,
            duration_ms,
            sex,
            score,
        });
    }

    Ok(DatasetManifest {
        records,
        audio_paths: BTreeMap::new(),
    })
}

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::ManifestSyntax {
        line,
        message: message.into(),
    }
}

fn invalid(line: usize, message: impl Into<String>) -> Error {
    Error::InvalidRecord {
        line,
        message: message.into(),
    }
}

/// Serialize a manifest to canonical CSV (LF line endings, lowercase enums).
pub fn serialize_manifest(manifest: &DatasetManifest) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for r in &manifest.records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.recording_id, r.player_id, r.start_ms, r.duration_ms, r.sex, r.score
        ));
    }
    out
}

/// Slice the annotated 1000 ms window out of a full recording.
///
/// The result holds exactly `round(sample_rate * 1.0)` samples and carries the
/// record in its `source` field.
pub fn extract_clip(recording: &AudioClip, record: &AnnotationRecord) -> Result<AudioClip> {
    let rate = f64::from(recording.sample_rate);
    let start = ((record.start_ms as f64) * rate / 1000.0).round() as usize;
    let len = (rate * (record.duration_ms as f64) / 1000.0).round() as usize;
    let end = start
        .checked_add(len)
        .ok_or_else(|| Error::Dsp("clip window overflows".into()))?;
    if end > recording.samples.len() {
        return Err(Error::ClipOutOfRange {
            start_ms: record.start_ms,
            duration_ms: record.duration_ms,
            available_ms: (recording.samples.len() as f64 * 1000.0 / rate) as u64,
        });
    }
    Ok(AudioClip {
        samples: recording.samples[start..end].to_vec(),
        sample_rate: recording.sample_rate,
        source: Some(record.clone()),
    })
}

/// Rescale so the peak magnitude is exactly 1.0. Silence is an error, not a
/// no-op: a silent annotated clip indicates a broken annotation.
pub fn normalize_peak(clip: &AudioClip) -> Result<AudioClip> {
    let peak = clip.peak();
    if peak == 0.0 {
        return Err(Error::SilentClip);
    }
    Ok(AudioClip {
        samples: clip.samples.iter().map(|s| s / peak).collect(),
        sample_rate: clip.sample_rate,
        source: clip.source.clone(),
    })
}

/// Per-player statistics gathered by [`validate_manifest`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct PlayerStats {
    pub player_id: String,
    pub sex: Sex,
    pub clips: usize,
    pub scored: usize,
    pub not_scored: usize,
}

/// Corpus balance report. Violations flag players whose score labels are not
/// evenly split; warnings cover degenerate corpora.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationReport {
    pub players: Vec<PlayerStats>,
    pub female_players: usize,
    pub male_players: usize,
    pub total_records: usize,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_balanced(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} records, {} players ({} female, {} male)",
            self.total_records,
            self.players.len(),
            self.female_players,
            self.male_players
        )?;
        for p in &self.players {
            writeln!(
                f,
                "  {:<12} {:<6} clips={:<4} scored={}/{}",
                p.player_id, p.sex, p.clips, p.scored, p.not_scored
            )?;
        }
        for v in &self.violations {
            writeln!(f, "  violation: {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}

/// Report-only balance check: per-player clip counts, per-player score
/// balance, per-sex player counts. Never fails.
pub fn validate_manifest(manifest: &DatasetManifest) -> ValidationReport {
    let mut order: Vec<String> = Vec::new();
    let mut stats: BTreeMap<String, PlayerStats> = BTreeMap::new();
    for r in &manifest.records {
        let entry = stats.entry(r.player_id.clone()).or_insert_with(|| {
            order.push(r.player_id.clone());
            PlayerStats {
                player_id: r.player_id.clone(),
                sex: r.sex,
                clips: 0,
                scored: 0,
                not_scored: 0,
            }
        });
        entry.clips += 1;
        match r.score {
            Score::Scored => entry.scored += 1,
            Score::NotScored => entry.not_scored += 1,
        }
    }

    let players: Vec<PlayerStats> = order.iter().map(|p| stats[p].clone()).collect();
    let mut violations = Vec::new();
    for p in &players {
        if p.scored != p.not_scored {
            violations.push(format!(
                "player {} has unbalanced score labels: {} scored vs {} not_scored",
                p.player_id, p.scored, p.not_scored
            ));
        }
    }
    let mut warnings = Vec::new();
    if players.is_empty() {
        warnings.push("manifest has no records".to_string());
    }
    let female_players = players.iter().filter(|p| p.sex == Sex::Female).count();
    let male_players = players.len() - female_players;

    ValidationReport {
        players,
        female_players,
        male_players,
        total_records: manifest.records.len(),
        violations,
        warnings,
    }
}

/// A source of per-record audio clips. Implemented by the directory-backed
/// [`ClipStore`] and by in-memory synthetic corpora.
pub trait ClipSource: Sync {
    fn load(&self, record: &AnnotationRecord) -> Result<AudioClip>;
}

/// Directory of per-clip WAV files plus `manifest.csv`.
pub struct ClipStore {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
}

impl ClipStore {
    /// Open an existing store, verifying that every record resolves to a file.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let text = std::fs::read_to_string(dir.join("manifest.csv"))?;
        let manifest = parse_manifest(&text)?;
        for r in &manifest.records {
            let path = clip_path(&dir, r);
            if !path.is_file() {
                return Err(Error::MissingAudio(r.clip_id()));
            }
        }
        Ok(Self { dir, manifest })
    }
}

impl ClipSource for ClipStore {
    fn load(&self, record: &AnnotationRecord) -> Result<AudioClip> {
        let bytes = std::fs::read(clip_path(&self.dir, record))?;
        let mut clip = decode_wav(&bytes)?;
        clip.source = Some(record.clone());
        Ok(clip)
    }
}

/// Clip-store file path for a record: `<recording_id>_<start_ms>.wav`.
pub fn clip_path(dir: &Path, record: &AnnotationRecord) -> PathBuf {
    dir.join(format!("{}.wav", record.clip_id()))
}
