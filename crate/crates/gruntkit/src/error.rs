use std::path::PathBuf;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- manifest / ingest ---
    #[error("manifest syntax error at line {line}: {message}")]
    ManifestSyntax { line: usize, message: String },
    #[error("manifest line {line}: duplicate record {recording_id} @ {start_ms} ms")]
    DuplicateRecord {
        line: usize,
        recording_id: String,
        start_ms: u64,
    },
    #[error("manifest line {line}: duration must be 1000 ms (got {got})")]
    BadDuration { line: usize, got: u64 },
    #[error("manifest line {line}: unknown {field} value '{value}'")]
    UnknownEnum {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("manifest line {line}: {message}")]
    InvalidRecord { line: usize, message: String },
    #[error("wav: {0}")]
    Wav(String),
    #[error("clip window [{start_ms} ms, +{duration_ms} ms) out of range for recording of {available_ms} ms")]
    ClipOutOfRange {
        start_ms: u64,
        duration_ms: u64,
        available_ms: u64,
    },
    #[error("silent clip: peak amplitude is zero")]
    SilentClip,
    #[error("invalid synthetic corpus spec: {0}")]
    BadSyntheticSpec(String),
    #[error("missing audio for record {0}")]
    MissingAudio(String),

    // --- dsp / lld ---
    #[error("resample: target rate {target} Hz exceeds source rate {from} Hz (upsampling unsupported)")]
    UpsampleUnsupported { target: u32, from: u32 },
    #[error("dsp: {0}")]
    Dsp(String),
    #[error("clip too short: {samples} samples, need at least {needed}")]
    ClipTooShort { samples: usize, needed: usize },
    #[error("spectrogram is constant before normalization (range {range:.3e}); clip is silent or degenerate")]
    DegenerateSpectrogram { range: f64 },
    #[error("expected a clip at {expected} Hz, got {got} Hz")]
    WrongSampleRate { expected: u32, got: u32 },
    #[error("expected a clip of {expected} samples, got {got}")]
    WrongClipLength { expected: usize, got: usize },

    // --- learn ---
    #[error("training data contains a single class; need both classes present")]
    SingleClass,
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid network config: {0}")]
    BadNetConfig(String),
    #[error("training loss became non-finite at epoch {epoch}, batch {batch} (loss {loss})")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    // --- eval ---
    #[error("fold planning needs at least {k} players, got {players}")]
    TooFewPlayers { k: usize, players: usize },
    #[error("label lists differ in length: {truth} vs {pred}")]
    LabelLengthMismatch { truth: usize, pred: usize },
    #[error("label {0} outside the class set")]
    UnknownLabel(usize),
    #[error("class {0} has no ground-truth samples; recall undefined")]
    EmptyClass(usize),
    #[error("player leakage: players {0:?} appear in both train and test sets")]
    Leakage(Vec<String>),
    #[error("unsupported experiment combination: {0}")]
    BadCombination(String),

    // --- cache / io ---
    #[error("feature cache: {0}")]
    Cache(String),
    #[error("report schema version mismatch: expected {expected}, got {got} in {path}")]
    SchemaVersion {
        expected: u32,
        got: u32,
        path: PathBuf,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
