//! On-disk feature cache.
//!
//! One cache directory holds one feature family: `features.bin` is a
//! concatenation of per-clip records (magic `GRNT`, version u16, T and D as
//! u32, row-major little-endian f64), and `features.idx.json` maps clip ids
//! to record offsets together with the clip content hash and the feature
//! schema version. Entries are invalidated by content hash or schema
//! mismatch, which makes extraction idempotent.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::dsp::FrameMatrix;
use crate::error::{Error, Result};
use crate::eval::features::{ClipFeature, FeatureKind};
use crate::lld::LldConfig;

const MAGIC: &[u8; 4] = b"GRNT";
const RECORD_VERSION: u16 = 1;
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
struct IndexEntry {
    offset: u64,
    rows: u32,
    cols: u32,
    content_hash: String,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
struct Index {
    version: u32,
    feature: String,
    schema: String,
    entries: BTreeMap<String, IndexEntry>,
}

/// A directory-backed cache for one feature family.
pub struct FeatureCache {
    dir: PathBuf,
    feature: FeatureKind,
    index: Index,
    dirty: bool,
}

impl FeatureCache {
    /// Open (or create) the cache subdirectory for a feature. An existing
    /// index written for a different schema version is discarded.
    pub fn open(root: impl AsRef<Path>, feature: FeatureKind) -> Result<Self> {
        let dir = root.as_ref().join(feature.as_str());
        std::fs::create_dir_all(&dir)?;
        let index_path = dir.join("features.idx.json");
        let fresh = || Index {
            version: INDEX_VERSION,
            feature: feature.as_str().to_string(),
            schema: feature.schema_version().to_string(),
            entries: BTreeMap::new(),
        };
        let index = if index_path.is_file() {
            let parsed: Index = serde_json::from_str(&std::fs::read_to_string(&index_path)?)?;
            if parsed.version != INDEX_VERSION
                || parsed.feature != feature.as_str()
                || parsed.schema != feature.schema_version()
            {
                fresh()
            } else {
                parsed
            }
        } else {
            fresh()
        };
        Ok(Self {
            dir,
            feature,
            index,
            dirty: false,
        })
    }

    pub fn len(&self) -> usize {
        self.index.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.entries.is_empty()
    }

    /// Whether an up-to-date entry exists for this clip content.
    pub fn contains(&self, clip_id: &str, content_hash: u64) -> bool {
        self.index
            .entries
            .get(clip_id)
            .is_some_and(|e| e.content_hash == format!("{content_hash:016x}"))
    }

    /// Load a cached feature; `None` when absent or stale.
    pub fn get(&self, clip_id: &str, content_hash: u64) -> Result<Option<ClipFeature>> {
        let Some(entry) = self.index.entries.get(clip_id) else {
            return Ok(None);
        };
        if entry.content_hash != format!("{content_hash:016x}") {
            return Ok(None);
        }
        let bytes = std::fs::read(self.dir.join("features.bin"))?;
        let record_len = 4 + 2 + 4 + 4 + (entry.rows as usize * entry.cols as usize) * 8;
        let start = entry.offset as usize;
        if bytes.len() < start + record_len {
            return Err(Error::Cache(format!(
                "record for {clip_id} extends past the end of features.bin"
            )));
        }
        let record = &bytes[start..start + record_len];
        if &record[0..4] != MAGIC {
            return Err(Error::Cache(format!("bad magic for record {clip_id}")));
        }
        let version = u16::from_le_bytes([record[4], record[5]]);
        if version != RECORD_VERSION {
            return Err(Error::Cache(format!("unsupported record version {version}")));
        }
        let rows = u32::from_le_bytes(record[6..10].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(record[10..14].try_into().unwrap()) as usize;
        if rows != entry.rows as usize || cols != entry.cols as usize {
            return Err(Error::Cache(format!("index/record shape mismatch for {clip_id}")));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows * cols {
            let at = 14 + i * 8;
            values.push(f64::from_le_bytes(record[at..at + 8].try_into().unwrap()));
        }
        self.rebuild(rows, cols, values).map(Some)
    }

    /// Reassemble a `ClipFeature` from a raw record: one row is a vector,
    /// otherwise a sequence whose channel naming comes from the feature kind.
    fn rebuild(&self, rows: usize, cols: usize, values: Vec<f64>) -> Result<ClipFeature> {
        if rows == 1 {
            return Ok(ClipFeature::Vector(values));
        }
        let (names, period): (Vec<String>, f64) = match self.feature {
            FeatureKind::Mfcc => (
                (0..cols).map(|i| format!("mfcc_{i:02}")).collect(),
                1024.0 * 1000.0 / 44100.0,
            ),
            FeatureKind::Spectrogram => (
                (0..cols).map(|i| format!("freq_{i:03}")).collect(),
                1000.0 / 227.0,
            ),
            _ => {
                let base = LldConfig::default().base_channel_names();
                let mut names: Vec<String> = base.clone();
                names.extend(base.iter().map(|n| format!("{n}Δ")));
                if names.len() != cols {
                    return Err(Error::Cache(format!(
                        "cached LLD record has {cols} channels, schema expects {}",
                        names.len()
                    )));
                }
                (names, 10.0)
            }
        };
        let matrix = FrameMatrix::new(values, rows, cols, period, names)
            .map_err(|e| Error::Cache(format!("corrupt cached record: {e}")))?;
        Ok(ClipFeature::Sequence(matrix))
    }

    /// Append a record and update the in-memory index. Call [`Self::flush`]
    /// to persist the index.
    pub fn put(&mut self, clip_id: &str, content_hash: u64, feature: &ClipFeature) -> Result<()> {
        let (rows, cols, data): (usize, usize, &[f64]) = match feature {
            ClipFeature::Vector(v) => (1, v.len(), v),
            ClipFeature::Sequence(m) => (m.rows(), m.cols(), m.data()),
        };
        let bin_path = self.dir.join("features.bin");
        let offset = std::fs::metadata(&bin_path).map(|m| m.len()).unwrap_or(0);

        let mut record = Vec::with_capacity(14 + data.len() * 8);
        record.extend_from_slice(MAGIC);
        record.extend_from_slice(&RECORD_VERSION.to_le_bytes());
        record.extend_from_slice(&(rows as u32).to_le_bytes());
        record.extend_from_slice(&(cols as u32).to_le_bytes());
        for v in data {
            record.extend_from_slice(&v.to_le_bytes());
        }
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&bin_path)?;
        file.write_all(&record)?;

        self.index.entries.insert(
            clip_id.to_string(),
            IndexEntry {
                offset,
                rows: rows as u32,
                cols: cols as u32,
                content_hash: format!("{content_hash:016x}"),
            },
        );
        self.dirty = true;
        Ok(())
    }

    /// Atomically persist the index (write to a temp file, then rename).
    pub fn flush(&mut self) -> Result<()> {
        if !self.dirty {
            return Ok(());
        }
        let tmp = self.dir.join("features.idx.json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&self.index)?)?;
        std::fs::rename(&tmp, self.dir.join("features.idx.json"))?;
        self.dirty = false;
        Ok(())
    }
}

/// FNV-1a over raw bytes; used to key cache entries by clip content.
pub fn content_hash(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
