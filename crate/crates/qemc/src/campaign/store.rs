//! On-disk campaign state: output directory layout, resume manifest, and
//! schema-checked CSV emission.
//!
//! Layout per campaign directory:
//!   config.json    copy of the validated configuration
//!   manifest.json  config hash plus the set of completed cells
//!   cells/<key>.json  rows of one completed unit of work
//!   *.csv, *.json  final assembled artifacts

use super::config::CampaignConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("campaign directory holds a different config (manifest hash {found}, config hash {expected}); refuse to mix results")]
    ConfigMismatch { expected: String, found: String },
    #[error("csv schema mismatch in {file}: expected header {expected:?}, found {found:?}")]
    SchemaMismatch { file: String, expected: Vec<String>, found: Vec<String> },
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io { path: path.to_path_buf(), source }
}

/// One result row of a gap computation. Optional columns stay empty for
/// strategies they do not apply to.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GapRow {
    pub n: usize,
    pub seed: u64,
    pub kind: String,
    pub gamma: Option<f64>,
    pub t: Option<f64>,
    pub dt: Option<f64>,
    pub chi: Option<usize>,
    #[serde(rename = "T")]
    pub temperature: Option<f64>,
    pub delta: f64,
    pub method: String,
}

pub const GAP_HEADER: [&str; 10] =
    ["n", "seed", "kind", "gamma", "t", "dt", "chi", "T", "delta", "method"];

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    /// Cell key -> relative path of the stored rows.
    completed: BTreeMap<String, String>,
}

/// Campaign output directory with resumable cells.
pub struct CampaignStore {
    dir: PathBuf,
    manifest: Manifest,
}

impl CampaignStore {
    /// Open (or create) a campaign directory for the given config. An
    /// existing manifest must carry the same config hash.
    pub fn open(dir: &Path, config: &CampaignConfig) -> Result<Self, StoreError> {
        let hash = config.hash();
        std::fs::create_dir_all(dir.join("cells")).map_err(|e| io_err(dir, e))?;
        let manifest_path = dir.join("manifest.json");
        let manifest = if manifest_path.exists() {
            let text =
                std::fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
            let manifest: Manifest = serde_json::from_str(&text)?;
            if manifest.config_hash != hash {
                return Err(StoreError::ConfigMismatch {
                    expected: hash,
                    found: manifest.config_hash,
                });
            }
            manifest
        } else {
            Manifest { config_hash: hash, completed: BTreeMap::new() }
        };
        let store = Self { dir: dir.to_path_buf(), manifest };
        store.write_json("config.json", config)?;
        store.flush_manifest()?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn is_done(&self, key: &str) -> bool {
        self.manifest.completed.contains_key(key)
    }

    /// Persist the result of one finished cell and mark it complete.
    pub fn finish_cell<T: Serialize>(&mut self, key: &str, value: &T) -> Result<(), StoreError> {
        let rel = format!("cells/{key}.json");
        self.write_json(&rel, value)?;
        self.manifest.completed.insert(key.to_string(), rel);
        self.flush_manifest()
    }

    pub fn load_cell<T: DeserializeOwned>(&self, key: &str) -> Result<T, StoreError> {
        let rel = &self.manifest.completed[key];
        let path = self.dir.join(rel);
        let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Run `compute` unless the cell is already on disk; either way return
    /// its result.
    pub fn cell<T, F, E>(&mut self, key: &str, compute: F) -> Result<T, CellError<E>>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T, E>,
    {
        if self.is_done(key) {
            return self.load_cell(key).map_err(CellError::Store);
        }
        let value = compute().map_err(CellError::Compute)?;
        self.finish_cell(key, &value).map_err(CellError::Store)?;
        Ok(value)
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), StoreError> {
        let path = self.dir.join(rel);
        let text = serde_json::to_string_pretty(value)? + "\n";
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str) -> Result<T, StoreError> {
        let path = self.dir.join(rel);
        let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Write the canonical gap CSV, then read it back and verify header
    /// and row count.
    pub fn write_gap_csv(&self, rel: &str, rows: &[GapRow]) -> Result<(), StoreError> {
        let path = self.dir.join(rel);
        let mut writer = csv::Writer::from_path(&path)?;
        for row in rows {
            writer.serialize(row)?;
        }
        writer.flush().map_err(|e| io_err(&path, e))?;
        drop(writer);
        let back = read_gap_csv(&path)?;
        debug_assert_eq!(back.len(), rows.len());
        Ok(())
    }

    /// Generic CSV with explicit header; validated on write by re-reading
    /// the header line.
    pub fn write_csv_records(
        &self,
        rel: &str,
        header: &[&str],
        records: &[Vec<String>],
    ) -> Result<(), StoreError> {
        let path = self.dir.join(rel);
        let mut writer = csv::Writer::from_path(&path)?;
        writer.write_record(header)?;
        for record in records {
            debug_assert_eq!(record.len(), header.len());
            writer.write_record(record)?;
        }
        writer.flush().map_err(|e| io_err(&path, e))?;
        drop(writer);
        let mut reader = csv::Reader::from_path(&path)?;
        let found: Vec<String> =
            reader.headers()?.iter().map(|s| s.to_string()).collect();
        if found != header {
            return Err(StoreError::SchemaMismatch {
                file: rel.to_string(),
                expected: header.iter().map(|s| s.to_string()).collect(),
                found,
            });
        }
        Ok(())
    }

    fn flush_manifest(&self) -> Result<(), StoreError> {
        self.write_json("manifest.json", &self.manifest)
    }
}

/// Read and schema-validate a gap CSV.
pub fn read_gap_csv(path: &Path) -> Result<Vec<GapRow>, StoreError> {
    let mut reader = csv::Reader::from_path(path)?;
    let found: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    if found != GAP_HEADER {
        return Err(StoreError::SchemaMismatch {
            file: path.display().to_string(),
            expected: GAP_HEADER.iter().map(|s| s.to_string()).collect(),
            found,
        });
    }
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

/// Error from a resumable cell: either the computation itself or the store.
#[derive(Debug, Error)]
pub enum CellError<E> {
    #[error("cell computation failed: {0}")]
    Compute(E),
    #[error(transparent)]
    Store(StoreError),
}
