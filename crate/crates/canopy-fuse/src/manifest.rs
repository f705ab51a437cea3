//! Dataset manifest: a JSON index of raster files with their acquisition
//! coordinates, plus query grouping over it.
//!
//! Entry paths are stored relative to the manifest file (absolute paths
//! pass through) and resolved at load; every referenced file must exist.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use canopy_core::{month_index, QueryKey, SatelliteSource};
use serde::{Deserialize, Serialize};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("reading {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: unsupported manifest version {version}")]
    BadVersion { path: String, version: u32 },
    #[error("{path}: entry {index}: {source}")]
    Entry {
        path: String,
        index: usize,
        source: serde_json::Error,
    },
    #[error("{path}: entry {index}: month {month} outside 1..=12")]
    BadMonth {
        path: String,
        index: usize,
        month: u8,
    },
    #[error("{path}: entry {index}: file {file} does not exist")]
    MissingFile {
        path: String,
        index: usize,
        file: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Imagery,
    ProbMask,
    Label,
}

/// One raster file with its acquisition coordinates. For `kind = label`
/// the source field is carried but ignored (ground truth is not
/// satellite-specific).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub source: SatelliteSource,
    pub lat: f64,
    pub lon: f64,
    pub year: i32,
    pub month: u8,
    pub kind: EntryKind,
}

impl ManifestEntry {
    pub fn query_key(&self) -> QueryKey {
        QueryKey::new(self.lat, self.lon, self.year, self.month).expect("month validated at load")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    version: u32,
    entries: Vec<serde_json::Value>,
}

/// A loaded manifest: validated entries in file order, with paths resolved
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, ManifestError> {
        let p = || path.display().to_string();
        let text =
            fs::read_to_string(path).map_err(|source| ManifestError::Read { path: p(), source })?;
        let file: ManifestFile = serde_json::from_str(&text)
            .map_err(|source| ManifestError::Parse { path: p(), source })?;
        if file.version != MANIFEST_VERSION {
            return Err(ManifestError::BadVersion {
                path: p(),
                version: file.version,
            });
        }

        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut entries = Vec::with_capacity(file.entries.len());
        for (index, value) in file.entries.into_iter().enumerate() {
            let mut entry: ManifestEntry =
                serde_json::from_value(value).map_err(|source| ManifestError::Entry {
                    path: p(),
                    index,
                    source,
                })?;
            if !(1..=12).contains(&entry.month) {
                return Err(ManifestError::BadMonth {
                    path: p(),
                    index,
                    month: entry.month,
                });
            }
            if entry.path.is_relative() {
                entry.path = base.join(&entry.path);
            }
            if !entry.path.is_file() {
                return Err(ManifestError::MissingFile {
                    path: p(),
                    index,
                    file: entry.path.display().to_string(),
                });
            }
            entries.push(entry);
        }
        Ok(Manifest { entries })
    }

    /// Serializes entries (with the paths given) to manifest JSON.
    pub fn to_json(entries: &[ManifestEntry]) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            version: u32,
            entries: &'a [ManifestEntry],
        }
        serde_json::to_string_pretty(&Out {
            version: MANIFEST_VERSION,
            entries,
        })
        .expect("manifest entries always serialize")
    }

    pub fn labels(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.kind == EntryKind::Label)
    }
}

/// A group member: the entry plus its signed month distance from the query
/// (negative = earlier month).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedEntry {
    pub entry: ManifestEntry,
    pub month_offset: i32,
}

/// Collects, for every distinct query key appearing in the manifest, the
/// imagery and probability-mask entries at the same exact (lat, lon) within
/// `window_months` calendar months. Label entries mint query keys but are
/// not group members.
pub fn group_by_query(
    manifest: &Manifest,
    window_months: u32,
) -> BTreeMap<QueryKey, Vec<GroupedEntry>> {
    let mut groups: BTreeMap<QueryKey, Vec<GroupedEntry>> = manifest
        .entries
        .iter()
        .map(|e| (e.query_key(), Vec::new()))
        .collect();

    for (key, members) in groups.iter_mut() {
        let key_mi = month_index(key.year, key.month);
        for entry in &manifest.entries {
            if entry.kind == EntryKind::Label {
                continue;
            }
            if entry.lat != key.lat || entry.lon != key.lon {
                continue;
            }
            let delta = month_index(entry.year, entry.month) - key_mi;
            if delta.unsigned_abs() <= window_months as u64 {
                members.push(GroupedEntry {
                    entry: entry.clone(),
                    month_offset: delta as i32,
                });
            }
        }
    }
    groups
}
