//! File-backed and oracle mask providers: the stand-ins for per-satellite
//! segmentation networks, reading probability masks or ground truth from
//! MEBF files referenced by the manifest.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use canopy_core::provider::{MaskProvider, ProviderError};
use canopy_core::{ImageMeta, NormalizedImage, ProbMask, SatelliteSource};

use crate::manifest::{EntryKind, Manifest};
use crate::mebf;

/// Exact acquisition identity: source plus bit-exact coordinates and date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct AcqKey {
    source: Option<SatelliteSource>,
    lat_bits: u64,
    lon_bits: u64,
    year: i32,
    month: u8,
}

impl AcqKey {
    fn new(source: Option<SatelliteSource>, lat: f64, lon: f64, year: i32, month: u8) -> Self {
        Self {
            source,
            lat_bits: lat.to_bits(),
            lon_bits: lon.to_bits(),
            year,
            month,
        }
    }

    fn for_meta(meta: &ImageMeta) -> Self {
        Self::new(Some(meta.source), meta.lat, meta.lon, meta.year, meta.month)
    }
}

/// Reads a 1-band probability raster and tags it with the given meta.
pub fn read_prob_mask(path: &Path, meta: ImageMeta) -> Result<ProbMask, ProviderError> {
    let grid = mebf::read_raster(path).map_err(|e| ProviderError::Load(e.to_string()))?;
    if grid.bands != 1 {
        return Err(ProviderError::Load(format!(
            "{}: probability mask must have 1 band, got {}",
            path.display(),
            grid.bands
        )));
    }
    Ok(ProbMask::new(grid.width, grid.height, grid.samples, meta)?)
}

fn missing(meta: &ImageMeta) -> ProviderError {
    ProviderError::MissingMask {
        satellite: meta.source,
        lat: meta.lat,
        lon: meta.lon,
        year: meta.year,
        month: meta.month,
    }
}

fn check_shape(img: &NormalizedImage, mask: &ProbMask) -> Result<(), ProviderError> {
    if mask.width() != img.width() || mask.height() != img.height() {
        return Err(ProviderError::ShapeMismatch {
            expected_w: img.width(),
            expected_h: img.height(),
            actual_w: mask.width(),
            actual_h: mask.height(),
        });
    }
    Ok(())
}

/// Serves masks produced offline. Looks up `prob_mask` manifest entries by
/// the image's acquisition identity; pixel content of the image plays no
/// part. When several masks share one identity (multiple views per month),
/// [`provide`](MaskProvider::provide) returns the first in manifest order;
/// the pipeline pairs views positionally via [`mask_paths`](Self::mask_paths).
#[derive(Debug, Clone, Default)]
pub struct FileBackedProvider {
    index: HashMap<AcqKey, Vec<PathBuf>>,
}

impl FileBackedProvider {
    pub fn from_manifest(manifest: &Manifest) -> Self {
        let mut index: HashMap<AcqKey, Vec<PathBuf>> = HashMap::new();
        for entry in &manifest.entries {
            if entry.kind != EntryKind::ProbMask {
                continue;
            }
            let key = AcqKey::new(
                Some(entry.source),
                entry.lat,
                entry.lon,
                entry.year,
                entry.month,
            );
            index.entry(key).or_default().push(entry.path.clone());
        }
        Self { index }
    }

    /// All mask paths recorded for one acquisition identity, in manifest
    /// order.
    pub fn mask_paths(
        &self,
        source: SatelliteSource,
        lat: f64,
        lon: f64,
        year: i32,
        month: u8,
    ) -> &[PathBuf] {
        self.index
            .get(&AcqKey::new(Some(source), lat, lon, year, month))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

impl MaskProvider for FileBackedProvider {
    fn provide(&self, img: &NormalizedImage) -> Result<ProbMask, ProviderError> {
        let paths = self
            .index
            .get(&AcqKey::for_meta(&img.meta))
            .filter(|v| !v.is_empty())
            .ok_or_else(|| missing(&img.meta))?;
        let mask = read_prob_mask(&paths[0], img.meta.clone())?;
        check_shape(img, &mask)?;
        Ok(mask)
    }
}

/// Serves the ground-truth label for the image's location and month as a
/// hard 0/1 probability mask. Labels are satellite-independent.
#[derive(Debug, Clone, Default)]
pub struct OracleProvider {
    index: HashMap<AcqKey, PathBuf>,
}

impl OracleProvider {
    pub fn from_manifest(manifest: &Manifest) -> Self {
        let mut index = HashMap::new();
        for entry in &manifest.entries {
            if entry.kind != EntryKind::Label {
                continue;
            }
            let key = AcqKey::new(None, entry.lat, entry.lon, entry.year, entry.month);
            index.entry(key).or_insert_with(|| entry.path.clone());
        }
        Self { index }
    }

    pub fn label_path(&self, lat: f64, lon: f64, year: i32, month: u8) -> Option<&Path> {
        self.index
            .get(&AcqKey::new(None, lat, lon, year, month))
            .map(PathBuf::as_path)
    }
}

impl MaskProvider for OracleProvider {
    fn provide(&self, img: &NormalizedImage) -> Result<ProbMask, ProviderError> {
        let key = AcqKey::new(
            None,
            img.meta.lat,
            img.meta.lon,
            img.meta.year,
            img.meta.month,
        );
        let path = self.index.get(&key).ok_or_else(|| missing(&img.meta))?;
        let mask = read_prob_mask(path, img.meta.clone())?;
        check_shape(img, &mask)?;
        Ok(mask)
    }
}
