//! End-to-end batch runs: for every query in a manifest, screen clouds,
//! normalize, obtain probability masks, fuse, denoise, and write the
//! predicted deforestation mask.
//!
//! Imagery and file-served masks at the same acquisition (satellite,
//! location, date) pair positionally by manifest order: the k-th image
//! takes the k-th mask. The binding never depends on screening results, so
//! dropping a cloudy image also drops exactly its mask. Masks beyond the
//! imagery count at an acquisition fuse on their own; they have no imagery
//! to screen against.
//!
//! Every view is read, screened, and served exactly once, no matter how
//! many query windows it falls in; grouping then reuses the prepared
//! masks. Queries are processed in key order, optionally in parallel, and
//! results are written sequentially afterward, so output bytes do not
//! depend on the worker count.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use canopy_core::cloud::{cloud_fraction, CloudError, CloudScale};
use canopy_core::fusion::{fuse_masks, FusionError};
use canopy_core::metrics::MetricsError;
use canopy_core::morph::opening;
use canopy_core::preprocess::{percentile_clip_normalize, select_bands, PreprocessError};
use canopy_core::provider::{heuristic_baseline, MaskProvider, ProviderError, ProviderKind};
use canopy_core::{
    BinaryMask, ImageMeta, MultiBandImage, ProbMask, QueryKey, RasterError, SatelliteSource,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, PipelineConfig};
use crate::manifest::{
    group_by_query, EntryKind, GroupedEntry, Manifest, ManifestEntry, ManifestError,
};
use crate::mebf::{self, MebfError};
use crate::provider::{read_prob_mask, FileBackedProvider, OracleProvider};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mebf(#[from] MebfError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: expected {expected} bands for {satellite}, found {actual}")]
    BandCount {
        path: PathBuf,
        satellite: SatelliteSource,
        expected: usize,
        actual: usize,
    },
    #[error("manifest has no entries")]
    EmptyManifest,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 2 for anything wrong with the inputs, 1 for
    /// failures on our side of the fence (output IO).
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Io { .. } => 1,
            _ => 2,
        }
    }
}

/// Counters for one finished run, written as `run_summary.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub queries: usize,
    pub predictions_written: usize,
    pub no_data_queries: usize,
    /// Imagery views in the manifest, each counted once.
    pub images_in: usize,
    pub cloud_removed_images: usize,
    /// Imagery skipped because its satellite is not configured or not
    /// supported by band selection.
    pub unsupported_images: usize,
    /// Masks that entered the ratio filter, summed over queries; a view
    /// inside several query windows counts once per query.
    pub masks_input: usize,
    pub stage1_removed_masks: usize,
    pub stage2_removed_masks: usize,
    /// Masks actually averaged after filtering, summed over queries.
    pub masks_fused: usize,
    /// Queries whose mask group was too small to filter.
    pub population_guarded_queries: usize,
    /// Query stems that produced no prediction, in key order.
    pub no_data: Vec<String>,
}

/// `<lat>_<lon>_<year>_<month>` with plain `Display` formatting; prediction
/// files are named `pred_<stem>.mebf`.
pub fn query_stem(key: &QueryKey) -> String {
    format!("{}_{}_{}_{}", key.lat, key.lon, key.year, key.month)
}

pub fn pred_filename(key: &QueryKey) -> String {
    format!("pred_{}.mebf", query_stem(key))
}

type AcqId = (SatelliteSource, u64, u64, i32, u8);

fn acq_id(e: &ManifestEntry) -> AcqId {
    (e.source, e.lat.to_bits(), e.lon.to_bits(), e.year, e.month)
}

enum ViewResult {
    Unsupported,
    Screened,
    Mask(ProbMask),
}

/// Per-view work product of the preparation pass, keyed by acquisition and
/// slot (occurrence index within the acquisition, in manifest order).
struct PreparedViews {
    imagery: HashMap<(AcqId, usize), ViewResult>,
    orphan_masks: HashMap<(AcqId, usize), ProbMask>,
    images_in: usize,
    cloud_removed: usize,
    unsupported: usize,
}

fn load_imagery(entry: &ManifestEntry) -> Result<MultiBandImage, PipelineError> {
    let grid = mebf::read_raster(&entry.path)?;
    let expected = entry.source.band_count();
    if grid.bands != expected {
        return Err(PipelineError::BandCount {
            path: entry.path.clone(),
            satellite: entry.source,
            expected,
            actual: grid.bands,
        });
    }
    let meta = ImageMeta::new(
        entry.source,
        entry.lat,
        entry.lon,
        entry.year,
        entry.month,
        entry.source.default_band_names(),
    )?;
    Ok(MultiBandImage::new(
        grid.width,
        grid.height,
        grid.bands,
        grid.samples,
        meta,
    )?)
}

fn mask_meta(entry: &ManifestEntry) -> Result<ImageMeta, PipelineError> {
    Ok(ImageMeta::new(
        entry.source,
        entry.lat,
        entry.lon,
        entry.year,
        entry.month,
        vec!["P".to_string()],
    )?)
}

fn process_view(
    entry: &ManifestEntry,
    slot: usize,
    config: &PipelineConfig,
    files: &FileBackedProvider,
    oracle: &OracleProvider,
) -> Result<ViewResult, PipelineError> {
    let Some(kind) = config.providers.get(&entry.source).copied() else {
        return Ok(ViewResult::Unsupported);
    };
    let img = load_imagery(entry)?;
    let rgb = match select_bands(&img) {
        Ok(rgb) => rgb,
        Err(PreprocessError::UnsupportedSource(_)) => return Ok(ViewResult::Unsupported),
        Err(e) => return Err(e.into()),
    };

    if config.cloud.scale == CloudScale::Raw8Bit
        && entry.source.is_optical()
        && cloud_fraction(&rgb, &config.cloud)? > config.cloud.fraction_threshold
    {
        return Ok(ViewResult::Screened);
    }
    let norm = percentile_clip_normalize(&rgb, &config.clip)?;
    if config.cloud.scale == CloudScale::Normalized
        && entry.source.is_optical()
        && cloud_fraction(&norm, &config.cloud)? > config.cloud.fraction_threshold
    {
        return Ok(ViewResult::Screened);
    }

    let mask = match kind {
        ProviderKind::File => {
            let paths =
                files.mask_paths(entry.source, entry.lat, entry.lon, entry.year, entry.month);
            let Some(path) = paths.get(slot) else {
                return Err(ProviderError::MissingMask {
                    satellite: entry.source,
                    lat: entry.lat,
                    lon: entry.lon,
                    year: entry.year,
                    month: entry.month,
                }
                .into());
            };
            let mask = read_prob_mask(path, norm.meta.clone())?;
            if mask.width() != norm.width() || mask.height() != norm.height() {
                return Err(ProviderError::ShapeMismatch {
                    expected_w: norm.width(),
                    expected_h: norm.height(),
                    actual_w: mask.width(),
                    actual_h: mask.height(),
                }
                .into());
            }
            mask
        }
        ProviderKind::Heuristic => heuristic_baseline(&norm),
        ProviderKind::Oracle => oracle.provide(&norm)?,
    };
    Ok(ViewResult::Mask(mask))
}

fn prepare_views(
    manifest: &Manifest,
    config: &PipelineConfig,
    files: &FileBackedProvider,
    oracle: &OracleProvider,
) -> Result<PreparedViews, PipelineError> {
    let mut imagery_total: HashMap<AcqId, usize> = HashMap::new();
    let mut imagery_jobs: Vec<(&ManifestEntry, usize)> = Vec::new();
    for entry in &manifest.entries {
        if entry.kind != EntryKind::Imagery {
            continue;
        }
        let counter = imagery_total.entry(acq_id(entry)).or_insert(0);
        imagery_jobs.push((entry, *counter));
        *counter += 1;
    }

    let mut mask_seen: HashMap<AcqId, usize> = HashMap::new();
    let mut orphan_jobs: Vec<(&ManifestEntry, usize)> = Vec::new();
    for entry in &manifest.entries {
        if entry.kind != EntryKind::ProbMask {
            continue;
        }
        let acq = acq_id(entry);
        let counter = mask_seen.entry(acq).or_insert(0);
        let slot = *counter;
        *counter += 1;
        if config.providers.get(&entry.source) != Some(&ProviderKind::File) {
            continue;
        }
        if slot >= imagery_total.get(&acq).copied().unwrap_or(0) {
            orphan_jobs.push((entry, slot));
        }
    }

    let imagery_results: Vec<((AcqId, usize), ViewResult)> = imagery_jobs
        .par_iter()
        .map(|&(entry, slot)| {
            let result = process_view(entry, slot, config, files, oracle)?;
            Ok(((acq_id(entry), slot), result))
        })
        .collect::<Result<_, PipelineError>>()?;
    let orphan_results: Vec<((AcqId, usize), ProbMask)> = orphan_jobs
        .par_iter()
        .map(|&(entry, slot)| {
            let mask = read_prob_mask(&entry.path, mask_meta(entry)?)?;
            Ok(((acq_id(entry), slot), mask))
        })
        .collect::<Result<_, PipelineError>>()?;

    let mut prepared = PreparedViews {
        imagery: HashMap::with_capacity(imagery_results.len()),
        orphan_masks: HashMap::with_capacity(orphan_results.len()),
        images_in: imagery_results.len(),
        cloud_removed: 0,
        unsupported: 0,
    };
    for (key, result) in imagery_results {
        match result {
            ViewResult::Screened => prepared.cloud_removed += 1,
            ViewResult::Unsupported => prepared.unsupported += 1,
            ViewResult::Mask(_) => {}
        }
        prepared.imagery.insert(key, result);
    }
    for (key, mask) in orphan_results {
        prepared.orphan_masks.insert(key, mask);
    }
    Ok(prepared)
}

struct QueryOutcome {
    key: QueryKey,
    mask: Option<BinaryMask>,
    masks_input: usize,
    stage1_removed: usize,
    stage2_removed: usize,
    masks_fused: usize,
    population_guarded: bool,
}

fn process_query(
    key: &QueryKey,
    members: &[GroupedEntry],
    config: &PipelineConfig,
    prepared: &PreparedViews,
) -> Result<QueryOutcome, PipelineError> {
    let mut outcome = QueryOutcome {
        key: *key,
        mask: None,
        masks_input: 0,
        stage1_removed: 0,
        stage2_removed: 0,
        masks_fused: 0,
        population_guarded: false,
    };

    // Per-group occurrence counters reproduce the preparation pass's slot
    // numbering: an acquisition's members appear in manifest order in every
    // group that contains its month.
    let mut imagery_seen: HashMap<AcqId, usize> = HashMap::new();
    let mut masks_seen: HashMap<AcqId, usize> = HashMap::new();
    let mut group: Vec<(ProbMask, i32)> = Vec::new();

    for m in members {
        let entry = &m.entry;
        let acq = acq_id(entry);
        match entry.kind {
            EntryKind::Imagery => {
                let counter = imagery_seen.entry(acq).or_insert(0);
                let slot = *counter;
                *counter += 1;
                match prepared
                    .imagery
                    .get(&(acq, slot))
                    .expect("imagery view prepared")
                {
                    ViewResult::Mask(mask) => group.push((mask.clone(), m.month_offset)),
                    ViewResult::Screened | ViewResult::Unsupported => {}
                }
            }
            EntryKind::ProbMask => {
                let counter = masks_seen.entry(acq).or_insert(0);
                let slot = *counter;
                *counter += 1;
                if let Some(mask) = prepared.orphan_masks.get(&(acq, slot)) {
                    group.push((mask.clone(), m.month_offset));
                }
            }
            EntryKind::Label => {}
        }
    }

    if group.is_empty() {
        return Ok(outcome);
    }
    outcome.masks_input = group.len();
    let fused = fuse_masks(group, &config.fusion)?;
    outcome.stage1_removed = fused.filter.stage1_removed;
    outcome.stage2_removed = fused.filter.stage2_removed;
    outcome.masks_fused = fused.masks_used;
    outcome.population_guarded = fused.filter.population_guarded;
    outcome.mask = Some(opening(&fused.mask, &config.se));
    Ok(outcome)
}

/// Runs the full pipeline with an already-loaded config. Returns the
/// summary that was also written to `out_dir/run_summary.json`.
pub fn run_with_config(
    manifest_path: &Path,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let manifest = Manifest::load(manifest_path)?;
    if manifest.entries.is_empty() {
        return Err(PipelineError::EmptyManifest);
    }

    let groups = group_by_query(&manifest, config.fusion.window_months);
    let files = FileBackedProvider::from_manifest(&manifest);
    let oracle = OracleProvider::from_manifest(&manifest);

    fs::create_dir_all(out_dir).map_err(|source| PipelineError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .expect("thread pool");
    let (prepared, outcomes) = pool.install(|| -> Result<_, PipelineError> {
        let prepared = prepare_views(&manifest, config, &files, &oracle)?;
        let work: Vec<(&QueryKey, &Vec<GroupedEntry>)> = groups.iter().collect();
        let outcomes: Vec<QueryOutcome> = work
            .par_iter()
            .map(|(key, members)| process_query(key, members, config, &prepared))
            .collect::<Result<_, _>>()?;
        Ok((prepared, outcomes))
    })?;

    let mut summary = RunSummary {
        queries: outcomes.len(),
        images_in: prepared.images_in,
        cloud_removed_images: prepared.cloud_removed,
        unsupported_images: prepared.unsupported,
        ..RunSummary::default()
    };
    for o in &outcomes {
        summary.masks_input += o.masks_input;
        summary.stage1_removed_masks += o.stage1_removed;
        summary.stage2_removed_masks += o.stage2_removed;
        summary.masks_fused += o.masks_fused;
        summary.population_guarded_queries += usize::from(o.population_guarded);
        match &o.mask {
            Some(mask) => {
                mebf::write_mask(&out_dir.join(pred_filename(&o.key)), mask)?;
                summary.predictions_written += 1;
            }
            None => {
                summary.no_data_queries += 1;
                summary.no_data.push(query_stem(&o.key));
            }
        }
    }

    let summary_path = out_dir.join("run_summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&summary_path, json + "\n").map_err(|source| PipelineError::Io {
        path: summary_path,
        source,
    })?;
    Ok(summary)
}

/// CLI entry: loads the config, applies the worker override, and runs.
pub fn run(
    manifest_path: &Path,
    config_path: &Path,
    out_dir: &Path,
    workers_override: Option<usize>,
) -> Result<RunSummary, PipelineError> {
    let mut config = PipelineConfig::load(config_path)?;
    if let Some(w) = workers_override {
        config.workers = w;
    }
    run_with_config(manifest_path, &config, out_dir)
}
