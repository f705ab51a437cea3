//! Synthetic multi-sensor scenes with known ground truth.
//!
//! Each region gets a deforestation history that only ever grows, built
//! from rectangles and 3x3 growth stamps. Both shapes are unions of full
//! 3x3 blocks, so the ground truth is invariant under opening with the
//! default structuring element and the pipeline can in principle recover it
//! exactly. Per-view corruption mirrors failure modes seen in practice:
//! all-black masks, cloud-covered optical imagery (paired with a
//! position-scrambled mask whose deforestation ratio still looks normal,
//! the way a cloud-confused segmenter fails), and dropped views.
//!
//! The generator writes ordinary MEBF rasters and a manifest, so pipeline
//! runs on synthetic scenes exercise the same code paths as real data. A
//! sidecar `truth.json` records which imagery was clouded and which masks
//! were blacked out, for verification against run summaries.

use std::fs;
use std::path::{Path, PathBuf};

use canopy_core::{BinaryMask, SatelliteSource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::manifest::{EntryKind, Manifest, ManifestEntry};
use crate::mebf::{self, RawGrid};

/// Satellites that get synthetic views: the three the pipeline supports.
pub const SATELLITES: [SatelliteSource; 3] = [
    SatelliteSource::Sentinel1,
    SatelliteSource::Sentinel2,
    SatelliteSource::Landsat8,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub seed: u64,
    pub regions: usize,
    pub months: usize,
    /// Views per satellite per month, before dropout.
    pub views_per_month: usize,
    /// Side length of every raster, in pixels.
    pub size: usize,
    pub blob_count_min: usize,
    pub blob_count_max: usize,
    /// Standard deviation of the Gaussian noise added to clean masks.
    pub noise_sigma: f64,
    /// Probability that a view's mask is all zeros.
    pub black_failure_rate: f64,
    /// Probability that an optical view's imagery is cloud-covered.
    pub cloud_rate: f64,
    /// Fraction of the frame newly deforested each month.
    pub deforestation_growth: f64,
    /// Probability that a view is missing entirely, modeling sparse
    /// acquisition schedules.
    pub view_dropout_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 0,
            regions: 2,
            months: 6,
            views_per_month: 1,
            size: 64,
            blob_count_min: 1,
            blob_count_max: 3,
            noise_sigma: 0.1,
            black_failure_rate: 0.1,
            cloud_rate: 0.2,
            deforestation_growth: 0.02,
            view_dropout_rate: 0.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Mebf(#[from] mebf::MebfError),
}

impl SynthError {
    /// Process exit code: 2 for parameter problems, 1 for write failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            SynthError::BadParams(_) => 2,
            SynthError::Io { .. } | SynthError::Mebf(_) => 1,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let rates = [
            ("noise_sigma", self.noise_sigma),
            ("black_failure_rate", self.black_failure_rate),
            ("cloud_rate", self.cloud_rate),
            ("deforestation_growth", self.deforestation_growth),
            ("view_dropout_rate", self.view_dropout_rate),
        ];
        for (name, v) in rates {
            if !(0.0..=1.0).contains(&v) {
                return Err(SynthError::BadParams(format!(
                    "{name} = {v} outside [0, 1]"
                )));
            }
        }
        if self.size < 8 {
            return Err(SynthError::BadParams(format!(
                "size {} too small, need at least 8",
                self.size
            )));
        }
        if self.blob_count_min < 1 || self.blob_count_min > self.blob_count_max {
            return Err(SynthError::BadParams(format!(
                "blob count range {}..={} invalid",
                self.blob_count_min, self.blob_count_max
            )));
        }
        if self.views_per_month < 1 {
            return Err(SynthError::BadParams("views_per_month must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which files the generator corrupted, relative to the scene directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub cloudy_imagery: Vec<String>,
    pub black_masks: Vec<String>,
}

impl SceneTruth {
    pub fn load(path: &Path) -> Result<SceneTruth, SynthError> {
        let text = fs::read_to_string(path).map_err(|source| SynthError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| SynthError::BadParams(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSummary {
    pub manifest_path: PathBuf,
    pub truth_path: PathBuf,
    pub imagery_entries: usize,
    pub mask_entries: usize,
    pub label_entries: usize,
    pub cloudy_imagery: usize,
    pub black_masks: usize,
}

fn region_coords(region: usize) -> (f64, f64) {
    // Half-degree steps are exactly representable, keeping query keys
    // byte-stable through JSON and back.
    (-3.0 - region as f64 * 0.5, -54.0 - region as f64 * 0.5)
}

fn stamp_block(bits: &mut [u8], size: usize, row: usize, col: usize) -> usize {
    // 3x3 block centered at (row, col), which must sit at least one pixel
    // from the border.
    let mut added = 0;
    for r in row - 1..=row + 1 {
        for c in col - 1..=col + 1 {
            let i = r * size + c;
            if bits[i] == 0 {
                bits[i] = 1;
                added += 1;
            }
        }
    }
    added
}

fn initial_blobs(rng: &mut ChaCha8Rng, params: &SynthParams) -> Vec<u8> {
    let size = params.size;
    let mut bits = vec![0u8; size * size];
    let count = rng.random_range(params.blob_count_min..=params.blob_count_max);
    let max_side = 7.min(size - 1);
    for _ in 0..count {
        let side_h = rng.random_range(3..=max_side);
        let side_w = rng.random_range(3..=max_side);
        let row0 = rng.random_range(0..=size - side_h);
        let col0 = rng.random_range(0..=size - side_w);
        for r in row0..row0 + side_h {
            for c in col0..col0 + side_w {
                bits[r * size + c] = 1;
            }
        }
    }
    bits
}

fn grow(bits: &mut [u8], size: usize, rng: &mut ChaCha8Rng, growth: f64) {
    let plane = size * size;
    let target = (growth * plane as f64).ceil() as usize;
    if target == 0 {
        return;
    }
    let mut added = 0;
    let mut attempts = 0;
    let max_attempts = 20 * target + 200;
    while added < target && attempts < max_attempts {
        attempts += 1;
        let ones: Vec<usize> = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
            .collect();
        if ones.is_empty() {
            break;
        }
        let seed_px = ones[rng.random_range(0..ones.len())];
        let (row, col) = (seed_px / size, seed_px % size);
        let dr = rng.random_range(-2i64..=2);
        let dc = rng.random_range(-2i64..=2);
        let r = (row as i64 + dr).clamp(1, size as i64 - 2) as usize;
        let c = (col as i64 + dc).clamp(1, size as i64 - 2) as usize;
        added += stamp_block(bits, size, r, c);
    }
}

/// Torus shift by half the frame: same 1-count, different positions. Used
/// for cloud-corrupted views so the bad mask passes ratio-based filtering
/// and only cloud screening can reject it.
fn torus_shift(bits: &[u8], size: usize) -> Vec<u8> {
    let half = size / 2;
    let mut out = vec![0u8; bits.len()];
    for r in 0..size {
        for c in 0..size {
            out[r * size + c] = bits[((r + half) % size) * size + ((c + half) % size)];
        }
    }
    out
}

struct ViewFiles {
    imagery: RawGrid,
    mask: RawGrid,
    cloudy: bool,
    black: bool,
}

fn render_view(
    rng: &mut ChaCha8Rng,
    params: &SynthParams,
    source: SatelliteSource,
    gt: &[u8],
) -> ViewFiles {
    let size = params.size;
    let plane = size * size;
    let cloudy = source.is_optical() && rng.random_bool(params.cloud_rate);
    let black = rng.random_bool(params.black_failure_rate);

    let bands = source.band_count();
    let mut samples = Vec::with_capacity(bands * plane);
    if source.is_sar() {
        // dB-like backscatter: cleared ground reflects differently from
        // canopy; values may be negative.
        for _ in 0..bands {
            for &g in gt {
                let v = -15.0 + 10.0 * g as f64 + rng.random_range(-2.0..2.0);
                samples.push(v as f32);
            }
        }
    } else {
        // Optical counts on an 8-bit-like scale, kept at or below 160 so a
        // clean image can never trip the cloud rule.
        for _ in 0..bands {
            for &g in gt {
                let v = 60.0 + 70.0 * g as f64 + rng.random_range(-15.0..15.0);
                samples.push(v.clamp(0.0, 160.0) as f32);
            }
        }
        if cloudy {
            // Brighten more than half the frame in every band, which
            // guarantees removal under the default rule.
            let frac = rng.random_range(0.55..0.95);
            let covered = ((frac * plane as f64).ceil() as usize).min(plane);
            let mut order: Vec<usize> = (0..plane).collect();
            for i in (1..plane).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            for &px in order.iter().take(covered) {
                let bright = rng.random_range(200.0..255.0) as f32;
                for b in 0..bands {
                    samples[b * plane + px] = bright;
                }
            }
        }
    }
    let imagery = RawGrid {
        width: size,
        height: size,
        bands,
        samples,
    };

    let mask_bits: Vec<u8> = if cloudy {
        torus_shift(gt, size)
    } else {
        gt.to_vec()
    };
    let mask_samples: Vec<f32> = if black {
        vec![0.0; plane]
    } else {
        let noise = Normal::new(0.0, params.noise_sigma).expect("sigma validated");
        mask_bits
            .iter()
            .map(|&g| (g as f64 + noise.sample(rng)).clamp(0.0, 1.0) as f32)
            .collect()
    };
    let mask = RawGrid {
        width: size,
        height: size,
        bands: 1,
        samples: mask_samples,
    };

    ViewFiles {
        imagery,
        mask,
        cloudy,
        black,
    }
}

fn ensure_dir(path: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(path).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Generates a whole scene under `out_dir`: imagery, probability masks,
/// per-month ground truth, `manifest.json`, and `truth.json`. Deterministic
/// for a fixed seed.
pub fn generate_scene(params: &SynthParams, out_dir: &Path) -> Result<SceneSummary, SynthError> {
    params.validate()?;
    ensure_dir(out_dir)?;
    ensure_dir(&out_dir.join("imagery"))?;
    ensure_dir(&out_dir.join("masks"))?;
    ensure_dir(&out_dir.join("gt"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut entries: Vec<ManifestEntry> = Vec::new();
    let mut truth = SceneTruth::default();
    let mut counts = (0usize, 0usize, 0usize); // imagery, masks, labels

    for region in 0..params.regions {
        let (lat, lon) = region_coords(region);
        let mut gt = initial_blobs(&mut rng, params);

        for month_idx in 0..params.months {
            let year = 2020 + (month_idx / 12) as i32;
            let month = (month_idx % 12 + 1) as u8;
            if month_idx > 0 {
                grow(&mut gt, params.size, &mut rng, params.deforestation_growth);
            }

            let gt_rel = format!("gt/gt_r{region}_m{month_idx:02}.mebf");
            let gt_mask =
                BinaryMask::new(params.size, params.size, gt.clone()).expect("grid-sized bits");
            mebf::write_mask(&out_dir.join(&gt_rel), &gt_mask)?;
            entries.push(ManifestEntry {
                path: PathBuf::from(&gt_rel),
                source: SatelliteSource::Sentinel2,
                lat,
                lon,
                year,
                month,
                kind: EntryKind::Label,
            });
            counts.2 += 1;

            for source in SATELLITES {
                for view in 0..params.views_per_month {
                    if params.view_dropout_rate > 0.0 && rng.random_bool(params.view_dropout_rate) {
                        continue;
                    }
                    let files = render_view(&mut rng, params, source, &gt);

                    let img_rel =
                        format!("imagery/img_r{region}_m{month_idx:02}_{source}_v{view}.mebf");
                    let mask_rel =
                        format!("masks/mask_r{region}_m{month_idx:02}_{source}_v{view}.mebf");
                    mebf::write_raster(&out_dir.join(&img_rel), &files.imagery)?;
                    mebf::write_raster(&out_dir.join(&mask_rel), &files.mask)?;

                    entries.push(ManifestEntry {
                        path: PathBuf::from(&img_rel),
                        source,
                        lat,
                        lon,
                        year,
                        month,
                        kind: EntryKind::Imagery,
                    });
                    entries.push(ManifestEntry {
                        path: PathBuf::from(&mask_rel),
                        source,
                        lat,
                        lon,
                        year,
                        month,
                        kind: EntryKind::ProbMask,
                    });
                    counts.0 += 1;
                    counts.1 += 1;
                    if files.cloudy {
                        truth.cloudy_imagery.push(img_rel.clone());
                    }
                    if files.black {
                        truth.black_masks.push(mask_rel.clone());
                    }
                }
            }
        }
    }

    let manifest_path = out_dir.join("manifest.json");
    fs::write(&manifest_path, Manifest::to_json(&entries)).map_err(|source| SynthError::Io {
        path: manifest_path.display().to_string(),
        source,
    })?;

    let truth_path = out_dir.join("truth.json");
    let truth_json = serde_json::to_string_pretty(&truth).expect("truth serializes");
    fs::write(&truth_path, truth_json).map_err(|source| SynthError::Io {
        path: truth_path.display().to_string(),
        source,
    })?;

    Ok(SceneSummary {
        manifest_path,
        truth_path,
        imagery_entries: counts.0,
        mask_entries: counts.1,
        label_entries: counts.2,
        cloudy_imagery: truth.cloudy_imagery.len(),
        black_masks: truth.black_masks.len(),
    })
}
