//! Band selection per satellite and percentile clip-normalization.
//!
//! Optical sources keep their true-color triple (B4, B3, B2 = red, green,
//! blue); Sentinel-1 keeps VV and VH and gains a third, all-zero mock band
//! so every satellite yields a 3-channel image. Each band is then clamped to
//! its own in-image percentile range and rescaled to `[0, 1]`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::raster::{MultiBandImage, NormalizedImage, RasterError, SatelliteSource};

/// Percentile clipping bounds, in percent of samples trimmed per tail.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ClipSpec {
    pub low_pct: f64,
    pub high_pct: f64,
}

impl Default for ClipSpec {
    fn default() -> Self {
        Self {
            low_pct: 2.0,
            high_pct: 2.0,
        }
    }
}

impl ClipSpec {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.low_pct < 0.0 || self.high_pct < 0.0 || self.low_pct + self.high_pct >= 100.0 {
            return Err(PreprocessError::InvalidClipSpec {
                low_pct: self.low_pct,
                high_pct: self.high_pct,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PreprocessError {
    #[error("no band selection rule for {0}")]
    UnsupportedSource(SatelliteSource),
    #[error("required band {0} missing from band names")]
    MissingBand(String),
    #[error("expected a 3-band image, got {0} bands")]
    NotThreeBands(usize),
    #[error("invalid clip spec: low {low_pct}%, high {high_pct}%")]
    InvalidClipSpec { low_pct: f64, high_pct: f64 },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Name of the all-zero band appended to Sentinel-1 imagery.
pub const MOCK_BAND: &str = "MOCK";

fn band_index(img: &MultiBandImage, name: &str) -> Result<usize, PreprocessError> {
    img.meta
        .band_names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| PreprocessError::MissingBand(name.to_string()))
}

/// Projects a full multi-band acquisition down to the three bands the
/// segmentation path consumes.
///
/// Sentinel-2 and Landsat-8 keep B4, B3, B2 in that order (red, green,
/// blue). Sentinel-1 keeps VV and VH and gains a third band of zeros.
/// Landsat-5 has no selection rule and is rejected.
pub fn select_bands(img: &MultiBandImage) -> Result<MultiBandImage, PreprocessError> {
    let names: &[&str] = match img.meta.source {
        SatelliteSource::Sentinel2 | SatelliteSource::Landsat8 => &["B4", "B3", "B2"],
        SatelliteSource::Sentinel1 => &["VV", "VH"],
        SatelliteSource::Landsat5 => {
            return Err(PreprocessError::UnsupportedSource(
                SatelliteSource::Landsat5,
            ))
        }
    };

    let plane = img.width() * img.height();
    let mut samples = Vec::with_capacity(3 * plane);
    let mut out_names = Vec::with_capacity(3);
    for name in names {
        let idx = band_index(img, name)?;
        samples.extend_from_slice(img.band(idx)?);
        out_names.push(name.to_string());
    }
    if img.meta.source.is_sar() {
        samples.extend(core::iter::repeat_n(0.0f32, plane));
        out_names.push(MOCK_BAND.to_string());
    }

    let meta = img.meta.with_band_names(out_names);
    Ok(MultiBandImage::new(
        img.width(),
        img.height(),
        3,
        samples,
        meta,
    )?)
}

/// Nearest-rank percentile cutoffs for one band: `lo` is the value at rank
/// `ceil(low_pct * n / 100)`, `hi` at rank `ceil((100 - high_pct) * n / 100)`
/// (1-based, clamped into range).
fn percentile_bounds(band: &[f32], spec: &ClipSpec) -> (f32, f32) {
    let n = band.len();
    let rank = |pct: f64| -> usize {
        let r = libm::ceil(pct * n as f64 / 100.0) as i64 - 1;
        r.clamp(0, n as i64 - 1) as usize
    };
    let lo_idx = rank(spec.low_pct);
    let hi_idx = rank(100.0 - spec.high_pct);

    let mut buf = band.to_vec();
    let (_, lo, upper) = buf.select_nth_unstable_by(lo_idx, f32::total_cmp);
    let lo = *lo;
    let hi = if hi_idx <= lo_idx {
        lo
    } else {
        let (_, hi, _) = upper.select_nth_unstable_by(hi_idx - lo_idx - 1, f32::total_cmp);
        *hi
    };
    (lo, hi)
}

/// Clamps each band to its own `[low_pct, 100 - high_pct]` percentile range
/// and maps it linearly onto `[0, 1]`.
///
/// Percentiles are nearest-rank, computed per band and per image. A constant
/// band (`hi == lo`) maps to all zeros.
pub fn percentile_clip_normalize(
    img: &MultiBandImage,
    spec: &ClipSpec,
) -> Result<NormalizedImage, PreprocessError> {
    spec.validate()?;
    if img.bands() != 3 {
        return Err(PreprocessError::NotThreeBands(img.bands()));
    }

    let plane = img.width() * img.height();
    let mut out = Vec::with_capacity(3 * plane);
    for b in 0..3 {
        let band = img.band(b)?;
        if band.is_empty() {
            continue;
        }
        let (lo, hi) = percentile_bounds(band, spec);
        if hi <= lo {
            out.extend(core::iter::repeat_n(0.0f32, plane));
        } else {
            let span = hi - lo;
            out.extend(band.iter().map(|&x| (x.clamp(lo, hi) - lo) / span));
        }
    }

    Ok(NormalizedImage::new(
        img.width(),
        img.height(),
        out,
        img.meta.clone(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ImageMeta;

    fn image(
        source: SatelliteSource,
        w: usize,
        h: usize,
        names: &[&str],
        bands: Vec<Vec<f32>>,
    ) -> MultiBandImage {
        let meta = ImageMeta::new(
            source,
            -3.5,
            -54.8,
            2020,
            6,
            names.iter().map(|n| n.to_string()).collect(),
        )
        .unwrap();
        let samples: Vec<f32> = bands.into_iter().flatten().collect();
        MultiBandImage::new(w, h, names.len(), samples, meta).unwrap()
    }

    #[test]
    fn sentinel1_gains_zero_mock_band() {
        let img = image(
            SatelliteSource::Sentinel1,
            2,
            2,
            &["VV", "VH"],
            vec![vec![1.0; 4], vec![2.0; 4]],
        );
        let out = select_bands(&img).unwrap();
        assert_eq!(out.bands(), 3);
        assert_eq!(out.band(0).unwrap(), &[1.0; 4]);
        assert_eq!(out.band(1).unwrap(), &[2.0; 4]);
        assert_eq!(out.band(2).unwrap(), &[0.0; 4]);
        assert_eq!(out.band(2).unwrap().iter().sum::<f32>(), 0.0);
        assert_eq!(out.meta.band_names, vec!["VV", "VH", MOCK_BAND]);
    }

    #[test]
    fn sentinel2_selection_is_projection() {
        // 12-band image; every band is constant at its 1-based index.
        let names: Vec<String> = (1..=12).map(|i| alloc::format!("B{i}")).collect();
        let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let bands: Vec<Vec<f32>> = (1..=12).map(|i| vec![i as f32; 4]).collect();
        let img = image(SatelliteSource::Sentinel2, 2, 2, &name_refs, bands);

        let out = select_bands(&img).unwrap();
        assert_eq!(out.bands(), 3);
        assert_eq!(out.band(0).unwrap(), &[4.0; 4]); // B4
        assert_eq!(out.band(1).unwrap(), &[3.0; 4]); // B3
        assert_eq!(out.band(2).unwrap(), &[2.0; 4]); // B2
        assert_eq!(out.meta.band_names, vec!["B4", "B3", "B2"]);
    }

    #[test]
    fn missing_band_is_rejected() {
        let img = image(
            SatelliteSource::Sentinel2,
            1,
            1,
            &["B1", "B2", "B3"],
            vec![vec![0.0], vec![0.0], vec![0.0]],
        );
        assert_eq!(
            select_bands(&img).unwrap_err(),
            PreprocessError::MissingBand("B4".to_string())
        );
    }

    #[test]
    fn landsat5_is_unsupported() {
        let img = image(SatelliteSource::Landsat5, 1, 1, &["B4"], vec![vec![0.0]]);
        assert_eq!(
            select_bands(&img).unwrap_err(),
            PreprocessError::UnsupportedSource(SatelliteSource::Landsat5)
        );
    }

    #[test]
    fn constant_band_normalizes_to_zeros() {
        let img = image(
            SatelliteSource::Sentinel2,
            2,
            2,
            &["B4", "B3", "B2"],
            vec![vec![100.0; 4], vec![100.0; 4], vec![100.0; 4]],
        );
        let out = percentile_clip_normalize(&img, &ClipSpec::default()).unwrap();
        assert!(out.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn ramp_band_matches_sort_oracle() {
        // 100x100 band holding 0..=9999 (shuffled deterministically); the
        // default 2% clip must reproduce the sorted nearest-rank cutoffs.
        let n = 10_000usize;
        let mut vals: Vec<f32> = (0..n).map(|i| i as f32).collect();
        // Deterministic shuffle so percentile selection cannot rely on order.
        let mut state = 0x9E3779B97F4A7C15u64;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let j = (state >> 33) as usize % (i + 1);
            vals.swap(i, j);
        }
        let img = image(
            SatelliteSource::Sentinel2,
            100,
            100,
            &["B4", "B3", "B2"],
            vec![vals.clone(), vals.clone(), vals.clone()],
        );
        let out = percentile_clip_normalize(&img, &ClipSpec::default()).unwrap();

        // Independent oracle: full sort, nearest-rank pick, clamp, rescale.
        let mut sorted = vals.clone();
        sorted.sort_by(f32::total_cmp);
        let lo_rank = (2.0f64 * n as f64 / 100.0).ceil() as usize - 1;
        let hi_rank = (98.0f64 * n as f64 / 100.0).ceil() as usize - 1;
        let (lo, hi) = (sorted[lo_rank], sorted[hi_rank]);
        assert_eq!((lo, hi), (199.0, 9799.0));

        let band0 = out.channel(0);
        let mut min = f32::INFINITY;
        let mut max = f32::NEG_INFINITY;
        for (i, &x) in vals.iter().enumerate() {
            let expect = (x.clamp(lo, hi) - lo) / (hi - lo);
            assert!((band0[i] - expect).abs() <= 1e-6, "sample {i}");
            min = min.min(band0[i]);
            max = max.max(band0[i]);
            if x < lo {
                assert_eq!(band0[i], 0.0);
            }
        }
        assert_eq!(min, 0.0);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn zero_clip_is_idempotent() {
        let spec = ClipSpec {
            low_pct: 0.0,
            high_pct: 0.0,
        };
        let img = image(
            SatelliteSource::Sentinel2,
            2,
            2,
            &["B4", "B3", "B2"],
            vec![
                vec![5.0, 10.0, 20.0, 40.0],
                vec![0.0, 1.0, 2.0, 3.0],
                vec![-4.0, 0.0, 4.0, 8.0],
            ],
        );
        let once = percentile_clip_normalize(&img, &spec).unwrap();
        let again_input =
            MultiBandImage::new(2, 2, 3, once.samples().to_vec(), once.meta.clone()).unwrap();
        let twice = percentile_clip_normalize(&again_input, &spec).unwrap();
        assert_eq!(once.samples(), twice.samples());
    }

    #[test]
    fn clip_spec_validation() {
        assert!(ClipSpec::default().validate().is_ok());
        assert!(ClipSpec {
            low_pct: -1.0,
            high_pct: 0.0
        }
        .validate()
        .is_err());
        assert!(ClipSpec {
            low_pct: 60.0,
            high_pct: 40.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn non_three_band_input_rejected() {
        let img = image(SatelliteSource::Sentinel1, 1, 1, &["VV"], vec![vec![0.0]]);
        assert_eq!(
            percentile_clip_normalize(&img, &ClipSpec::default()).unwrap_err(),
            PreprocessError::NotThreeBands(1)
        );
    }
}
