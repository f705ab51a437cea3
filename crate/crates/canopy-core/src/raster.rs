//! Core grid types and satellite metadata shared by every pipeline stage.
//!
//! Sample layout is band-major, row-major within a band: the sample for
//! `(band, row, col)` lives at `band * width * height + row * width + col`.
//! The on-disk raster format in the companion crate uses the same layout, so
//! buffers round-trip without shuffling. Samples are `f32` regardless of the
//! source dtype; ingestion widens so SAR (signed, dB-like) and optical
//! (unsigned counts) share one arithmetic path.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Errors raised by grid construction and pixel access.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RasterError {
    #[error("sample buffer has {actual} samples, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("index out of bounds: band {band}, row {row}, col {col}")]
    OutOfBounds { band: usize, row: usize, col: usize },
    #[error("month {0} outside 1..=12")]
    BadMonth(u8),
    #[error("{names} band names for {bands} bands")]
    BandNameCount { names: usize, bands: usize },
    #[error("image must have at least one band")]
    NoBands,
    #[error("zero-size mask")]
    EmptyMask,
    #[error("sample {value} at index {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f32 },
    #[error("sample at index {index} is neither 0 nor 1")]
    NotBinary { index: usize },
}

/// The four satellite data sources, with their static specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SatelliteSource {
    Landsat5,
    Landsat8,
    Sentinel1,
    Sentinel2,
}

impl SatelliteSource {
    pub const ALL: [SatelliteSource; 4] = [
        SatelliteSource::Landsat5,
        SatelliteSource::Landsat8,
        SatelliteSource::Sentinel1,
        SatelliteSource::Sentinel2,
    ];

    /// Number of bands delivered by this source.
    pub fn band_count(self) -> usize {
        match self {
            SatelliteSource::Landsat5 => 8,
            SatelliteSource::Landsat8 => 9,
            SatelliteSource::Sentinel1 => 2,
            SatelliteSource::Sentinel2 => 12,
        }
    }

    /// Native ground resolution in meters.
    pub fn resolution_m(self) -> u32 {
        match self {
            SatelliteSource::Landsat5 | SatelliteSource::Landsat8 => 30,
            SatelliteSource::Sentinel1 | SatelliteSource::Sentinel2 => 10,
        }
    }

    /// Years over which this source contributes imagery.
    pub fn time_range(self) -> (u16, u16) {
        match self {
            SatelliteSource::Landsat5 => (1984, 2012),
            SatelliteSource::Landsat8 => (2013, 2021),
            SatelliteSource::Sentinel1 => (2014, 2021),
            SatelliteSource::Sentinel2 => (2018, 2021),
        }
    }

    /// Sentinel-1 is a synthetic aperture radar; clouds do not occlude it.
    pub fn is_sar(self) -> bool {
        matches!(self, SatelliteSource::Sentinel1)
    }

    /// Passive optical sensing, subject to cloud cover.
    pub fn is_optical(self) -> bool {
        !self.is_sar()
    }

    pub fn name(self) -> &'static str {
        match self {
            SatelliteSource::Landsat5 => "Landsat5",
            SatelliteSource::Landsat8 => "Landsat8",
            SatelliteSource::Sentinel1 => "Sentinel1",
            SatelliteSource::Sentinel2 => "Sentinel2",
        }
    }

    /// Band naming convention assumed when a raster carries no names of its
    /// own: polarizations for Sentinel-1, `B1..Bn` for the optical sources.
    pub fn default_band_names(self) -> Vec<String> {
        match self {
            SatelliteSource::Sentinel1 => vec![String::from("VV"), String::from("VH")],
            _ => (1..=self.band_count())
                .map(|i| alloc::format!("B{i}"))
                .collect(),
        }
    }
}

impl core::fmt::Display for SatelliteSource {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Acquisition metadata attached to every image and probability mask.
///
/// Latitude/longitude are opaque grouping keys; no projection math is done
/// on them anywhere in the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMeta {
    pub source: SatelliteSource,
    pub lat: f64,
    pub lon: f64,
    pub year: i32,
    /// Calendar month, 1..=12.
    pub month: u8,
    /// One name per band, e.g. "VV", "VH", "B4".
    pub band_names: Vec<String>,
}

impl ImageMeta {
    pub fn new(
        source: SatelliteSource,
        lat: f64,
        lon: f64,
        year: i32,
        month: u8,
        band_names: Vec<String>,
    ) -> Result<Self, RasterError> {
        if !(1..=12).contains(&month) {
            return Err(RasterError::BadMonth(month));
        }
        Ok(Self {
            source,
            lat,
            lon,
            year,
            month,
            band_names,
        })
    }

    /// Same acquisition, different band list (used after band selection).
    pub fn with_band_names(&self, band_names: Vec<String>) -> Self {
        Self {
            band_names,
            ..self.clone()
        }
    }
}

fn check_finite(samples: &[f32]) -> Result<(), RasterError> {
    match samples.iter().position(|s| !s.is_finite()) {
        Some(index) => Err(RasterError::NonFinite { index }),
        None => Ok(()),
    }
}

/// A width x height x bands grid of `f32` samples plus acquisition metadata;
/// the unit of ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiBandImage {
    width: usize,
    height: usize,
    bands: usize,
    samples: Vec<f32>,
    pub meta: ImageMeta,
}

impl MultiBandImage {
    /// Builds an image, checking every invariant: at least one band, buffer
    /// length `width * height * bands`, all samples finite, and one band
    /// name per band.
    pub fn new(
        width: usize,
        height: usize,
        bands: usize,
        samples: Vec<f32>,
        meta: ImageMeta,
    ) -> Result<Self, RasterError> {
        if bands == 0 {
            return Err(RasterError::NoBands);
        }
        let expected = width * height * bands;
        if samples.len() != expected {
            return Err(RasterError::BufferLength {
                expected,
                actual: samples.len(),
            });
        }
        check_finite(&samples)?;
        if meta.band_names.len() != bands {
            return Err(RasterError::BandNameCount {
                names: meta.band_names.len(),
                bands,
            });
        }
        Ok(Self {
            width,
            height,
            bands,
            samples,
            meta,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    /// All samples of one band, row-major.
    pub fn band(&self, band: usize) -> Result<&[f32], RasterError> {
        if band >= self.bands {
            return Err(RasterError::OutOfBounds {
                band,
                row: 0,
                col: 0,
            });
        }
        let plane = self.width * self.height;
        Ok(&self.samples[band * plane..(band + 1) * plane])
    }

    fn offset(&self, band: usize, row: usize, col: usize) -> Result<usize, RasterError> {
        if band >= self.bands || row >= self.height || col >= self.width {
            return Err(RasterError::OutOfBounds { band, row, col });
        }
        Ok(band * self.width * self.height + row * self.width + col)
    }

    /// Sample at `(band, row, col)` in band-major, row-major order.
    pub fn pixel_at(&self, band: usize, row: usize, col: usize) -> Result<f32, RasterError> {
        Ok(self.samples[self.offset(band, row, col)?])
    }

    /// In-place counterpart to [`pixel_at`](Self::pixel_at). Requires
    /// exclusive access; shared images stay immutable.
    pub fn set_pixel(
        &mut self,
        band: usize,
        row: usize,
        col: usize,
        value: f32,
    ) -> Result<(), RasterError> {
        if !value.is_finite() {
            return Err(RasterError::NonFinite { index: 0 });
        }
        let off = self.offset(band, row, col)?;
        self.samples[off] = value;
        Ok(())
    }
}

/// Exactly three channels of samples in `[0, 1]`; the output of
/// preprocessing and the input to mask providers.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    width: usize,
    height: usize,
    samples: Vec<f32>,
    pub meta: ImageMeta,
}

impl NormalizedImage {
    pub const CHANNELS: usize = 3;

    pub fn new(
        width: usize,
        height: usize,
        samples: Vec<f32>,
        meta: ImageMeta,
    ) -> Result<Self, RasterError> {
        let expected = width * height * Self::CHANNELS;
        if samples.len() != expected {
            return Err(RasterError::BufferLength {
                expected,
                actual: samples.len(),
            });
        }
        if let Some(index) = samples.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(RasterError::OutOfRange {
                index,
                value: samples[index],
            });
        }
        if meta.band_names.len() != Self::CHANNELS {
            return Err(RasterError::BandNameCount {
                names: meta.band_names.len(),
                bands: Self::CHANNELS,
            });
        }
        Ok(Self {
            width,
            height,
            samples,
            meta,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    /// All samples of one channel, row-major.
    pub fn channel(&self, channel: usize) -> &[f32] {
        let plane = self.width * self.height;
        &self.samples[channel * plane..(channel + 1) * plane]
    }
}

/// Per-pixel deforestation probability in `[0, 1]` for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMask {
    width: usize,
    height: usize,
    probs: Vec<f32>,
    pub meta: ImageMeta,
}

impl ProbMask {
    pub fn new(
        width: usize,
        height: usize,
        probs: Vec<f32>,
        meta: ImageMeta,
    ) -> Result<Self, RasterError> {
        let expected = width * height;
        if probs.len() != expected {
            return Err(RasterError::BufferLength {
                expected,
                actual: probs.len(),
            });
        }
        if let Some(index) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(RasterError::OutOfRange {
                index,
                value: probs[index],
            });
        }
        Ok(Self {
            width,
            height,
            probs,
            meta,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn probs(&self) -> &[f32] {
        &self.probs
    }
}

/// Per-pixel {0, 1} deforestation decision; 1 = deforested, 0 = forest or
/// background. Pipeline output and ground-truth label format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self, RasterError> {
        let expected = width * height;
        if bits.len() != expected {
            return Err(RasterError::BufferLength {
                expected,
                actual: bits.len(),
            });
        }
        if let Some(index) = bits.iter().position(|&b| b > 1) {
            return Err(RasterError::NotBinary { index });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.width + col]
    }

    /// Number of 1-pixels.
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// Fraction of 1-pixels over the whole grid, in `[0, 1]`.
    pub fn mask_ratio(&self) -> Result<f64, RasterError> {
        if self.bits.is_empty() {
            return Err(RasterError::EmptyMask);
        }
        Ok(self.ones() as f64 / self.bits.len() as f64)
    }

    /// Mask with every pixel flipped.
    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| 1 - b).collect(),
        }
    }

    /// Pixelwise `self <= other` (every 1 of `self` is a 1 of `other`).
    pub fn subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| a <= b)
    }
}

/// Fraction of 1-pixels in a mask. See [`BinaryMask::mask_ratio`].
pub fn mask_ratio(mask: &BinaryMask) -> Result<f64, RasterError> {
    mask.mask_ratio()
}
