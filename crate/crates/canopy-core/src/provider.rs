//! Probability-mask providers.
//!
//! A provider turns a normalized image into a per-pixel deforestation
//! probability mask. The trained segmentation networks are out of scope;
//! in their place sit a file-backed provider (implemented by the IO crate),
//! a deterministic brightness heuristic, and the synthetic oracle.

use crate::raster::{NormalizedImage, ProbMask, RasterError, SatelliteSource};

/// Which provider backs a satellite source in a pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ProviderKind {
    /// Load masks produced offline, referenced by the manifest.
    #[default]
    File,
    /// Brightness mean over the three channels. Not a model; exists so the
    /// pipeline runs end-to-end on imagery alone.
    Heuristic,
    /// Ground-truth lookup from a synthetic scene.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("no probability mask for {satellite} at ({lat}, {lon}, {year}-{month:02})")]
    MissingMask {
        satellite: SatelliteSource,
        lat: f64,
        lon: f64,
        year: i32,
        month: u8,
    },
    #[error("mask is {actual_w}x{actual_h}, image is {expected_w}x{expected_h}")]
    ShapeMismatch {
        expected_w: usize,
        expected_h: usize,
        actual_w: usize,
        actual_h: usize,
    },
    #[error("loading mask: {0}")]
    Load(alloc::string::String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Produces one probability mask per image. Implementations must be
/// deterministic and must copy the image's meta onto the output.
pub trait MaskProvider {
    fn provide(&self, img: &NormalizedImage) -> Result<ProbMask, ProviderError>;
}

/// Per-pixel mean of the three channels, read as a probability. Cleared
/// ground tends brighter than closed canopy in true color, which makes the
/// mean a workable stand-in when no masks are available.
pub fn heuristic_baseline(img: &NormalizedImage) -> ProbMask {
    let (r, g, b) = (img.channel(0), img.channel(1), img.channel(2));
    let probs = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| (r + g + b) / 3.0)
        .collect();
    ProbMask::new(img.width(), img.height(), probs, img.meta.clone())
        .expect("channel means stay in [0, 1]")
}

/// [`MaskProvider`] wrapper around [`heuristic_baseline`].
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicBaseline;

impl MaskProvider for HeuristicBaseline {
    fn provide(&self, img: &NormalizedImage) -> Result<ProbMask, ProviderError> {
        Ok(heuristic_baseline(img))
    }
}
