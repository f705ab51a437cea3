//! Rule-based cloud screening for optical imagery.
//!
//! A pixel counts as cloud when all three channels exceed a brightness
//! threshold; an image is dropped when the cloud fraction exceeds a
//! coverage threshold. SAR imagery (Sentinel-1) sees through clouds and is
//! never dropped.

use alloc::vec::Vec;

use crate::raster::{MultiBandImage, NormalizedImage, SatelliteSource};

/// Which value range the screened image is in. `Raw8Bit` thresholds apply
/// to source units (0..255); `Normalized` expects the threshold already
/// divided by 255.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CloudScale {
    #[default]
    Raw8Bit,
    Normalized,
}

/// Brightness rule: a pixel is cloud if every channel is strictly above
/// `value_threshold`; an image is cloudy if the cloud fraction is strictly
/// above `fraction_threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CloudRule {
    pub value_threshold: f32,
    pub fraction_threshold: f64,
    pub scale: CloudScale,
}

impl Default for CloudRule {
    fn default() -> Self {
        Self {
            value_threshold: 160.0,
            fraction_threshold: 0.5,
            scale: CloudScale::Raw8Bit,
        }
    }
}

impl CloudRule {
    pub fn validate(&self) -> Result<(), CloudError> {
        if !(self.fraction_threshold > 0.0 && self.fraction_threshold <= 1.0) {
            return Err(CloudError::InvalidFractionThreshold(
                self.fraction_threshold,
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CloudError {
    #[error("cloud test needs a 3-band image, got {0} bands")]
    NotThreeBands(usize),
    #[error("fraction threshold must be in (0, 1], got {0}")]
    InvalidFractionThreshold(f64),
}

/// An image the cloud rule can be evaluated on. Implemented for raw
/// 3-band imagery and for normalized imagery, matching the two
/// [`CloudScale`] modes.
pub trait CloudInput {
    fn source(&self) -> SatelliteSource;
    fn try_channels(&self) -> Result<[&[f32]; 3], CloudError>;
}

impl CloudInput for MultiBandImage {
    fn source(&self) -> SatelliteSource {
        self.meta.source
    }

    fn try_channels(&self) -> Result<[&[f32]; 3], CloudError> {
        if self.bands() != 3 {
            return Err(CloudError::NotThreeBands(self.bands()));
        }
        Ok([
            self.band(0).expect("band 0 in range"),
            self.band(1).expect("band 1 in range"),
            self.band(2).expect("band 2 in range"),
        ])
    }
}

impl CloudInput for NormalizedImage {
    fn source(&self) -> SatelliteSource {
        self.meta.source
    }

    fn try_channels(&self) -> Result<[&[f32]; 3], CloudError> {
        Ok([self.channel(0), self.channel(1), self.channel(2)])
    }
}

impl<T: CloudInput> CloudInput for &T {
    fn source(&self) -> SatelliteSource {
        (*self).source()
    }

    fn try_channels(&self) -> Result<[&[f32]; 3], CloudError> {
        (*self).try_channels()
    }
}

/// Fraction of pixels whose three channels are all strictly above the
/// rule's value threshold. An empty image has fraction 0.
pub fn cloud_fraction<I: CloudInput>(img: &I, rule: &CloudRule) -> Result<f64, CloudError> {
    rule.validate()?;
    let [c0, c1, c2] = img.try_channels()?;
    if c0.is_empty() {
        return Ok(0.0);
    }
    let t = rule.value_threshold;
    let cloudy = c0
        .iter()
        .zip(c1)
        .zip(c2)
        .filter(|&((&a, &b), &c)| a > t && b > t && c > t)
        .count();
    Ok(cloudy as f64 / c0.len() as f64)
}

/// Drops pairs whose optical image is cloud-dominated; Sentinel-1 pairs
/// pass through regardless of brightness. Input order is preserved.
pub fn screen_clouds<I: CloudInput, T>(
    entries: Vec<(I, T)>,
    rule: &CloudRule,
) -> Result<Vec<(I, T)>, CloudError> {
    rule.validate()?;
    let mut retained = Vec::with_capacity(entries.len());
    for (img, payload) in entries {
        let keep = if img.source().is_sar() {
            true
        } else {
            cloud_fraction(&img, rule)? <= rule.fraction_threshold
        };
        if keep {
            retained.push((img, payload));
        }
    }
    Ok(retained)
}
