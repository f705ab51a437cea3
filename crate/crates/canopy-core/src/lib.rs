//! Per-pixel algorithms for turning stacks of per-satellite deforestation
//! probability masks into a single binary decision per location and month.
//!
//! The crate is IO-free and `no_std`-compatible (allocation required); file
//! formats, manifests and the batch CLI live in the companion `canopy-fuse`
//! crate. The processing stages provided here, in pipeline order:
//!
//! 1. [`preprocess`]: band selection per satellite and percentile
//!    clip-normalization to `[0, 1]`.
//! 2. [`cloud`]: rule-based cloud-coverage screening of optical imagery.
//! 3. [`provider`]: the abstraction producing a probability mask per image.
//! 4. [`fusion`]: adjacent-month weighting, two-stage sigma outlier
//!    filtering, weighted averaging and ensemble thresholding.
//! 5. [`morph`]: binary erosion/dilation/opening for final denoising.
//! 6. [`metrics`]: pixel accuracy, F1 and IoU against ground-truth masks.
//!
//! All types are immutable after construction and safe to share across
//! threads; every operation is a pure function of its inputs.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod cloud;
pub mod fusion;
pub mod metrics;
pub mod morph;
pub mod preprocess;
pub mod provider;
pub mod query;
pub mod raster;

pub use query::{month_index, QueryKey};
pub use raster::{
    BinaryMask, ImageMeta, MultiBandImage, NormalizedImage, ProbMask, RasterError, SatelliteSource,
};
