//! Batch front end for the fusion pipeline in `canopy-core`: manifest and
//! config loading, the MEBF raster format, file-backed mask providers, the
//! synthetic scene generator, evaluation, and the ablation harness.

pub mod ablate;
pub mod config;
pub mod eval;
pub mod manifest;
pub mod mebf;
pub mod pipeline;
pub mod provider;
pub mod synth;
