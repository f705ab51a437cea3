//! Pipeline configuration: one JSON file covering every stage. Unknown
//! keys are rejected so typos fail loudly instead of silently falling back
//! to defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use canopy_core::cloud::CloudRule;
use canopy_core::fusion::FusionConfig;
use canopy_core::morph::StructElement;
use canopy_core::preprocess::ClipSpec;
use canopy_core::provider::ProviderKind;
use canopy_core::SatelliteSource;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
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
    #[error("invalid clip spec: {0}")]
    Clip(#[from] canopy_core::preprocess::PreprocessError),
    #[error("invalid cloud rule: {0}")]
    Cloud(#[from] canopy_core::cloud::CloudError),
    #[error("invalid fusion config: {0}")]
    Fusion(#[from] canopy_core::fusion::FusionError),
    #[error("invalid structuring element: {0}")]
    Se(#[from] canopy_core::morph::MorphError),
    #[error("workers must be at least 1")]
    ZeroWorkers,
}

fn default_workers() -> usize {
    1
}

fn default_providers() -> BTreeMap<SatelliteSource, ProviderKind> {
    [
        SatelliteSource::Sentinel1,
        SatelliteSource::Sentinel2,
        SatelliteSource::Landsat8,
    ]
    .into_iter()
    .map(|s| (s, ProviderKind::File))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub clip: ClipSpec,
    pub cloud: CloudRule,
    pub fusion: FusionConfig,
    pub se: StructElement,
    /// Which provider serves each satellite. Sources absent from the map
    /// cannot contribute imagery.
    pub providers: BTreeMap<SatelliteSource, ProviderKind>,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            clip: ClipSpec::default(),
            cloud: CloudRule::default(),
            fusion: FusionConfig::default(),
            se: StructElement::default(),
            providers: default_providers(),
            workers: default_workers(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.clip.validate()?;
        self.cloud.validate()?;
        self.fusion.validate()?;
        self.se.validate()?;
        if self.workers == 0 {
            return Err(ConfigError::ZeroWorkers);
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        cfg.validate()?;
        Ok(cfg)
    }
}
