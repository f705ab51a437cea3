//! Scoring predicted masks against manifest labels.
//!
//! Every label in the manifest names a query; its prediction is expected at
//! `<pred_dir>/pred_<stem>.mebf`. A missing prediction counts as an
//! all-zero mask and is flagged, so silently absent output cannot inflate
//! scores. Metrics are micro-averaged: confusion counts are summed over
//! queries first, then turned into rates.

use std::collections::BTreeMap;
use std::path::Path;

use canopy_core::metrics::{aggregate, confusion, ConfusionCounts, MetricsReport};
use canopy_core::{BinaryMask, QueryKey};
use serde::{Deserialize, Serialize};

use crate::manifest::{Manifest, ManifestEntry};
use crate::mebf;
use crate::pipeline::{pred_filename, query_stem, PipelineError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQueryMetrics {
    pub query: String,
    pub missing_prediction: bool,
    pub counts: ConfusionCounts,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub queries: usize,
    pub missing_predictions: usize,
    /// Stems of labeled queries with no prediction file, in key order.
    pub missing: Vec<String>,
    pub counts: ConfusionCounts,
    pub overall: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_query: Option<Vec<PerQueryMetrics>>,
}

/// Compares `pred_dir` against the labels of the manifest at `gt_path`.
/// Labels sharing a query key are deduplicated, first in manifest order
/// winning, matching how the oracle provider reads the manifest.
pub fn evaluate(
    pred_dir: &Path,
    gt_path: &Path,
    per_query: bool,
) -> Result<EvalReport, PipelineError> {
    let manifest = Manifest::load(gt_path)?;
    let mut labels: BTreeMap<QueryKey, &ManifestEntry> = BTreeMap::new();
    for entry in manifest.labels() {
        labels.entry(entry.query_key()).or_insert(entry);
    }

    let mut report = EvalReport {
        queries: labels.len(),
        missing_predictions: 0,
        missing: Vec::new(),
        counts: ConfusionCounts::default(),
        overall: MetricsReport {
            pixel_accuracy: 0.0,
            f1: 0.0,
            iou: 0.0,
        },
        per_query: per_query.then(Vec::new),
    };

    let mut all_counts = Vec::with_capacity(labels.len());
    for (key, entry) in &labels {
        let gt = mebf::read_mask(&entry.path)?;
        let stem = query_stem(key);
        let pred_path = pred_dir.join(pred_filename(key));
        let (pred, missing) = if pred_path.is_file() {
            (mebf::read_mask(&pred_path)?, false)
        } else {
            (BinaryMask::zeros(gt.width(), gt.height()), true)
        };
        if missing {
            report.missing_predictions += 1;
            report.missing.push(stem.clone());
        }
        let counts = confusion(&pred, &gt)?;
        all_counts.push(counts);
        if let Some(rows) = report.per_query.as_mut() {
            rows.push(PerQueryMetrics {
                query: stem,
                missing_prediction: missing,
                counts,
                metrics: MetricsReport::from_counts(&counts)?,
            });
        }
    }

    report.counts = all_counts.iter().copied().sum();
    report.overall = aggregate(all_counts)?;
    Ok(report)
}
