//! Three-way comparison of the pipeline's two data-quality stages: no
//! screening and no temporal window, screening only, and screening plus the
//! one-month fusion window. Each variant runs the full pipeline into its
//! own subdirectory and is scored against the manifest's labels.

use std::fs;
use std::path::Path;

use canopy_core::metrics::MetricsReport;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::eval::evaluate;
use crate::pipeline::{run_with_config, PipelineError, RunSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub cloud_screening: bool,
    pub window_months: u32,
    pub metrics: MetricsReport,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

fn variant(config: &PipelineConfig, screening: bool, window_months: u32) -> PipelineConfig {
    let mut cfg = config.clone();
    // A fraction can never exceed 1, so a threshold of 1 keeps everything.
    if !screening {
        cfg.cloud.fraction_threshold = 1.0;
    }
    cfg.fusion.window_months = window_months;
    cfg
}

/// Runs the three variants against one manifest, writing predictions under
/// `out_dir/<variant>` and `ablation.json` beside them.
pub fn ablate(
    manifest_path: &Path,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<AblationReport, PipelineError> {
    let variants = [
        ("baseline", false, 0u32),
        ("screened", true, 0),
        ("screened_windowed", true, 1),
    ];

    let mut rows = Vec::with_capacity(variants.len());
    for (name, screening, window) in variants {
        let cfg = variant(config, screening, window);
        let sub = out_dir.join(name);
        let summary = run_with_config(manifest_path, &cfg, &sub)?;
        let eval = evaluate(&sub, manifest_path, false)?;
        rows.push(AblationRow {
            name: name.to_string(),
            cloud_screening: screening,
            window_months: window,
            metrics: eval.overall,
            summary,
        });
    }

    let report = AblationReport { rows };
    let path = out_dir.join("ablation.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&path, json + "\n").map_err(|source| PipelineError::Io { path, source })?;
    Ok(report)
}

/// Fixed-width text table of the three rows.
pub fn render_table(report: &AblationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<20} {:>6} {:>6} {:>9} {:>9} {:>9} {:>12} {:>13}\n",
        "variant", "screen", "window", "pa", "f1", "iou", "masks_input", "cloud_removed"
    ));
    for row in &report.rows {
        out.push_str(&format!(
            "{:<20} {:>6} {:>6} {:>9.5} {:>9.5} {:>9.5} {:>12} {:>13}\n",
            row.name,
            if row.cloud_screening { "on" } else { "off" },
            row.window_months,
            row.metrics.pixel_accuracy,
            row.metrics.f1,
            row.metrics.iou,
            row.summary.masks_input,
            row.summary.cloud_removed_images,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_scene, SynthParams};

    #[test]
    fn corruption_free_scene_gives_equal_rows() {
        let dir = tempfile::tempdir().unwrap();
        let scene = dir.path().join("scene");
        let params = SynthParams {
            seed: 41,
            regions: 2,
            months: 3,
            size: 16,
            noise_sigma: 0.0,
            black_failure_rate: 0.0,
            cloud_rate: 0.0,
            deforestation_growth: 0.0,
            ..SynthParams::default()
        };
        generate_scene(&params, &scene).unwrap();

        let report = ablate(
            &scene.join("manifest.json"),
            &PipelineConfig::default(),
            &dir.path().join("out"),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 3);
        for row in &report.rows {
            assert_eq!(row.metrics.pixel_accuracy, 1.0);
            assert_eq!(row.metrics.f1, 1.0);
            assert_eq!(row.metrics.iou, 1.0);
            assert_eq!(row.summary.cloud_removed_images, 0);
        }
    }

    #[test]
    fn screening_row_uses_strictly_fewer_masks_when_clouds_present() {
        let dir = tempfile::tempdir().unwrap();
        let scene = dir.path().join("scene");
        let params = SynthParams {
            seed: 43,
            regions: 2,
            months: 4,
            views_per_month: 2,
            size: 16,
            cloud_rate: 0.5,
            black_failure_rate: 0.0,
            noise_sigma: 0.0,
            deforestation_growth: 0.0,
            ..SynthParams::default()
        };
        generate_scene(&params, &scene).unwrap();

        let report = ablate(
            &scene.join("manifest.json"),
            &PipelineConfig::default(),
            &dir.path().join("out"),
        )
        .unwrap();
        let baseline = &report.rows[0];
        let screened = &report.rows[1];
        assert_eq!(baseline.summary.cloud_removed_images, 0);
        assert!(screened.summary.cloud_removed_images > 0);
        assert!(screened.summary.masks_input < baseline.summary.masks_input);
    }

    #[test]
    fn ordering_holds_on_a_corrupted_scene() {
        let dir = tempfile::tempdir().unwrap();
        let scene = dir.path().join("scene");
        let params = SynthParams {
            seed: 47,
            regions: 3,
            months: 6,
            views_per_month: 2,
            size: 24,
            cloud_rate: 0.2,
            black_failure_rate: 0.1,
            noise_sigma: 0.1,
            view_dropout_rate: 0.6,
            ..SynthParams::default()
        };
        generate_scene(&params, &scene).unwrap();

        let report = ablate(
            &scene.join("manifest.json"),
            &PipelineConfig::default(),
            &dir.path().join("out"),
        )
        .unwrap();
        let pa: Vec<f64> = report
            .rows
            .iter()
            .map(|r| r.metrics.pixel_accuracy)
            .collect();
        assert!(pa[0] <= pa[1], "screening hurt accuracy: {pa:?}");
        assert!(pa[1] <= pa[2], "window hurt accuracy: {pa:?}");

        let table = render_table(&report);
        assert!(table.contains("baseline"));
        assert!(table.contains("screened_windowed"));
        assert_eq!(table.lines().count(), 4);
        assert!(dir.path().join("out/ablation.json").is_file());
    }
}
