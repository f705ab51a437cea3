use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use canopy_fuse::ablate::{ablate, render_table};
use canopy_fuse::config::PipelineConfig;
use canopy_fuse::eval::evaluate;
use canopy_fuse::pipeline::{run, PipelineError};
use canopy_fuse::synth::{generate_scene, SynthParams};

#[derive(Parser)]
#[command(
    name = "canopy-fuse",
    version,
    about = "Multi-sensor deforestation mask fusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse probability masks into one deforestation mask per query.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Score predictions against a manifest's labels.
    Eval {
        /// Directory holding pred_<query>.mebf rasters.
        #[arg(long)]
        pred: PathBuf,
        /// Manifest whose label entries define the ground truth.
        #[arg(long)]
        gt: PathBuf,
        /// Include one metrics row per query in the report.
        #[arg(long)]
        per_query: bool,
    },
    /// Generate a synthetic scene with known ground truth.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        regions: Option<usize>,
        #[arg(long)]
        months: Option<usize>,
        #[arg(long)]
        views_per_month: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        blob_count_min: Option<usize>,
        #[arg(long)]
        blob_count_max: Option<usize>,
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        black_failure_rate: Option<f64>,
        #[arg(long)]
        cloud_rate: Option<f64>,
        #[arg(long)]
        deforestation_growth: Option<f64>,
        #[arg(long)]
        view_dropout_rate: Option<f64>,
    },
    /// Run the screening/window variants and compare their scores.
    Ablate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match panic::catch_unwind(AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(code)) => ExitCode::from(code),
        Err(_) => {
            eprintln!("canopy-fuse: internal error");
            ExitCode::from(1)
        }
    }
}

fn fail(e: PipelineError) -> u8 {
    eprintln!("canopy-fuse: {e}");
    e.exit_code()
}

fn dispatch(cli: Cli) -> Result<(), u8> {
    match cli.command {
        Command::Run {
            manifest,
            config,
            out,
            workers,
        } => {
            let summary = run(&manifest, &config, &out, workers).map_err(fail)?;
            for stem in &summary.no_data {
                eprintln!("warning: no usable data for query {stem}");
            }
            println!(
                "queries {}  predictions {}  no-data {}  cloud-removed {}  filtered {}",
                summary.queries,
                summary.predictions_written,
                summary.no_data_queries,
                summary.cloud_removed_images,
                summary.stage1_removed_masks + summary.stage2_removed_masks,
            );
            Ok(())
        }
        Command::Eval {
            pred,
            gt,
            per_query,
        } => {
            let report = evaluate(&pred, &gt, per_query).map_err(fail)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(())
        }
        Command::Synth {
            seed,
            out,
            regions,
            months,
            views_per_month,
            size,
            blob_count_min,
            blob_count_max,
            noise_sigma,
            black_failure_rate,
            cloud_rate,
            deforestation_growth,
            view_dropout_rate,
        } => {
            let mut params = SynthParams {
                seed,
                ..SynthParams::default()
            };
            macro_rules! overlay {
                ($($field:ident),*) => {
                    $(if let Some(v) = $field { params.$field = v; })*
                };
            }
            overlay!(
                regions,
                months,
                views_per_month,
                size,
                blob_count_min,
                blob_count_max,
                noise_sigma,
                black_failure_rate,
                cloud_rate,
                deforestation_growth,
                view_dropout_rate
            );
            let summary = generate_scene(&params, &out).map_err(|e| {
                eprintln!("canopy-fuse: {e}");
                e.exit_code()
            })?;
            println!(
                "scene written to {}  imagery {}  masks {}  labels {}  cloudy {}  black {}",
                out.display(),
                summary.imagery_entries,
                summary.mask_entries,
                summary.label_entries,
                summary.cloudy_imagery,
                summary.black_masks,
            );
            Ok(())
        }
        Command::Ablate {
            manifest,
            config,
            out,
        } => {
            let cfg = PipelineConfig::load(&config).map_err(|e| fail(e.into()))?;
            let report = ablate(&manifest, &cfg, &out).map_err(fail)?;
            print!("{}", render_table(&report));
            Ok(())
        }
    }
}
