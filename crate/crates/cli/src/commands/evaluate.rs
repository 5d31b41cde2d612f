//! `evaluate`: compare predicted segmentations (keypoint files or masks)
//! against reference masks — Dice, Hausdorff, and anatomical-correctness
//! reports per sample plus aggregates.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use echograph::anatomy::{check_mask, AnatomyReport};
use echograph::imaging::{load_mask, rasterize_keypoints};
use echograph::keypoints::load_keypoints;
use echograph::metrics::{metric_report, MetricReport};
use serde::Serialize;

use crate::commands::extract::spacing_from;
use crate::config;
use crate::dataset::{paired_by_stem, write_json};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions: a directory (or file) of keypoint JSONs or mask PNGs.
    #[arg(long)]
    pub pred: PathBuf,
    /// References: a directory (or file) of mask PNGs.
    #[arg(long)]
    pub reference: PathBuf,
    /// JSON report path; omitted = print to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV with one row per sample.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Run configuration (default spacing for millimetre distances).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pixel spacing override, mm along x.
    #[arg(long)]
    pub sx: Option<f64>,
    /// Pixel spacing override, mm along y.
    #[arg(long)]
    pub sy: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SampleRow {
    pub name: String,
    #[serde(flatten)]
    pub metrics: MetricReport,
    pub anatomy_ok: bool,
    pub anatomy_failures: Vec<String>,
    pub anatomy: AnatomyReport,
}

#[derive(Debug, Serialize)]
pub struct Aggregate {
    pub samples: usize,
    pub mean_dice_lv: f64,
    pub mean_dice_myo: f64,
    pub mean_dice_la: f64,
    pub mean_combined_dice: f64,
    pub mean_hausdorff_combined_mm: f64,
    pub anatomically_incorrect: usize,
}

#[derive(Debug, Serialize)]
pub struct EvaluationReport {
    pub samples: Vec<SampleRow>,
    pub aggregate: Aggregate,
}

fn aggregate_of(rows: &[SampleRow]) -> Aggregate {
    let n = rows.len().max(1) as f64;
    let mean = |f: fn(&MetricReport) -> f64| rows.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
    Aggregate {
        samples: rows.len(),
        mean_dice_lv: mean(|m| m.dice_lv),
        mean_dice_myo: mean(|m| m.dice_myo),
        mean_dice_la: mean(|m| m.dice_la),
        mean_combined_dice: mean(|m| m.combined_dice),
        mean_hausdorff_combined_mm: mean(|m| m.hausdorff_combined_mm),
        anatomically_incorrect: rows.iter().filter(|r| !r.anatomy_ok).count(),
    }
}

fn csv_of(rows: &[SampleRow]) -> String {
    let mut text = String::from(
        "name,dice_lv,dice_myo,dice_la,combined_dice,hausdorff_endo_mm,hausdorff_epi_mm,\
         hausdorff_combined_mm,inter_model_dice,anatomy_ok,anatomy_failures\n",
    );
    for r in rows {
        let m = &r.metrics;
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.name,
            m.dice_lv,
            m.dice_myo,
            m.dice_la,
            m.combined_dice,
            m.hausdorff_endo_mm,
            m.hausdorff_epi_mm,
            m.hausdorff_combined_mm,
            m.inter_model_dice,
            r.anatomy_ok,
            r.anatomy_failures.join("|"),
        )
        .expect("writing to a String cannot fail");
    }
    text
}

pub fn run(args: &EvaluateArgs) -> Result<()> {
    let cfg = config::load_or_default(args.config.as_deref())?;
    let spacing = spacing_from(&cfg, args.sx, args.sy)?;
    let pairs = paired_by_stem(&args.pred, &["json", "png"], &args.reference, &["png"])?;

    let mut rows = Vec::with_capacity(pairs.len());
    for (name, pred_path, ref_path) in &pairs {
        let reference = load_mask(ref_path)
            .with_context(|| format!("loading reference {}", ref_path.display()))?;
        let pred = match pred_path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                let kps = load_keypoints(pred_path)
                    .with_context(|| format!("loading keypoints {}", pred_path.display()))?;
                rasterize_keypoints(&kps, reference.width(), reference.height())
                    .with_context(|| format!("rasterizing {}", pred_path.display()))?
            }
            _ => load_mask(pred_path)
                .with_context(|| format!("loading prediction {}", pred_path.display()))?,
        };
        let metrics = metric_report(&pred, &reference, spacing)
            .with_context(|| format!("metrics for {name}"))?;
        let anatomy = check_mask(&pred);
        let failures: Vec<String> =
            anatomy.failures().into_iter().map(str::to_owned).collect();
        rows.push(SampleRow {
            name: name.clone(),
            metrics,
            anatomy_ok: failures.is_empty(),
            anatomy_failures: failures,
            anatomy,
        });
    }

    let report = EvaluationReport { aggregate: aggregate_of(&rows), samples: rows };
    if let Some(csv_path) = &args.csv {
        std::fs::write(csv_path, csv_of(&report.samples))
            .with_context(|| format!("writing {}", csv_path.display()))?;
    }
    match &args.out {
        Some(path) => write_json(&report, path)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}
