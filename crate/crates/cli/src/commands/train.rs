//! `train`: fit the ring decoder on an image + mask dataset.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use echograph::gcn::{
    evaluate_model, save_model, train, GcnModel, TrainConfig, TrainReport, TrainSample,
    ValMetrics,
};
use echograph::imaging::{load_image, resize_image};
use serde::Serialize;

use crate::commands::extract::{keypoints_of_mask, spacing_from};
use crate::config::{self, RunConfig};
use crate::dataset::{paired_by_stem, write_json};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory containing images/ and masks/ subdirectories.
    #[arg(long)]
    pub data: PathBuf,
    /// Output model file (binary weights container).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON training report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Run configuration (architecture, optimizer, augmentation, epochs).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Samples used for training; default 80% of the dataset.
    #[arg(long)]
    pub train_count: Option<usize>,
    /// Samples used for validation; default 10% of the dataset.
    #[arg(long)]
    pub val_count: Option<usize>,
    /// Epoch override.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Batch-size override.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Learning-rate override.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Training seed override (shuffling + augmentation).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weight-initialization seed override.
    #[arg(long)]
    pub model_seed: Option<u64>,
}

/// Final artifact written next to the weights: per-epoch losses plus the
/// validation metrics of the saved weights.
#[derive(Debug, Serialize)]
pub struct TrainingSummary {
    pub report: TrainReport,
    pub val_metrics: ValMetrics,
    pub train_samples: usize,
    pub val_samples: usize,
    pub param_count: usize,
}

/// Loads `(image, keypoints)` samples: images resized to the configured
/// training size, keypoint targets extracted from the full-resolution masks.
pub fn load_samples(data: &PathBuf, cfg: &RunConfig) -> Result<Vec<TrainSample>> {
    let pairs = paired_by_stem(&data.join("images"), &["png"], &data.join("masks"), &["png"])?;
    let spacing = spacing_from(cfg, None, None)?;
    let (w, h) = cfg.train.image_size;
    let mut samples = Vec::with_capacity(pairs.len());
    for (stem, image_path, mask_path) in &pairs {
        let image = load_image(image_path)
            .with_context(|| format!("loading image {}", image_path.display()))?;
        let image = resize_image(&image, w, h)
            .with_context(|| format!("resizing image {stem}"))?;
        let keypoints = keypoints_of_mask(mask_path, spacing, cfg)?;
        samples.push(TrainSample { image, keypoints });
    }
    Ok(samples)
}

/// Deterministic index split: first `train`, then `val`; the tail is left
/// for held-out evaluation.
pub fn split_counts(
    total: usize,
    train_count: Option<usize>,
    val_count: Option<usize>,
) -> Result<(usize, usize)> {
    let t = train_count.unwrap_or(total * 8 / 10);
    let v = val_count.unwrap_or((total / 10).max(1));
    if t == 0 || v == 0 || t + v > total {
        bail!("split {t}+{v} does not fit a dataset of {total} samples");
    }
    Ok((t, v))
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let mut cfg = config::load_or_default(args.config.as_deref())?;
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(b) = args.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(lr) = args.lr {
        cfg.adam.learning_rate = lr;
    }
    cfg.validate()?;

    let samples = load_samples(&args.data, &cfg)?;
    let (t, v) = split_counts(samples.len(), args.train_count, args.val_count)?;
    let (train_set, rest) = samples.split_at(t);
    let val_set = &rest[..v];

    let mut model = GcnModel::<f32>::new(
        cfg.encoder.clone(),
        cfg.decoder.clone(),
        cfg.sampling,
        args.model_seed.unwrap_or(cfg.seeds.model),
    )
    .context("building model")?;
    let train_cfg = TrainConfig {
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        seed: args.seed.unwrap_or(cfg.seeds.train),
        adam: cfg.adam,
        augment: cfg.augment.clone(),
        early_stop: cfg.train.early_stop,
    };
    let report = train(&mut model, train_set, val_set, &train_cfg).context("training")?;

    let eval_size = cfg.train.early_stop.map(|e| e.eval_size).unwrap_or((256, 256));
    let val_metrics =
        evaluate_model(&model, val_set, eval_size).context("validation metrics")?;
    save_model(&model, &args.out)
        .with_context(|| format!("saving model {}", args.out.display()))?;

    let summary = TrainingSummary {
        report,
        val_metrics,
        train_samples: t,
        val_samples: v,
        param_count: model.param_count(),
    };
    if let Some(report_path) = &args.report {
        write_json(&summary, report_path)?;
    }
    println!(
        "trained {} epochs (best {} @ val loss {:.6}); val pixel error {:.3}, combined Dice {:.4}",
        summary.report.epochs.len(),
        summary.report.best_epoch,
        summary.report.best_val_loss,
        summary.val_metrics.mean_pixel_error,
        summary.val_metrics.combined_dice,
    );
    Ok(())
}
