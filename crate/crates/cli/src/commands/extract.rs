//! `extract-keypoints`: convert label masks into contour keypoint files.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use echograph::imaging::load_mask;
use echograph::keypoints::{extract_keypoints, save_keypoints};
use echograph::PixelSpacing;

use crate::config::{self, RunConfig};
use crate::dataset::{ensure_dir, expand_input, stem_of};

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Mask PNG file, or a directory of mask PNGs.
    #[arg(long)]
    pub mask: PathBuf,
    /// Output keypoints JSON file (file input) or directory (directory
    /// input).
    #[arg(long)]
    pub out: PathBuf,
    /// Run configuration (sampling densities, default spacing).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pixel spacing override, mm per pixel along x.
    #[arg(long)]
    pub sx: Option<f64>,
    /// Pixel spacing override, mm per pixel along y.
    #[arg(long)]
    pub sy: Option<f64>,
}

/// Spacing from flags, falling back to the configured phantom spacing.
pub fn spacing_from(cfg: &RunConfig, sx: Option<f64>, sy: Option<f64>) -> Result<PixelSpacing> {
    let base = cfg.phantom.spacing;
    PixelSpacing::new(sx.unwrap_or(base.sx), sy.unwrap_or(base.sy)).context("pixel spacing")
}

pub fn run(args: &ExtractArgs) -> Result<()> {
    let cfg = config::load_or_default(args.config.as_deref())?;
    let spacing = spacing_from(&cfg, args.sx, args.sy)?;
    let inputs = expand_input(&args.mask, &["png"])?;
    let single_file = args.mask.is_file();
    if !single_file {
        ensure_dir(&args.out)?;
    }

    for input in &inputs {
        let mask = load_mask(input)
            .with_context(|| format!("loading mask {}", input.display()))?;
        let kps = extract_keypoints(&mask, spacing, &cfg.sampling)
            .with_context(|| format!("extracting keypoints from {}", input.display()))?;
        let out: PathBuf = if single_file {
            args.out.clone()
        } else {
            args.out.join(format!("{}.json", stem_of(input)))
        };
        save_keypoints(&kps, &out)
            .with_context(|| format!("saving keypoints {}", out.display()))?;
    }
    println!("extracted keypoints for {} mask(s)", inputs.len());
    Ok(())
}

/// Shared helper: keypoints for one mask file under a given config.
pub fn keypoints_of_mask(
    path: &Path,
    spacing: PixelSpacing,
    cfg: &RunConfig,
) -> Result<echograph::KeypointSet> {
    let mask = load_mask(path)
        .with_context(|| format!("loading mask {}", path.display()))?;
    extract_keypoints(&mask, spacing, &cfg.sampling)
        .with_context(|| format!("extracting keypoints from {}", path.display()))
}
