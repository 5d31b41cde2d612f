//! `infer`: predict keypoints for images with a trained model.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use echograph::gcn::load_model;
use echograph::imaging::{load_image, resize_image};
use echograph::keypoints::save_keypoints;

use crate::commands::extract::spacing_from;
use crate::config;
use crate::dataset::{ensure_dir, expand_input, stem_of};

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Image PNG file, or a directory of image PNGs.
    #[arg(long)]
    pub image: PathBuf,
    /// Output keypoints JSON file (file input) or directory (directory
    /// input).
    #[arg(long)]
    pub out: PathBuf,
    /// Run configuration (network input size, default spacing).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pixel spacing recorded in the keypoint files, mm along x.
    #[arg(long)]
    pub sx: Option<f64>,
    /// Pixel spacing recorded in the keypoint files, mm along y.
    #[arg(long)]
    pub sy: Option<f64>,
}

pub fn run(args: &InferArgs) -> Result<()> {
    let cfg = config::load_or_default(args.config.as_deref())?;
    let spacing = spacing_from(&cfg, args.sx, args.sy)?;
    let model = load_model(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let (w, h) = cfg.train.image_size;

    let inputs = expand_input(&args.image, &["png"])?;
    let single_file = args.image.is_file();
    if !single_file {
        ensure_dir(&args.out)?;
    }
    for input in &inputs {
        let image = load_image(input)
            .with_context(|| format!("loading image {}", input.display()))?;
        // The encoder saw this size in training; keypoints are normalized,
        // so the prediction transfers to any raster resolution.
        let image = resize_image(&image, w, h)?;
        let kps = model
            .infer(&image, spacing)
            .with_context(|| format!("inferring on {}", input.display()))?;
        let out: PathBuf = if single_file {
            args.out.clone()
        } else {
            args.out.join(format!("{}.json", stem_of(input)))
        };
        save_keypoints(&kps, &out)
            .with_context(|| format!("saving keypoints {}", out.display()))?;
    }
    println!("inferred keypoints for {} image(s)", inputs.len());
    Ok(())
}
