//! `rasterize`: render keypoint files back into label masks.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use echograph::imaging::{rasterize_keypoints, save_mask};
use echograph::keypoints::load_keypoints;

use crate::dataset::{ensure_dir, expand_input, stem_of};

#[derive(Debug, Args)]
pub struct RasterizeArgs {
    /// Keypoints JSON file, or a directory of them.
    #[arg(long)]
    pub keypoints: PathBuf,
    /// Output mask PNG file (file input) or directory (directory input).
    #[arg(long)]
    pub out: PathBuf,
    /// Raster width in pixels.
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    /// Raster height in pixels.
    #[arg(long, default_value_t = 256)]
    pub height: usize,
}

pub fn run(args: &RasterizeArgs) -> Result<()> {
    let inputs = expand_input(&args.keypoints, &["json"])?;
    let single_file = args.keypoints.is_file();
    if !single_file {
        ensure_dir(&args.out)?;
    }

    for input in &inputs {
        let kps = load_keypoints(input)
            .with_context(|| format!("loading keypoints {}", input.display()))?;
        let mask = rasterize_keypoints(&kps, args.width, args.height)
            .with_context(|| format!("rasterizing {}", input.display()))?;
        let out: PathBuf = if single_file {
            args.out.clone()
        } else {
            args.out.join(format!("{}.png", stem_of(input)))
        };
        save_mask(&mask, &out).with_context(|| format!("saving mask {}", out.display()))?;
    }
    println!("rasterized {} keypoint file(s) at {}x{}", inputs.len(), args.width, args.height);
    Ok(())
}
