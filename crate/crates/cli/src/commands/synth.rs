//! `synth`: generate a phantom dataset of rendered images and label masks.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use echograph::imaging::{save_image, save_mask};
use echograph::phantom::generate_phantom;

use crate::config;
use crate::dataset::{ensure_dir, sample_name, write_json};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output dataset directory; creates images/ and masks/ inside.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of samples to generate.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Root seed; sample i is drawn with seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration (phantom sampling ranges, pixel spacing).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: &SynthArgs) -> Result<()> {
    let cfg = config::load_or_default(args.config.as_deref())?;
    let seed = args.seed.unwrap_or(cfg.seeds.synth);
    let images = args.out.join("images");
    let masks = args.out.join("masks");
    ensure_dir(&images)?;
    ensure_dir(&masks)?;

    for i in 0..args.n {
        let (image, mask) = generate_phantom(seed.wrapping_add(i as u64), &cfg.phantom)
            .with_context(|| format!("generating sample {i}"))?;
        let name = sample_name(i);
        save_image(&image, &images.join(format!("{name}.png")))
            .with_context(|| format!("saving image {name}"))?;
        save_mask(&mask, &masks.join(format!("{name}.png")))
            .with_context(|| format!("saving mask {name}"))?;
    }
    write_json(&cfg.phantom, &args.out.join("params.json"))?;
    cfg.save(&args.out.join("config.json"))?;
    println!("wrote {} samples under {}", args.n, args.out.display());
    Ok(())
}
