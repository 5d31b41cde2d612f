//! `bench`: time model inference under the warmup + timed-runs protocol and
//! print a table row (name, ms ± sd, parameters in millions).

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use echograph::bench::bench_model;
use echograph::gcn::{load_model, GcnModel};

use crate::config;
use crate::dataset::{stem_of, write_json};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Trained model file; omitted = a freshly initialized model from the
    /// configured architecture.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Row label; defaults to the model file stem or "gcn-default".
    #[arg(long)]
    pub name: Option<String>,
    /// Run configuration (protocol counts, architecture, seeds).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input-generation seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &BenchArgs) -> Result<()> {
    let cfg = config::load_or_default(args.config.as_deref())?;
    let model = match &args.model {
        Some(path) => {
            load_model(path).with_context(|| format!("loading model {}", path.display()))?
        }
        None => GcnModel::<f32>::new(
            cfg.encoder.clone(),
            cfg.decoder.clone(),
            cfg.sampling,
            cfg.seeds.model,
        )
        .context("building model")?,
    };
    let name = args
        .name
        .clone()
        .or_else(|| args.model.as_deref().map(stem_of))
        .unwrap_or_else(|| "gcn-default".into());

    let report = bench_model(&model, &cfg.bench, args.seed.unwrap_or(cfg.seeds.bench))
        .context("benchmarking")?;
    println!(
        "{name}  {:.3} ± {:.3} ms/inference  {:.3} M params",
        report.mean_ms_per_inference,
        report.sd_ms,
        report.param_count as f64 / 1e6,
    );
    if let Some(path) = &args.out {
        write_json(&report, path)?;
    }
    Ok(())
}
