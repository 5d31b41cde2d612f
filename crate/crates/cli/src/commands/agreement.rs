//! `agreement`: score two mask sources frame by frame with inter-model Dice,
//! classify and histogram the scores, and optionally draw a seeded review
//! sample from the agreement tails.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use echograph::agreement::{histogram, partition_sample, record, AgreementClass, AgreementRecord};
use echograph::imaging::load_mask;
use echograph::metrics::inter_model_dice;
use serde::Serialize;

use crate::config;
use crate::dataset::{ensure_dir, paired_by_stem, write_json};

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// First mask source (directory of PNGs).
    #[arg(long)]
    pub a: PathBuf,
    /// Second mask source (directory of PNGs, paired by file stem).
    #[arg(long)]
    pub b: PathBuf,
    /// Output directory for records.csv, histogram.json and sample.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Run configuration (thresholds, sampling seed).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Histogram bin width over [0, 1].
    #[arg(long, default_value_t = 0.01)]
    pub bin_width: f64,
    /// Review-sample size from the Low class.
    #[arg(long, default_value_t = 0)]
    pub sample_low: usize,
    /// Review-sample size from the High class.
    #[arg(long, default_value_t = 0)]
    pub sample_high: usize,
    /// Sampling seed override.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct AgreementSummary {
    pub frames: usize,
    pub low: usize,
    pub mid: usize,
    pub high: usize,
    pub retained: usize,
}

fn records_csv(records: &[AgreementRecord]) -> String {
    let mut text = String::from("frame,inter_model_dice,class,retained\n");
    for r in records {
        writeln!(text, "{},{},{:?},{}", r.frame, r.inter_model_dice, r.class, r.retained)
            .expect("writing to a String cannot fail");
    }
    text
}

pub fn run(args: &AgreementArgs) -> Result<()> {
    let cfg = config::load_or_default(args.config.as_deref())?;
    let pairs = paired_by_stem(&args.a, &["png"], &args.b, &["png"])?;
    ensure_dir(&args.out)?;

    let mut records = Vec::with_capacity(pairs.len());
    let mut dices = Vec::with_capacity(pairs.len());
    for (name, a_path, b_path) in &pairs {
        let a = load_mask(a_path)
            .with_context(|| format!("loading mask {}", a_path.display()))?;
        let b = load_mask(b_path)
            .with_context(|| format!("loading mask {}", b_path.display()))?;
        let dice =
            inter_model_dice(&a, &b).with_context(|| format!("inter-model Dice for {name}"))?;
        records.push(record(name.clone(), dice, &cfg.agreement)?);
        dices.push(dice);
    }

    std::fs::write(args.out.join("records.csv"), records_csv(&records))
        .context("writing records.csv")?;
    write_json(&histogram(&dices, args.bin_width)?, &args.out.join("histogram.json"))?;
    if args.sample_low + args.sample_high > 0 {
        let sample = partition_sample(
            &records,
            args.sample_low,
            args.sample_high,
            args.seed.unwrap_or(cfg.seeds.sample),
        )?;
        write_json(&sample, &args.out.join("sample.json"))?;
    }

    let count = |class: AgreementClass| records.iter().filter(|r| r.class == class).count();
    let summary = AgreementSummary {
        frames: records.len(),
        low: count(AgreementClass::Low),
        mid: count(AgreementClass::Mid),
        high: count(AgreementClass::High),
        retained: records.iter().filter(|r| r.retained).count(),
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
