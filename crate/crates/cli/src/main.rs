//! Command-line surface for the contour-keypoint segmentation toolkit.
//!
//! Every subcommand is deterministic given its seed and inputs; failures
//! print a machine-readable JSON error record to stderr and exit nonzero.

mod commands;
mod config;
mod dataset;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "echograph",
    version,
    about = "Contour-keypoint cardiac segmentation: synthesis, training, clinical measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom dataset (images + label masks).
    Synth(commands::synth::SynthArgs),
    /// Extract contour keypoints from label masks.
    #[command(name = "extract-keypoints")]
    ExtractKeypoints(commands::extract::ExtractArgs),
    /// Render keypoint files back into label masks.
    Rasterize(commands::rasterize::RasterizeArgs),
    /// Train the ring decoder on an image + mask dataset.
    Train(commands::train::TrainArgs),
    /// Predict keypoints for images with a trained model.
    Infer(commands::infer::InferArgs),
    /// Dice / Hausdorff / anatomical-correctness report against references.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Biplane Simpson ejection fractions for exam specs.
    Ef(commands::ef::EfArgs),
    /// Inter-model agreement records, histogram and review sample.
    Agreement(commands::agreement::AgreementArgs),
    /// Inference-timing protocol (warmup + timed runs).
    Bench(commands::bench::BenchArgs),
    /// Finite-difference audit of every backward pass.
    Gradcheck(commands::gradcheck::GradcheckArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::ExtractKeypoints(_) => "extract-keypoints",
            Command::Rasterize(_) => "rasterize",
            Command::Train(_) => "train",
            Command::Infer(_) => "infer",
            Command::Evaluate(_) => "evaluate",
            Command::Ef(_) => "ef",
            Command::Agreement(_) => "agreement",
            Command::Bench(_) => "bench",
            Command::Gradcheck(_) => "gradcheck",
        }
    }

    fn run(&self) -> anyhow::Result<()> {
        match self {
            Command::Synth(args) => commands::synth::run(args),
            Command::ExtractKeypoints(args) => commands::extract::run(args),
            Command::Rasterize(args) => commands::rasterize::run(args),
            Command::Train(args) => commands::train::run(args),
            Command::Infer(args) => commands::infer::run(args),
            Command::Evaluate(args) => commands::evaluate::run(args),
            Command::Ef(args) => commands::ef::run(args),
            Command::Agreement(args) => commands::agreement::run(args),
            Command::Bench(args) => commands::bench::run(args),
            Command::Gradcheck(args) => commands::gradcheck::run(args),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = cli.command.run() {
        let record = serde_json::json!({
            "command": cli.command.name(),
            "error": format!("{err:#}"),
        });
        eprintln!("{record}");
        std::process::exit(1);
    }
}
