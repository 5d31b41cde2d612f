//! `ef`: biplane ejection fractions for exams described by spec files that
//! reference keypoint JSONs on disk, with optional agreement filtering and a
//! feasibility summary.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use echograph::clinical::{
    exam_ef, CycleMarkers, EfResult, ExamManifest, FrameGeometry, SegmentedFrame, ViewRecording,
    DEFAULT_DISKS,
};
use echograph::keypoints::load_keypoints;
use echograph::metrics::{bland_altman, mae, BlandAltman, MaeSummary};
use serde::{Deserialize, Serialize};

use crate::dataset::{expand_input, write_json};

#[derive(Debug, Args)]
pub struct EfArgs {
    /// Exam spec JSON file, or a directory of them.
    #[arg(long)]
    pub exam: PathBuf,
    /// JSON report path; omitted = print to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of Simpson disks.
    #[arg(long, default_value_t = DEFAULT_DISKS)]
    pub n_disks: usize,
    /// Drop frames whose inter-model agreement is below this before pairing
    /// cycles; omitted = no filtering.
    #[arg(long)]
    pub filter_threshold: Option<f64>,
}

/// One frame on disk: a keypoints file plus an optional agreement score.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub keypoints: PathBuf,
    #[serde(default)]
    pub agreement: Option<f64>,
}

/// One apical view: frame geometry, the frame files, and cycle markers.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSpec {
    pub geometry: FrameGeometry,
    pub frames: Vec<FrameSpec>,
    pub cycles: Vec<CycleMarkers>,
}

/// A patient exam: both apical views plus an optional reference EF.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExamSpec {
    pub patient: String,
    #[serde(default)]
    pub reference_ef: Option<f64>,
    pub a4c: ViewSpec,
    pub a2c: ViewSpec,
}

fn load_view(spec: &ViewSpec, base: &Path) -> Result<ViewRecording> {
    let mut frames = Vec::with_capacity(spec.frames.len());
    for frame in &spec.frames {
        let path =
            if frame.keypoints.is_absolute() { frame.keypoints.clone() } else { base.join(&frame.keypoints) };
        let keypoints = load_keypoints(&path)
            .with_context(|| format!("loading keypoints {}", path.display()))?;
        frames.push(SegmentedFrame { keypoints, agreement: frame.agreement });
    }
    Ok(ViewRecording { geometry: spec.geometry, frames, cycles: spec.cycles.clone() })
}

/// Loads an exam spec and resolves its keypoint files (relative paths are
/// taken from the spec file's directory).
pub fn load_exam(path: &Path) -> Result<ExamManifest> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading exam spec {}", path.display()))?;
    let spec: ExamSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing exam spec {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let exam = ExamManifest {
        patient: spec.patient,
        a4c: load_view(&spec.a4c, &base)?,
        a2c: load_view(&spec.a2c, &base)?,
        reference_ef: spec.reference_ef,
    };
    exam.validate().with_context(|| format!("validating exam spec {}", path.display()))?;
    Ok(exam)
}

/// Cohort counts plus accuracy against references where available.
#[derive(Debug, Serialize)]
pub struct EfSummary {
    pub total: usize,
    pub retained: usize,
    pub excluded: usize,
    /// Mean absolute EF error against references, when at least one exam has
    /// both a mean EF and a reference.
    pub mae: Option<MaeSummary>,
    /// Bland-Altman agreement against references (needs two or more pairs).
    pub bland_altman: Option<BlandAltman>,
}

#[derive(Debug, Serialize)]
pub struct EfReport {
    pub results: Vec<EfResult>,
    pub summary: EfSummary,
}

pub fn summarize(results: &[EfResult]) -> EfSummary {
    let excluded = results.iter().filter(|r| r.excluded).count();
    let pairs: Vec<(f64, f64)> = results
        .iter()
        .filter_map(|r| r.mean_ef.zip(r.reference_ef))
        .collect();
    let auto: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let reference: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    EfSummary {
        total: results.len(),
        retained: results.len() - excluded,
        excluded,
        mae: mae(&auto, &reference).ok(),
        bland_altman: bland_altman(&auto, &reference).ok(),
    }
}

pub fn run(args: &EfArgs) -> Result<()> {
    let inputs = expand_input(&args.exam, &["json"])?;
    let mut results = Vec::with_capacity(inputs.len());
    for input in &inputs {
        let exam = load_exam(input)?;
        let result = exam_ef(&exam, args.n_disks, args.filter_threshold)
            .with_context(|| format!("computing EF for {}", input.display()))?;
        results.push(result);
    }
    let report = EfReport { summary: summarize(&results), results };
    match &args.out {
        Some(path) => write_json(&report, path)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}
