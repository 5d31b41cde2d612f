//! Inference-timing harness: warm the model up on random inputs, then time
//! batches of forward passes with a monotonic clock.
//!
//! The clock wraps only the network forward call — input generation and any
//! result handling happen outside the timed region — and the whole loop is
//! single-threaded for stable measurements. Absolute millisecond values are
//! hardware-dependent; the report exists so runs on the same machine can be
//! compared.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gcn::{GcnError, GcnModel};
use crate::imaging::{Image, ImagingError};
use crate::nn::Real;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bench protocol counts must all be >= 1 (got {0:?})")]
    BadProtocol(BenchProtocol),
    #[error(transparent)]
    Model(#[from] GcnError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// Measurement protocol: how many untimed warmup inferences to run, then how
/// many timed runs of how many inferences each, on random inputs of the
/// given shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchProtocol {
    pub warmup_inputs: usize,
    pub test_runs: usize,
    pub inputs_per_run: usize,
    pub width: usize,
    pub height: usize,
}

impl Default for BenchProtocol {
    fn default() -> Self {
        BenchProtocol {
            warmup_inputs: 1000,
            test_runs: 10,
            inputs_per_run: 100,
            width: 256,
            height: 256,
        }
    }
}

impl BenchProtocol {
    pub fn validate(&self) -> Result<(), BenchError> {
        let ok = self.warmup_inputs >= 1
            && self.test_runs >= 1
            && self.inputs_per_run >= 1
            && self.width >= 1
            && self.height >= 1;
        if ok {
            Ok(())
        } else {
            Err(BenchError::BadProtocol(*self))
        }
    }
}

/// Timing summary: per-inference latency statistics over the timed runs plus
/// the model's parameter count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mean_ms_per_inference: f64,
    /// Sample standard deviation of the per-run ms/inference values
    /// (0 when there is a single run).
    pub sd_ms: f64,
    pub per_run_ms: Vec<f64>,
    pub param_count: usize,
}

fn random_image(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Result<Image, ImagingError> {
    let data: Vec<f32> = (0..width * height).map(|_| rng.random::<f32>()).collect();
    Image::new(width, height, data)
}

/// Runs the protocol against a model: `warmup_inputs` untimed forward passes,
/// then `test_runs` timed runs of `inputs_per_run` forward passes each. A
/// run's ms/inference is its wall time divided by `inputs_per_run`.
pub fn bench_model<T: Real>(
    model: &GcnModel<T>,
    protocol: &BenchProtocol,
    seed: u64,
) -> Result<BenchReport, BenchError> {
    protocol.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..protocol.warmup_inputs {
        let img = random_image(&mut rng, protocol.width, protocol.height)?;
        std::hint::black_box(model.forward(&img)?);
    }

    let mut per_run_ms = Vec::with_capacity(protocol.test_runs);
    for _ in 0..protocol.test_runs {
        let inputs: Vec<Image> = (0..protocol.inputs_per_run)
            .map(|_| random_image(&mut rng, protocol.width, protocol.height))
            .collect::<Result<_, _>>()?;
        let start = Instant::now();
        for img in &inputs {
            std::hint::black_box(model.forward(img)?);
        }
        let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        per_run_ms.push(elapsed_ms / protocol.inputs_per_run as f64);
    }

    let n = per_run_ms.len() as f64;
    let mean = per_run_ms.iter().sum::<f64>() / n;
    let sd = if per_run_ms.len() > 1 {
        (per_run_ms.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(BenchReport {
        mean_ms_per_inference: mean,
        sd_ms: sd,
        per_run_ms,
        param_count: model.param_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::{DecoderConfig, HeadKind};
    use crate::keypoints::SamplingConfig;
    use crate::nn::EncoderConfig;

    fn tiny_model() -> GcnModel<f32> {
        let enc = EncoderConfig { blocks: vec![(2, 2), (4, 2)], embedding: 8 };
        let dec = DecoderConfig {
            channels: Some(vec![4]),
            primary_window: Some(3),
            secondary_window: 1,
            head: HeadKind::Displacement,
        };
        GcnModel::<f32>::new(enc, dec, SamplingConfig::default(), 0).unwrap()
    }

    #[test]
    fn default_protocol_matches_the_measurement_recipe() {
        let p = BenchProtocol::default();
        assert_eq!(
            (p.warmup_inputs, p.test_runs, p.inputs_per_run, p.width, p.height),
            (1000, 10, 100, 256, 256)
        );
        assert!(p.validate().is_ok());
    }

    #[test]
    fn zero_counts_are_rejected() {
        for field in 0..3 {
            let mut p = BenchProtocol::default();
            match field {
                0 => p.warmup_inputs = 0,
                1 => p.test_runs = 0,
                _ => p.inputs_per_run = 0,
            }
            assert!(matches!(p.validate(), Err(BenchError::BadProtocol(_))));
        }
    }

    #[test]
    fn report_has_one_entry_per_run_and_positive_times() {
        let model = tiny_model();
        let protocol = BenchProtocol {
            warmup_inputs: 2,
            test_runs: 3,
            inputs_per_run: 2,
            width: 32,
            height: 32,
        };
        let report = bench_model(&model, &protocol, 9).unwrap();
        assert_eq!(report.per_run_ms.len(), 3);
        assert!(report.per_run_ms.iter().all(|&ms| ms > 0.0));
        assert!(report.mean_ms_per_inference > 0.0);
        assert!(report.sd_ms >= 0.0);
        assert_eq!(report.param_count, model.param_count());
        let recomputed = report.per_run_ms.iter().sum::<f64>() / 3.0;
        assert!((report.mean_ms_per_inference - recomputed).abs() < 1e-12);
    }

    #[test]
    fn single_run_reports_zero_sd() {
        let model = tiny_model();
        let protocol = BenchProtocol {
            warmup_inputs: 1,
            test_runs: 1,
            inputs_per_run: 1,
            width: 32,
            height: 32,
        };
        let report = bench_model(&model, &protocol, 1).unwrap();
        assert_eq!(report.sd_ms, 0.0);
        assert_eq!(report.per_run_ms.len(), 1);
    }

    #[test]
    fn protocol_json_rejects_unknown_keys() {
        let p: BenchProtocol = serde_json::from_str(r#"{"test_runs": 4}"#).unwrap();
        assert_eq!(p.test_runs, 4);
        assert_eq!(p.warmup_inputs, 1000);
        assert!(serde_json::from_str::<BenchProtocol>(r#"{"runs": 4}"#).is_err());
    }
}
