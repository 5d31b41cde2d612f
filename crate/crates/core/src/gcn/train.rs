//! Minibatch Adam training of the contour decoder on (image, keypoints)
//! pairs, with per-epoch validation, best-snapshot restoration, and an
//! optional clinical early-stopping rule (pixel error + combined Dice on the
//! validation split).
//!
//! Every source of randomness — epoch shuffles and per-sample augmentation —
//! is derived from the single config seed with a splitmix-style mixer, so a
//! run is bit-reproducible given the same datasets and configuration.

use super::{keypoint_loss, GcnError, GcnModel};
use crate::imaging::{rasterize_keypoints, Image};
use crate::keypoints::KeypointSet;
use crate::metrics::combined_dice;
use crate::nn::{Adam, AdamConfig, Tensor};
use crate::phantom::{augment, AugmentConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One supervised pair: an image and the keypoints it should decode to.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub image: Image,
    pub keypoints: KeypointSet,
}

/// Stop training once the validation split satisfies both clinical bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EarlyStopConfig {
    /// Evaluate every this many epochs.
    pub check_every: usize,
    /// Resolution at which keypoints are compared and rasterized.
    pub eval_size: (usize, usize),
    /// Mean keypoint error bound, in pixels at `eval_size`.
    pub max_mean_pixel_error: f64,
    /// Combined-Dice lower bound between predicted and target rasterizations.
    pub min_combined_dice: f64,
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        EarlyStopConfig {
            check_every: 10,
            eval_size: (256, 256),
            max_mean_pixel_error: 3.0,
            min_combined_dice: 0.90,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Root seed for shuffling and augmentation draws.
    pub seed: u64,
    pub adam: AdamConfig,
    pub augment: AugmentConfig,
    pub early_stop: Option<EarlyStopConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            seed: 0,
            adam: AdamConfig { learning_rate: 1e-3, ..AdamConfig::default() },
            augment: AugmentConfig::identity(),
            early_stop: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GcnError> {
        if self.epochs == 0 {
            return Err(GcnError::BadConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(GcnError::BadConfig("batch_size must be at least 1".into()));
        }
        self.adam.validate()?;
        self.augment.validate()?;
        if let Some(es) = &self.early_stop {
            if es.check_every == 0 {
                return Err(GcnError::BadConfig("early_stop.check_every must be at least 1".into()));
            }
            if es.eval_size.0 == 0 || es.eval_size.1 == 0 {
                return Err(GcnError::BadConfig("early_stop.eval_size must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Validation summary at a fixed evaluation resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValMetrics {
    /// Grand mean, over samples and keypoints, of the Euclidean prediction
    /// error in pixels at the evaluation size.
    pub mean_pixel_error: f64,
    /// Mean combined Dice between predicted and target rasterizations.
    pub combined_dice: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Outcome of a training run. When the early-stopping rule fires, the
/// stopping weights are kept (they satisfied the clinical bounds) and
/// `best_epoch` points at the stopping epoch; otherwise the weights with the
/// lowest validation loss are restored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    /// Metrics from the evaluation that triggered the early stop.
    pub early_stop_metrics: Option<ValMetrics>,
}

/// Splitmix-style finalizer: decorrelates consecutive inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Augmentation seed for a given sample at a given epoch: distinct per
/// (seed, epoch, index) triple, stable across runs.
pub fn augment_seed(seed: u64, epoch: u64, index: u64) -> u64 {
    mix(seed ^ mix(epoch ^ mix(index)))
}

fn shuffle_seed(seed: u64, epoch: u64) -> u64 {
    // Distinct stream from augment_seed for any (epoch, index).
    mix(seed ^ 0x5EED_0F_5AFF1E ^ mix(epoch))
}

/// Mean pixel error and combined Dice of the model over a sample set.
pub fn evaluate_model(
    model: &GcnModel<f32>,
    samples: &[TrainSample],
    eval_size: (usize, usize),
) -> Result<ValMetrics, GcnError> {
    if samples.is_empty() {
        return Err(GcnError::EmptyDataset("evaluation set"));
    }
    let (w, h) = (eval_size.0 as f64, eval_size.1 as f64);
    let mut err_sum = 0.0;
    let mut err_count = 0usize;
    let mut dice_sum = 0.0;
    for sample in samples {
        let pred = model.infer(&sample.image, sample.keypoints.spacing())?;
        let chains = [
            (pred.endo(), sample.keypoints.endo()),
            (pred.epi(), sample.keypoints.epi()),
            (pred.la(), sample.keypoints.la()),
        ];
        for (got, want) in chains {
            for (p, q) in got.iter().zip(want) {
                let (dx, dy) = ((p.x - q.x) * w, (p.y - q.y) * h);
                err_sum += (dx * dx + dy * dy).sqrt();
                err_count += 1;
            }
        }
        let mask_pred = rasterize_keypoints(&pred, eval_size.0, eval_size.1)?;
        let mask_true = rasterize_keypoints(&sample.keypoints, eval_size.0, eval_size.1)?;
        dice_sum += combined_dice(&mask_pred, &mask_true)
            .expect("rasterizations share dimensions by construction");
    }
    Ok(ValMetrics {
        mean_pixel_error: err_sum / err_count as f64,
        combined_dice: dice_sum / samples.len() as f64,
    })
}

/// Mean validation loss with the current weights; no augmentation.
fn validation_loss(model: &GcnModel<f32>, val: &[TrainSample]) -> Result<f64, GcnError> {
    let mut sum = 0.0;
    for sample in val {
        let (decoded, _) = model.forward(&sample.image)?;
        let (loss, _) = keypoint_loss(&decoded, &sample.keypoints)?;
        sum += loss.total as f64;
    }
    Ok(sum / val.len() as f64)
}

/// Trains the model in place and returns the per-epoch loss history.
pub fn train(
    model: &mut GcnModel<f32>,
    train_set: &[TrainSample],
    val_set: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<TrainReport, GcnError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(GcnError::EmptyDataset("training set"));
    }
    if val_set.is_empty() {
        return Err(GcnError::EmptyDataset("validation set"));
    }

    let shapes = model.param_shapes();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(|s| s.as_slice()).collect();
    let mut adam = Adam::new(cfg.adam, &shape_refs)?;

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best_epoch = 0usize;
    let mut best_val_loss = f64::INFINITY;
    let mut best_params = model.flat_params();
    let mut stopped_early = false;
    let mut early_stop_metrics = None;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed(cfg.seed, epoch as u64));
        order.shuffle(&mut rng);

        let mut train_loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad_acc: Vec<Tensor<f32>> =
                shapes.iter().map(|s| Tensor::zeros(s.clone())).collect();
            for &idx in batch {
                let sample = &train_set[idx];
                let (img, target) = augment(
                    &sample.image,
                    &sample.keypoints,
                    &cfg.augment,
                    augment_seed(cfg.seed, epoch as u64, idx as u64),
                )?;
                let (decoded, cache) = model.forward(&img)?;
                let (loss, out_grads) = keypoint_loss(&decoded, &target)?;
                train_loss_sum += loss.total as f64;
                let grads = model.backward(&cache, &out_grads)?;
                for (acc, g) in grad_acc.iter_mut().zip(&grads) {
                    acc.add_scaled(g, 1.0)?;
                }
            }
            let inv = 1.0 / batch.len() as f32;
            for acc in &mut grad_acc {
                acc.scale_in_place(inv);
            }
            let mut params = model.params_mut();
            adam.step(&mut params, &grad_acc)?;
        }

        let train_loss = train_loss_sum / train_set.len() as f64;
        let val_loss = validation_loss(model, val_set)?;
        records.push(EpochRecord { epoch, train_loss, val_loss });
        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            best_epoch = epoch;
            best_params = model.flat_params();
        }

        if let Some(es) = &cfg.early_stop {
            if (epoch + 1) % es.check_every == 0 {
                let metrics = evaluate_model(model, val_set, es.eval_size)?;
                let reached = metrics.mean_pixel_error <= es.max_mean_pixel_error
                    && metrics.combined_dice >= es.min_combined_dice;
                if reached {
                    stopped_early = true;
                    early_stop_metrics = Some(metrics);
                    best_epoch = epoch;
                    best_val_loss = val_loss;
                    break;
                }
            }
        }
    }

    if !stopped_early {
        model.set_flat_params(&best_params)?;
    }
    Ok(TrainReport { epochs: records, best_epoch, best_val_loss, stopped_early, early_stop_metrics })
}
