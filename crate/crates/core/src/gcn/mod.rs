//! Contour decoder: a CNN image encoder feeding a graph-convolutional
//! decoder that predicts the keypoint rings directly.
//!
//! The decoder reshapes the image embedding onto two circular rings of slot
//! embeddings (see [`RingTopology`]), refines them with a stack of
//! [`RingConv`] layers, and reads out either
//!
//! - **coordinate head**: `(x, y)` per slot on both rings, or
//! - **displacement head**: `(x, y)` per inner-ring slot plus a strictly
//!   positive epicardial displacement per endocardial slot; the epicardial
//!   ring is materialized as `endo + d·n̂` along the outward endocardial
//!   normals, which makes an endo/epi ring crossing impossible by
//!   construction.
//!
//! Heads are residual on a fixed canonical-anatomy template: the network
//! predicts offsets from a plausible contour rather than absolute positions,
//! so freshly initialized models already produce anatomically ordered rings.

mod loss;
mod model;
mod ring_conv;
mod topology;
mod train;

pub use loss::{keypoint_loss, KeypointGrads, LossBreakdown};
pub use model::{
    load_model, materialize_epi, materialize_epi_backward, save_model, DecodedKeypoints,
    GcnCache, GcnModel, MaterializeCache, MODEL_FORMAT_VERSION,
};
pub use ring_conv::{RingConv, RingConvCache, RingConvGrads};
pub use topology::{InnerSlot, OuterSlot, RingTopology, TOPOLOGY_VERSION};
pub use train::{
    augment_seed, evaluate_model, train, EarlyStopConfig, EpochRecord, TrainConfig, TrainReport,
    TrainSample, ValMetrics,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::ImagingError;
use crate::keypoints::KeypointError;
use crate::nn::{NnError, WeightsError};
use crate::phantom::PhantomError;

#[derive(Debug, Error)]
pub enum GcnError {
    #[error("invalid decoder config: {0}")]
    BadConfig(String),
    #[error("{array} has {got} entries, expected {expected}")]
    LayoutMismatch { array: &'static str, expected: usize, got: usize },
    #[error("{0} dataset is empty")]
    EmptyDataset(&'static str),
    #[error("zero-length endocardial tangent at index {index}")]
    ZeroTangent { index: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Keypoint(#[from] KeypointError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Phantom(#[from] PhantomError),
    #[error("model file config: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which quantities the final ring layer predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Two channels per slot: `(x, y)` for both rings.
    Coordinate,
    /// Three channels per slot: `(x, y)` plus a displacement channel that is
    /// read at the endocardial slots only; the epicardium is materialized
    /// from it. The outer-ring head outputs are unused in this mode (their
    /// weights receive zero gradient).
    Displacement,
}

impl HeadKind {
    /// Output channels per slot produced by the head.
    pub fn out_channels(self) -> usize {
        match self {
            HeadKind::Coordinate => 2,
            HeadKind::Displacement => 3,
        }
    }
}

/// Architecture of the ring decoder.
///
/// `channels = Some([c1, …, ck])` builds a projection to `c1` channels per
/// slot followed by `k` ring layers `c1→c2 → … → ck→out` (ReLU between,
/// linear head). `channels = None` is the direct-regression variant: a
/// single dense layer maps the embedding straight to the per-slot outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderConfig {
    pub channels: Option<Vec<usize>>,
    /// Same-ring window width `w`; `None` means the full ring.
    pub primary_window: Option<usize>,
    /// Other-ring window width `v` (odd).
    pub secondary_window: usize,
    pub head: HeadKind,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            channels: Some(vec![8, 4]),
            primary_window: None,
            secondary_window: 1,
            head: HeadKind::Displacement,
        }
    }
}

impl DecoderConfig {
    /// Resolve the same-ring window for a concrete ring size.
    pub fn window_for(&self, ring_size: usize) -> usize {
        self.primary_window.unwrap_or(ring_size)
    }

    pub fn validate(&self, ring_size: usize) -> Result<(), GcnError> {
        if let Some(channels) = &self.channels {
            if channels.is_empty() {
                return Err(GcnError::BadConfig(
                    "channels must be nonempty; use None for the direct dense head".into(),
                ));
            }
            if channels.iter().any(|&c| c == 0) {
                return Err(GcnError::BadConfig("channel widths must be >= 1".into()));
            }
        }
        let w = self.window_for(ring_size);
        if w == 0 || w > ring_size {
            return Err(GcnError::BadConfig(format!(
                "primary window {w} must be in 1..={ring_size}"
            )));
        }
        let v = self.secondary_window;
        if v == 0 || v % 2 == 0 {
            return Err(GcnError::BadConfig(format!(
                "secondary window must be odd >= 1, got {v}"
            )));
        }
        Ok(())
    }

    /// The four decoder sizes compared in the architecture ablation, largest
    /// to smallest: three GCN stacks and the direct dense regression.
    pub fn ablation_variants() -> [DecoderConfig; 4] {
        let gcn = |channels: Vec<usize>, v: usize| DecoderConfig {
            channels: Some(channels),
            primary_window: None,
            secondary_window: v,
            head: HeadKind::Coordinate,
        };
        [
            gcn(vec![48, 32, 32, 16, 16, 8, 8, 4], 11),
            gcn(vec![32, 16, 8, 4], 5),
            gcn(vec![8, 4], 1),
            DecoderConfig {
                channels: None,
                primary_window: None,
                secondary_window: 1,
                head: HeadKind::Coordinate,
            },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_the_small_displacement_gcn() {
        let cfg = DecoderConfig::default();
        assert_eq!(cfg.channels.as_deref(), Some(&[8, 4][..]));
        assert_eq!(cfg.window_for(64), 64);
        assert_eq!(cfg.secondary_window, 1);
        assert_eq!(cfg.head, HeadKind::Displacement);
        cfg.validate(64).unwrap();
    }

    #[test]
    fn validation_rejects_bad_windows_and_channels() {
        let mut cfg = DecoderConfig::default();
        cfg.secondary_window = 2;
        assert!(cfg.validate(64).is_err());
        cfg.secondary_window = 1;
        cfg.primary_window = Some(65);
        assert!(cfg.validate(64).is_err());
        cfg.primary_window = None;
        cfg.channels = Some(vec![]);
        assert!(cfg.validate(64).is_err());
        cfg.channels = None;
        cfg.validate(64).unwrap();
    }

    #[test]
    fn ablation_variants_cover_the_four_sizes() {
        let variants = DecoderConfig::ablation_variants();
        assert_eq!(variants[0].channels.as_ref().unwrap().len(), 8);
        assert_eq!(variants[0].secondary_window, 11);
        assert_eq!(variants[1].channels.as_deref(), Some(&[32, 16, 8, 4][..]));
        assert_eq!(variants[2].channels.as_deref(), Some(&[8, 4][..]));
        assert_eq!(variants[3].channels, None);
        for v in &variants {
            v.validate(64).unwrap();
        }
    }

    #[test]
    fn config_json_round_trips() {
        let cfg = DecoderConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        let back: DecoderConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(cfg, back);
        // Partial JSON fills defaults; unknown keys are rejected.
        let partial: DecoderConfig = serde_json::from_str("{\"channels\": null}").unwrap();
        assert_eq!(partial.channels, None);
        assert!(serde_json::from_str::<DecoderConfig>("{\"chanels\": null}").is_err());
    }
}
