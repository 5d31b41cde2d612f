//! Inter-model agreement gate: classify frames by the Dice similarity of two
//! independent segmentation sources, histogram the scores, and draw
//! seed-deterministic evaluation samples from the disagreement tails.
//!
//! The gate is model-agnostic: any two mask sources can be compared. Frames
//! whose inter-model Dice falls below the filter threshold are dropped from
//! downstream clinical measurements (see the exam-level EF pipeline).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgreementError {
    #[error(
        "agreement thresholds must satisfy 0 <= low <= filter <= high <= 1 \
         (got low {low}, filter {filter}, high {high})"
    )]
    BadThresholds { low: f64, filter: f64, high: f64 },
    #[error("inter-model Dice {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("histogram bin width must lie in (0, 1], got {0}")]
    BadBinWidth(f64),
    #[error("not enough {class:?} records: requested {requested}, available {available}")]
    InsufficientRecords { class: AgreementClass, requested: usize, available: usize },
}

/// Gate thresholds. Boundary semantics are inclusive-outer: a score equal to
/// `low_threshold` classifies Low, equal to `high_threshold` classifies High.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgreementConfig {
    pub low_threshold: f64,
    pub high_threshold: f64,
    /// Frames below this score are dropped by the clinical quality gate.
    pub filter_threshold: f64,
}

impl Default for AgreementConfig {
    fn default() -> Self {
        AgreementConfig { low_threshold: 0.8, high_threshold: 0.9, filter_threshold: 0.85 }
    }
}

impl AgreementConfig {
    pub fn validate(&self) -> Result<(), AgreementError> {
        let ordered = 0.0 <= self.low_threshold
            && self.low_threshold <= self.filter_threshold
            && self.filter_threshold <= self.high_threshold
            && self.high_threshold <= 1.0;
        if ordered {
            Ok(())
        } else {
            Err(AgreementError::BadThresholds {
                low: self.low_threshold,
                filter: self.filter_threshold,
                high: self.high_threshold,
            })
        }
    }
}

/// Agreement class of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgreementClass {
    Low,
    Mid,
    High,
}

/// Classifies an inter-model Dice score against the thresholds.
pub fn classify(dice: f64, cfg: &AgreementConfig) -> Result<AgreementClass, AgreementError> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&dice) {
        return Err(AgreementError::OutOfRange(dice));
    }
    Ok(if dice <= cfg.low_threshold {
        AgreementClass::Low
    } else if dice >= cfg.high_threshold {
        AgreementClass::High
    } else {
        AgreementClass::Mid
    })
}

/// Per-frame agreement verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRecord {
    pub frame: String,
    pub inter_model_dice: f64,
    pub class: AgreementClass,
    /// Whether the quality gate keeps this frame (dice ≥ filter threshold).
    pub retained: bool,
}

/// Builds the record for one frame: class plus the retention flag.
pub fn record(
    frame: impl Into<String>,
    dice: f64,
    cfg: &AgreementConfig,
) -> Result<AgreementRecord, AgreementError> {
    let class = classify(dice, cfg)?;
    Ok(AgreementRecord {
        frame: frame.into(),
        inter_model_dice: dice,
        class,
        retained: dice >= cfg.filter_threshold,
    })
}

/// Histogram of Dice scores over [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// `counts[i]` covers `[i·bin_width, (i+1)·bin_width)`; the last bin is
    /// closed so a score of exactly 1 is counted.
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Lower edge of bin `i`.
    pub fn lower_edge(&self, i: usize) -> f64 {
        i as f64 * self.bin_width
    }
}

/// Bins Dice scores; mass is conserved (total = input length).
pub fn histogram(dices: &[f64], bin_width: f64) -> Result<Histogram, AgreementError> {
    if !(bin_width.is_finite() && 0.0 < bin_width && bin_width <= 1.0) {
        return Err(AgreementError::BadBinWidth(bin_width));
    }
    let bins = (1.0 / bin_width).ceil() as usize;
    let mut counts = vec![0usize; bins];
    for &d in dices {
        if !(0.0..=1.0).contains(&d) {
            return Err(AgreementError::OutOfRange(d));
        }
        let i = ((d / bin_width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram { bin_width, counts })
}

/// Draws a seed-deterministic evaluation sample: `k_low` records from the
/// Low class and `k_high` from the High class, shuffled together.
pub fn partition_sample(
    records: &[AgreementRecord],
    k_low: usize,
    k_high: usize,
    seed: u64,
) -> Result<Vec<AgreementRecord>, AgreementError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut side = |class: AgreementClass, k: usize| {
        let mut pool: Vec<&AgreementRecord> =
            records.iter().filter(|r| r.class == class).collect();
        if pool.len() < k {
            return Err(AgreementError::InsufficientRecords {
                class,
                requested: k,
                available: pool.len(),
            });
        }
        pool.shuffle(&mut rng);
        pool.truncate(k);
        Ok(pool)
    };
    let mut sample = side(AgreementClass::Low, k_low)?;
    sample.extend(side(AgreementClass::High, k_high)?);
    let mut sample: Vec<AgreementRecord> = sample.into_iter().cloned().collect();
    sample.shuffle(&mut rng);
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records_with_dices(dices: &[f64]) -> Vec<AgreementRecord> {
        let cfg = AgreementConfig::default();
        dices
            .iter()
            .enumerate()
            .map(|(i, &d)| record(format!("frame-{i:04}"), d, &cfg).unwrap())
            .collect()
    }

    #[test]
    fn classification_boundaries_are_inclusive_outer() {
        let cfg = AgreementConfig::default();
        assert_eq!(classify(0.75, &cfg).unwrap(), AgreementClass::Low);
        assert_eq!(classify(0.80, &cfg).unwrap(), AgreementClass::Low);
        assert_eq!(classify(0.85, &cfg).unwrap(), AgreementClass::Mid);
        assert_eq!(classify(0.90, &cfg).unwrap(), AgreementClass::High);
        assert_eq!(classify(0.95, &cfg).unwrap(), AgreementClass::High);
        assert!(matches!(classify(1.2, &cfg), Err(AgreementError::OutOfRange(_))));
        assert!(matches!(classify(-0.1, &cfg), Err(AgreementError::OutOfRange(_))));
    }

    #[test]
    fn classification_is_monotone_in_dice() {
        let cfg = AgreementConfig::default();
        let mut prev = AgreementClass::Low;
        for i in 0..=1000 {
            let class = classify(i as f64 / 1000.0, &cfg).unwrap();
            assert!(class >= prev, "class regressed at dice {}", i as f64 / 1000.0);
            prev = class;
        }
    }

    #[test]
    fn bad_thresholds_are_rejected() {
        let swapped = AgreementConfig {
            low_threshold: 0.9,
            high_threshold: 0.8,
            filter_threshold: 0.85,
        };
        assert!(swapped.validate().is_err());
        let outside = AgreementConfig { filter_threshold: 0.95, ..AgreementConfig::default() };
        assert!(outside.validate().is_err());
        assert!(AgreementConfig::default().validate().is_ok());
    }

    #[test]
    fn retention_matches_the_filter_threshold() {
        let cfg = AgreementConfig::default();
        assert!(record("f", 0.85, &cfg).unwrap().retained);
        assert!(record("f", 0.92, &cfg).unwrap().retained);
        assert!(!record("f", 0.8499, &cfg).unwrap().retained);
    }

    #[test]
    fn histogram_conserves_mass() {
        let empty = histogram(&[], 0.01).unwrap();
        assert_eq!(empty.counts.len(), 100);
        assert_eq!(empty.total(), 0);

        let uniform = vec![0.9; 100];
        let h = histogram(&uniform, 0.01).unwrap();
        assert_eq!(h.total(), 100);
        assert_eq!(h.counts[90], 100);

        // Pseudo-random values plus both endpoints; total must match.
        let mut values = vec![0.0, 1.0];
        let mut x = 0.37_f64;
        for _ in 0..500 {
            x = (x * 997.0 + 0.1234).fract();
            values.push(x);
        }
        let h = histogram(&values, 0.01).unwrap();
        assert_eq!(h.total(), values.len());
        assert!(h.counts[99] >= 1, "exact 1.0 lands in the closed last bin");
        assert!(matches!(histogram(&[1.5], 0.01), Err(AgreementError::OutOfRange(_))));
        assert!(matches!(histogram(&[0.5], 0.0), Err(AgreementError::BadBinWidth(_))));
    }

    #[test]
    fn partition_draws_the_requested_composition() {
        // 150 Low, 20 Mid, 150 High.
        let mut dices = Vec::new();
        dices.extend((0..150).map(|i| 0.5 + 0.001 * i as f64)); // ≤ 0.8 → Low
        dices.extend((0..20).map(|i| 0.85 + 0.001 * i as f64)); // Mid
        dices.extend((0..150).map(|i| 0.95 + 0.0001 * i as f64)); // High
        let records = records_with_dices(&dices);

        let sample = partition_sample(&records, 100, 100, 7).unwrap();
        assert_eq!(sample.len(), 200);
        let lows = sample.iter().filter(|r| r.class == AgreementClass::Low).count();
        let highs = sample.iter().filter(|r| r.class == AgreementClass::High).count();
        assert_eq!((lows, highs), (100, 100));
        // No Mid records, no duplicates.
        let mut frames: Vec<&str> = sample.iter().map(|r| r.frame.as_str()).collect();
        frames.sort_unstable();
        frames.dedup();
        assert_eq!(frames.len(), 200);
    }

    #[test]
    fn partition_is_seed_deterministic() {
        let dices: Vec<f64> =
            (0..300).map(|i| if i % 2 == 0 { 0.7 } else { 0.95 }).collect();
        let records = records_with_dices(&dices);
        let a = partition_sample(&records, 50, 50, 42).unwrap();
        let b = partition_sample(&records, 50, 50, 42).unwrap();
        assert_eq!(a, b);
        let c = partition_sample(&records, 50, 50, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn deficits_are_reported() {
        let records = records_with_dices(&[0.7; 50]);
        match partition_sample(&records, 100, 0, 0) {
            Err(AgreementError::InsufficientRecords {
                class: AgreementClass::Low,
                requested: 100,
                available: 50,
            }) => {}
            other => panic!("expected InsufficientRecords, got {other:?}"),
        }
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = AgreementConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: AgreementConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        let partial: AgreementConfig = serde_json::from_str(r#"{"low_threshold": 0.7}"#).unwrap();
        assert_eq!(partial.low_threshold, 0.7);
        assert_eq!(partial.high_threshold, 0.9);
        assert!(serde_json::from_str::<AgreementConfig>(r#"{"lo": 0.7}"#).is_err());
    }
}
