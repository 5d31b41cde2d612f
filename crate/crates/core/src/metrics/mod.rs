//! Segmentation metrics and evaluation statistics.
//!
//! Conventions:
//! - Dice over a label set: pixels whose code is in the set form the region.
//!   Two empty regions have Dice 1 (agreement on absence is agreement).
//! - Combined Dice is the mean of the endocardial region Dice ({LV}) and the
//!   epicardial region Dice ({LV, MYO}).
//! - Inter-model Dice is the unweighted mean of the three per-structure
//!   Dices; a foreground-union variant is also available.
//! - Hausdorff distances are computed between traced boundary contours and
//!   reported in millimetres (pixel coordinates scaled by the spacing).

use serde::Serialize;

use crate::imaging::{trace_region, Label, LabelMask, PixelSpacing};

pub mod stats;

pub use stats::{
    bland_altman, mae, wilcoxon_signed_rank, wilcoxon_signed_rank_with, BlandAltman, MaeSummary,
    StatsError, WilcoxonMethod, WilcoxonResult,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("cannot compute a boundary distance for an empty {0} region")]
    EmptyContour(&'static str),
}

fn check_dims(a: &LabelMask, b: &LabelMask) -> Result<(), MetricsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::DimensionMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

/// Dice coefficient of the region formed by the given labels.
pub fn dice(a: &LabelMask, b: &LabelMask, region: &[Label]) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let member = |code: u8| region.iter().any(|l| l.code() == code);
    let mut inter = 0usize;
    let mut size_a = 0usize;
    let mut size_b = 0usize;
    for (&ca, &cb) in a.data().iter().zip(b.data()) {
        let (ia, ib) = (member(ca), member(cb));
        size_a += ia as usize;
        size_b += ib as usize;
        inter += (ia && ib) as usize;
    }
    if size_a + size_b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (size_a + size_b) as f64)
}

/// Mean of the endocardial-region Dice ({LV}) and the epicardial-region Dice
/// ({LV, MYO}).
pub fn combined_dice(a: &LabelMask, b: &LabelMask) -> Result<f64, MetricsError> {
    let endo = dice(a, b, &[Label::Lv])?;
    let epi = dice(a, b, &[Label::Lv, Label::Myo])?;
    Ok(0.5 * (endo + epi))
}

/// Unweighted mean of the per-structure Dices over {LV, MYO, LA}.
pub fn inter_model_dice(a: &LabelMask, b: &LabelMask) -> Result<f64, MetricsError> {
    let mut sum = 0.0;
    for label in Label::STRUCTURES {
        sum += dice(a, b, &[label])?;
    }
    Ok(sum / Label::STRUCTURES.len() as f64)
}

/// Dice of the union of all three structures against background.
pub fn foreground_union_dice(a: &LabelMask, b: &LabelMask) -> Result<f64, MetricsError> {
    dice(a, b, &Label::STRUCTURES)
}

fn scaled(contour: &[(usize, usize)], spacing: PixelSpacing) -> Vec<(f64, f64)> {
    contour.iter().map(|&(x, y)| (x as f64 * spacing.sx, y as f64 * spacing.sy)).collect()
}

/// Directed Hausdorff with the early-break scan: a point of `a` whose
/// distance to some point of `b` is already below the running maximum cannot
/// raise it, so the inner loop stops there.
fn directed_hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut cmax = 0.0f64;
    for &(px, py) in a {
        let mut cmin = f64::INFINITY;
        for &(qx, qy) in b {
            let d = ((px - qx).powi(2) + (py - qy).powi(2)).sqrt();
            if d < cmax {
                cmin = d;
                break;
            }
            if d < cmin {
                cmin = d;
            }
        }
        if cmin > cmax {
            cmax = cmin;
        }
    }
    cmax
}

/// Symmetric Hausdorff distance between two pixel contours, in millimetres.
pub fn hausdorff(
    a: &[(usize, usize)],
    b: &[(usize, usize)],
    spacing: PixelSpacing,
) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyContour("contour"));
    }
    let (sa, sb) = (scaled(a, spacing), scaled(b, spacing));
    Ok(directed_hausdorff(&sa, &sb).max(directed_hausdorff(&sb, &sa)))
}

/// Full per-sample comparison of a predicted mask against a reference.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricReport {
    pub dice_lv: f64,
    pub dice_myo: f64,
    pub dice_la: f64,
    pub combined_dice: f64,
    pub hausdorff_endo_mm: f64,
    pub hausdorff_epi_mm: f64,
    pub hausdorff_combined_mm: f64,
    pub inter_model_dice: f64,
}

/// Compare `pred` against `reference` (same spacing assumed for both masks).
pub fn metric_report(
    pred: &LabelMask,
    reference: &LabelMask,
    spacing: PixelSpacing,
) -> Result<MetricReport, MetricsError> {
    check_dims(pred, reference)?;
    let boundary = |mask: &LabelMask, epi: bool, name: &'static str| {
        trace_region(mask.width(), mask.height(), |x, y| {
            let v = mask.get(x, y);
            v == Label::Lv.code() || (epi && v == Label::Myo.code())
        })
        .ok_or(MetricsError::EmptyContour(name))
    };
    let h_endo = hausdorff(
        &boundary(pred, false, "endocardium")?,
        &boundary(reference, false, "endocardium")?,
        spacing,
    )?;
    let h_epi = hausdorff(
        &boundary(pred, true, "epicardium")?,
        &boundary(reference, true, "epicardium")?,
        spacing,
    )?;
    Ok(MetricReport {
        dice_lv: dice(pred, reference, &[Label::Lv])?,
        dice_myo: dice(pred, reference, &[Label::Myo])?,
        dice_la: dice(pred, reference, &[Label::La])?,
        combined_dice: combined_dice(pred, reference)?,
        hausdorff_endo_mm: h_endo,
        hausdorff_epi_mm: h_epi,
        hausdorff_combined_mm: 0.5 * (h_endo + h_epi),
        inter_model_dice: inter_model_dice(pred, reference)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn strip(width: usize, segments: &[(usize, usize, Label)]) -> LabelMask {
        let mut mask = LabelMask::filled(width, 1, Label::Background);
        for &(lo, hi, label) in segments {
            for x in lo..hi {
                mask.set(x, 0, label);
            }
        }
        mask
    }

    fn random_mask(seed: u64, w: usize, h: usize) -> LabelMask {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h).map(|_| rng.random_range(0..4u8)).collect();
        LabelMask::new(w, h, data).unwrap()
    }

    #[test]
    fn dice_identical_disjoint_and_overlap() {
        let a = strip(40, &[(0, 10, Label::Lv)]);
        assert_eq!(dice(&a, &a, &[Label::Lv]).unwrap(), 1.0);
        let b = strip(40, &[(20, 30, Label::Lv)]);
        assert_eq!(dice(&a, &b, &[Label::Lv]).unwrap(), 0.0);

        // Two 4x4 squares overlapping in a 2x4 strip: 2·8/(16+16) = 0.5.
        let mut sq1 = LabelMask::filled(8, 4, Label::Background);
        let mut sq2 = sq1.clone();
        for y in 0..4 {
            for x in 0..4 {
                sq1.set(x, y, Label::Lv);
                sq2.set(x + 2, y, Label::Lv);
            }
        }
        assert_eq!(dice(&sq1, &sq2, &[Label::Lv]).unwrap(), 0.5);
        // Symmetry.
        assert_eq!(
            dice(&sq1, &sq2, &[Label::Lv]).unwrap(),
            dice(&sq2, &sq1, &[Label::Lv]).unwrap()
        );
    }

    #[test]
    fn dice_of_two_empty_regions_is_one() {
        let a = strip(10, &[(0, 3, Label::Lv)]);
        let b = strip(10, &[(5, 8, Label::Lv)]);
        assert_eq!(dice(&a, &b, &[Label::La]).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = strip(10, &[]);
        let b = strip(11, &[]);
        assert!(matches!(dice(&a, &b, &[Label::Lv]), Err(MetricsError::DimensionMismatch(..))));
    }

    #[test]
    fn combined_dice_hand_example() {
        // dice({LV}) = 2·9/(10+10) = 0.9 and dice({LV,MYO}) = 2·19/40 = 0.95.
        let a = strip(40, &[(0, 10, Label::Lv), (10, 20, Label::Myo)]);
        let b = strip(40, &[(1, 11, Label::Lv), (11, 21, Label::Myo)]);
        assert!((dice(&a, &b, &[Label::Lv]).unwrap() - 0.9).abs() < 1e-12);
        assert!((dice(&a, &b, &[Label::Lv, Label::Myo]).unwrap() - 0.95).abs() < 1e-12);
        assert!((combined_dice(&a, &b).unwrap() - 0.925).abs() < 1e-12);
    }

    #[test]
    fn combined_dice_matches_brute_force_on_random_masks() {
        let a = random_mask(11, 16, 16);
        let b = random_mask(12, 16, 16);
        let expected = 0.5
            * (dice(&a, &b, &[Label::Lv]).unwrap()
                + dice(&a, &b, &[Label::Lv, Label::Myo]).unwrap());
        assert_eq!(combined_dice(&a, &b).unwrap(), expected);
    }

    #[test]
    fn inter_model_dice_missing_structure() {
        let a = strip(30, &[(0, 10, Label::Lv), (10, 15, Label::Myo), (15, 25, Label::La)]);
        let mut b = a.clone();
        for x in 15..25 {
            b.set(x, 0, Label::Background);
        }
        let d = inter_model_dice(&a, &b).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-12, "{d}");
        assert_eq!(inter_model_dice(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn inter_model_dice_matches_mean_of_structure_dices() {
        let a = random_mask(3, 12, 12);
        let b = random_mask(4, 12, 12);
        let mean = Label::STRUCTURES
            .iter()
            .map(|&l| dice(&a, &b, &[l]).unwrap())
            .sum::<f64>()
            / 3.0;
        assert!((inter_model_dice(&a, &b).unwrap() - mean).abs() < 1e-15);
    }

    #[test]
    fn foreground_union_variant_differs_when_labels_swap() {
        // Swapping LV and MYO leaves the union unchanged but not the mean.
        let a = strip(20, &[(0, 5, Label::Lv), (5, 10, Label::Myo)]);
        let b = strip(20, &[(0, 5, Label::Myo), (5, 10, Label::Lv)]);
        assert_eq!(foreground_union_dice(&a, &b).unwrap(), 1.0);
        assert!(inter_model_dice(&a, &b).unwrap() < 1.0);
    }

    #[test]
    fn hausdorff_identity_and_single_points() {
        let sp = PixelSpacing::isotropic(0.5).unwrap();
        let c: Vec<(usize, usize)> = vec![(1, 1), (4, 5), (9, 2)];
        assert_eq!(hausdorff(&c, &c, sp).unwrap(), 0.0);
        // Two single points 3 px apart at 0.5 mm/px.
        assert!((hausdorff(&[(0, 0)], &[(3, 0)], sp).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn hausdorff_matches_brute_force_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let sp = PixelSpacing::new(0.4, 0.7).unwrap();
        for _ in 0..20 {
            let gen = |rng: &mut ChaCha8Rng| -> Vec<(usize, usize)> {
                (0..20).map(|_| (rng.random_range(0..50), rng.random_range(0..50))).collect()
            };
            let (a, b) = (gen(&mut rng), gen(&mut rng));
            let brute = |p: &[(usize, usize)], q: &[(usize, usize)]| -> f64 {
                p.iter()
                    .map(|&(px, py)| {
                        q.iter()
                            .map(|&(qx, qy)| {
                                let dx = (px as f64 - qx as f64) * sp.sx;
                                let dy = (py as f64 - qy as f64) * sp.sy;
                                (dx * dx + dy * dy).sqrt()
                            })
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(0.0, f64::max)
            };
            let expected = brute(&a, &b).max(brute(&b, &a));
            let got = hausdorff(&a, &b, sp).unwrap();
            assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
            let sym = hausdorff(&b, &a, sp).unwrap();
            assert_eq!(got, sym);
        }
    }

    #[test]
    fn hausdorff_empty_contour_is_an_error() {
        let sp = PixelSpacing::isotropic(1.0).unwrap();
        assert!(matches!(hausdorff(&[], &[(0, 0)], sp), Err(MetricsError::EmptyContour(_))));
    }
}
