//! Clinical measurements from contour keypoints: LV long axis, method-of-disks
//! biplane volume (modified Simpson), ejection fraction, per-cycle exam
//! averaging with the usability rule and agreement filtering, and two-reading
//! ensemble EF.
//!
//! All geometry is converted to millimeter space first: a normalized keypoint
//! (u, v) in a frame of `width`×`height` pixels with spacing (sx, sy) mm/px
//! sits at (u·width·sx, v·height·sy) mm. Volumes are reported in milliliters
//! (1 ml = 1000 mm³).

use crate::geom::{line_polygon_crossings, Point};
use crate::imaging::{LabelMask, PixelSpacing};
use crate::keypoints::{extract_keypoints, KeypointSet, SamplingConfig};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Guideline-standard number of Simpson disks.
pub const DEFAULT_DISKS: usize = 20;

#[derive(Debug, Error)]
pub enum ClinicalError {
    /// Apex and base midpoint coincide; no axis direction exists.
    #[error("degenerate long axis: apex and base midpoint coincide")]
    DegenerateAxis,
    #[error("disk count must be at least 1")]
    ZeroDisks,
    /// Every disk chord missed the cavity polygon.
    #[error("no disk chord intersects the cavity")]
    EmptyChord,
    #[error("views disagree on disk count: a4c has {a4c}, a2c has {a2c}")]
    DiskCountMismatch { a4c: usize, a2c: usize },
    #[error("disk stack length must be positive and finite, got {0} mm")]
    BadLength(f64),
    #[error("disk diameter {index} must be non-negative and finite, got {value} mm")]
    BadDiameter { index: usize, value: f64 },
    #[error("end-diastolic volume must be positive, got {0} ml")]
    NonPositiveEdv(f64),
    /// Unfiltered exams must produce at least one cycle volume pair.
    #[error("no cycle has usable ED and ES frames in both views")]
    NoUsableCycle,
    #[error("bad exam manifest: {0}")]
    BadManifest(String),
}

/// Frame geometry for converting normalized keypoint coordinates to
/// millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub width: usize,
    pub height: usize,
    pub spacing: PixelSpacing,
}

impl FrameGeometry {
    pub fn new(width: usize, height: usize, spacing: PixelSpacing) -> Self {
        FrameGeometry { width, height, spacing }
    }

    /// Physical position of a normalized point, in mm.
    pub fn to_mm(&self, p: Point) -> Point {
        Point::new(
            p.x * self.width as f64 * self.spacing.sx,
            p.y * self.height as f64 * self.spacing.sy,
        )
    }
}

/// The LV long axis in millimeter space, from the base midpoint toward the
/// apex landmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LvAxis {
    /// Apex landmark E, mm.
    pub apex: Point,
    /// Midpoint of the annulus landmarks A and B, mm.
    pub base_mid: Point,
    /// Unit direction from `base_mid` toward `apex`.
    pub direction: Point,
    pub length_mm: f64,
}

/// LV long axis of a keypoint segmentation.
pub fn lv_axis(kps: &KeypointSet, frame: FrameGeometry) -> Result<LvAxis, ClinicalError> {
    let apex = frame.to_mm(kps.point_e());
    let base_mid = frame.to_mm(kps.point_a().add(kps.point_b()).scale(0.5));
    let offset = apex.sub(base_mid);
    let direction = offset.normalized(1e-9).ok_or(ClinicalError::DegenerateAxis)?;
    Ok(LvAxis { apex, base_mid, direction, length_mm: offset.norm() })
}

/// Cavity disk diameters: at fractional heights (i + 0.5)/n along the axis
/// from the base midpoint toward the apex, the total chord length of the
/// endocardial polygon perpendicular to the axis, in mm. A slab that misses
/// the cavity contributes diameter 0; if every slab misses, the measurement
/// is meaningless and errors.
pub fn disk_diameters(
    kps: &KeypointSet,
    axis: &LvAxis,
    n: usize,
    frame: FrameGeometry,
) -> Result<Vec<f64>, ClinicalError> {
    if n == 0 {
        return Err(ClinicalError::ZeroDisks);
    }
    let poly: Vec<Point> = kps.endo().iter().map(|&p| frame.to_mm(p)).collect();
    let perp = axis.direction.perp();
    let mut diameters = Vec::with_capacity(n);
    let mut any = false;
    for i in 0..n {
        let h = (i as f64 + 0.5) / n as f64 * axis.length_mm;
        let center = axis.base_mid.add(axis.direction.scale(h));
        let crossings = line_polygon_crossings(center, perp, &poly);
        let width: f64 = crossings.chunks_exact(2).map(|pair| pair[1] - pair[0]).sum();
        any = any || width > 0.0;
        diameters.push(width);
    }
    if !any {
        return Err(ClinicalError::EmptyChord);
    }
    Ok(diameters)
}

/// One view's contribution to the biplane volume: the axis length and the
/// disk diameters, mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDisks {
    pub length_mm: f64,
    pub diameters_mm: Vec<f64>,
}

impl ViewDisks {
    /// Measures a keypoint segmentation: axis plus `n` disk diameters.
    pub fn from_keypoints(
        kps: &KeypointSet,
        frame: FrameGeometry,
        n: usize,
    ) -> Result<ViewDisks, ClinicalError> {
        let axis = lv_axis(kps, frame)?;
        let diameters_mm = disk_diameters(kps, &axis, n, frame)?;
        Ok(ViewDisks { length_mm: axis.length_mm, diameters_mm })
    }
}

/// A biplane Simpson volume with the measurements behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeResult {
    pub volume_ml: f64,
    pub length_a4c_mm: f64,
    pub length_a2c_mm: f64,
    /// A4C disk diameters aᵢ, mm.
    pub disks_a4c_mm: Vec<f64>,
    /// A2C disk diameters bᵢ, mm.
    pub disks_a2c_mm: Vec<f64>,
}

/// Modified Simpson biplane volume: V = (π/4)·(L/N)·Σ aᵢ·bᵢ with
/// L = max(L_a4c, L_a2c), converted from mm³ to ml.
pub fn simpson_biplane(a4c: &ViewDisks, a2c: &ViewDisks) -> Result<VolumeResult, ClinicalError> {
    if a4c.diameters_mm.len() != a2c.diameters_mm.len() {
        return Err(ClinicalError::DiskCountMismatch {
            a4c: a4c.diameters_mm.len(),
            a2c: a2c.diameters_mm.len(),
        });
    }
    let n = a4c.diameters_mm.len();
    if n == 0 {
        return Err(ClinicalError::ZeroDisks);
    }
    let length = a4c.length_mm.max(a2c.length_mm);
    if !(length.is_finite() && length > 0.0) {
        return Err(ClinicalError::BadLength(length));
    }
    for (index, &value) in a4c.diameters_mm.iter().chain(&a2c.diameters_mm).enumerate() {
        if !(value.is_finite() && value >= 0.0) {
            return Err(ClinicalError::BadDiameter { index: index % n, value });
        }
    }
    let cross_sum: f64 = a4c
        .diameters_mm
        .iter()
        .zip(&a2c.diameters_mm)
        .map(|(a, b)| a * b)
        .sum();
    let volume_mm3 = PI / 4.0 * (length / n as f64) * cross_sum;
    Ok(VolumeResult {
        volume_ml: volume_mm3 / 1000.0,
        length_a4c_mm: a4c.length_mm,
        length_a2c_mm: a2c.length_mm,
        disks_a4c_mm: a4c.diameters_mm.clone(),
        disks_a2c_mm: a2c.diameters_mm.clone(),
    })
}

/// Ejection fraction (EDV − ESV)/EDV, as a fraction.
pub fn ejection_fraction(edv_ml: f64, esv_ml: f64) -> Result<f64, ClinicalError> {
    if !(edv_ml.is_finite() && edv_ml > 0.0) {
        return Err(ClinicalError::NonPositiveEdv(edv_ml));
    }
    Ok((edv_ml - esv_ml) / edv_ml)
}

/// Mean of two independent EF readings of the same exam.
pub fn ensemble_ef(ef_a: f64, ef_b: f64) -> f64 {
    0.5 * (ef_a + ef_b)
}

/// Usability rule for mask segmentations: a frame is usable when contour
/// keypoints — and with them the apex landmark the axis needs — can be
/// extracted from it. Keypoint segmentations are always usable: the
/// representation carries its landmarks by construction.
pub fn mask_is_usable(mask: &LabelMask, spacing: PixelSpacing) -> bool {
    extract_keypoints(mask, spacing, &SamplingConfig::default()).is_ok()
}

/// ED/ES frame indices of one heart cycle within a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleMarkers {
    pub ed: usize,
    pub es: usize,
}

/// One segmented frame: contour keypoints plus the optional inter-model
/// agreement score used by the quality gate (absent when no second
/// segmentation source exists).
#[derive(Debug, Clone)]
pub struct SegmentedFrame {
    pub keypoints: KeypointSet,
    pub agreement: Option<f64>,
}

/// A single apical view of an exam.
#[derive(Debug, Clone)]
pub struct ViewRecording {
    pub geometry: FrameGeometry,
    pub frames: Vec<SegmentedFrame>,
    pub cycles: Vec<CycleMarkers>,
}

/// A patient exam: both apical views, cycle markers, and optional reference
/// measurements. Cycle `i` of the A4C view pairs with cycle `i` of the A2C
/// view.
#[derive(Debug, Clone)]
pub struct ExamManifest {
    pub patient: String,
    pub a4c: ViewRecording,
    pub a2c: ViewRecording,
    pub reference_ef: Option<f64>,
}

impl ExamManifest {
    pub fn validate(&self) -> Result<(), ClinicalError> {
        if self.a4c.cycles.len() != self.a2c.cycles.len() {
            return Err(ClinicalError::BadManifest(format!(
                "cycle counts differ between views: a4c {} vs a2c {}",
                self.a4c.cycles.len(),
                self.a2c.cycles.len()
            )));
        }
        for (name, view) in [("a4c", &self.a4c), ("a2c", &self.a2c)] {
            for (i, cycle) in view.cycles.iter().enumerate() {
                if cycle.ed >= cycle.es {
                    return Err(ClinicalError::BadManifest(format!(
                        "{name} cycle {i}: ED index {} must precede ES index {}",
                        cycle.ed, cycle.es
                    )));
                }
                if cycle.es >= view.frames.len() {
                    return Err(ClinicalError::BadManifest(format!(
                        "{name} cycle {i}: ES index {} out of range ({} frames)",
                        cycle.es,
                        view.frames.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// EF of one cycle with the biplane volumes behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleEf {
    pub cycle: usize,
    pub edv_ml: f64,
    pub esv_ml: f64,
    pub ef: f64,
}

/// Exam-level EF summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfResult {
    pub patient: String,
    pub cycle_efs: Vec<CycleEf>,
    /// Mean over usable cycles; absent when the patient is excluded.
    pub mean_ef: Option<f64>,
    pub usable_cycles: usize,
    /// Set when agreement filtering left no cycle with a full ED+ES frame
    /// pair in both views.
    pub excluded: bool,
    pub reference_ef: Option<f64>,
}

/// Exam-level EF: per-cycle biplane volumes and EF from the ED/ES frame
/// pairs of both views, averaged over cycles.
///
/// With `filter_threshold` set, frames whose inter-model agreement score
/// falls below it are dropped first; a cycle is then usable only if its ED
/// and ES frames survive in both views, and a patient with no usable cycle
/// left is excluded (not an error). Frames without an agreement score are
/// retained — the gate only acts on evidence of disagreement. Without a
/// threshold, an exam that yields no cycle volume at all is an error.
pub fn exam_ef(
    exam: &ExamManifest,
    n_disks: usize,
    filter_threshold: Option<f64>,
) -> Result<EfResult, ClinicalError> {
    exam.validate()?;
    let retained = |frame: &SegmentedFrame| match (filter_threshold, frame.agreement) {
        (Some(threshold), Some(score)) => score >= threshold,
        _ => true,
    };

    let mut cycle_efs = Vec::new();
    for (index, (c4, c2)) in exam.a4c.cycles.iter().zip(&exam.a2c.cycles).enumerate() {
        let frames = [
            (&exam.a4c, c4.ed),
            (&exam.a4c, c4.es),
            (&exam.a2c, c2.ed),
            (&exam.a2c, c2.es),
        ];
        if !frames.iter().all(|(view, i)| retained(&view.frames[*i])) {
            continue;
        }
        let disks = |view: &ViewRecording, i: usize| {
            ViewDisks::from_keypoints(&view.frames[i].keypoints, view.geometry, n_disks)
        };
        let edv = simpson_biplane(&disks(&exam.a4c, c4.ed)?, &disks(&exam.a2c, c2.ed)?)?;
        let esv = simpson_biplane(&disks(&exam.a4c, c4.es)?, &disks(&exam.a2c, c2.es)?)?;
        let ef = ejection_fraction(edv.volume_ml, esv.volume_ml)?;
        cycle_efs.push(CycleEf { cycle: index, edv_ml: edv.volume_ml, esv_ml: esv.volume_ml, ef });
    }

    let usable_cycles = cycle_efs.len();
    if usable_cycles == 0 {
        return if filter_threshold.is_some() {
            Ok(EfResult {
                patient: exam.patient.clone(),
                cycle_efs,
                mean_ef: None,
                usable_cycles: 0,
                excluded: true,
                reference_ef: exam.reference_ef,
            })
        } else {
            Err(ClinicalError::NoUsableCycle)
        };
    }
    let mean_ef = cycle_efs.iter().map(|c| c.ef).sum::<f64>() / usable_cycles as f64;
    Ok(EfResult {
        patient: exam.patient.clone(),
        cycle_efs,
        mean_ef: Some(mean_ef),
        usable_cycles,
        excluded: false,
        reference_ef: exam.reference_ef,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Label;
    use crate::phantom::{generate_phantom, PhantomParams};
    use approx::assert_relative_eq;

    fn frame(width: usize, height: usize, s: f64) -> FrameGeometry {
        FrameGeometry::new(width, height, PixelSpacing::isotropic(s).unwrap())
    }

    /// Hemisphere disk stack: aᵢ = 2√(R² − hᵢ²) at hᵢ = (i+0.5)/n·R.
    fn hemisphere_disks(radius: f64, n: usize) -> ViewDisks {
        let diameters_mm = (0..n)
            .map(|i| {
                let h = (i as f64 + 0.5) / n as f64 * radius;
                2.0 * (radius * radius - h * h).sqrt()
            })
            .collect();
        ViewDisks { length_mm: radius, diameters_mm }
    }

    fn scale_disks(v: &ViewDisks, s: f64) -> ViewDisks {
        ViewDisks {
            length_mm: v.length_mm * s,
            diameters_mm: v.diameters_mm.iter().map(|d| d * s).collect(),
        }
    }

    /// Rectangular cavity: corners fall exactly on chain samples, so every
    /// disk chord equals the rectangle width. n_side = 10 → 23 points with
    /// corners at indices 7 and 15.
    fn rectangle_keypoints() -> KeypointSet {
        let (x0, x1, y_base, y_top) = (0.3, 0.7, 0.6, 0.25);
        let n = 10usize;
        let count = 2 * n + 3;
        let step = (2.0 * (y_base - y_top) + (x1 - x0)) / (count - 1) as f64;
        let endo: Vec<Point> = (0..count)
            .map(|i| {
                let s = i as f64 * step;
                if s <= y_base - y_top {
                    Point::new(x0, y_base - s)
                } else if s <= y_base - y_top + (x1 - x0) {
                    Point::new(x0 + (s - (y_base - y_top)), y_top)
                } else {
                    Point::new(x1, y_top + (s - (y_base - y_top) - (x1 - x0)))
                }
            })
            .collect();
        let center = Point::new(0.5, 0.45);
        let epi: Vec<Point> =
            endo.iter().map(|&p| center.add(p.sub(center).scale(1.15))).collect();
        let la: Vec<Point> = (0..21)
            .map(|i| {
                let t = (i + 1) as f64 / 22.0;
                Point::new(x0 + (x1 - x0) * t, y_base + 0.08 * (PI * t).sin())
            })
            .collect();
        KeypointSet::new(n, 10, endo, epi, la, PixelSpacing::isotropic(0.5).unwrap()).unwrap()
    }

    /// Half-disk cavity sampled densely enough that polygon chords track the
    /// analytic circle chords to well under a percent.
    fn half_disk_keypoints(n_side: usize) -> KeypointSet {
        let (cx, cy, r) = (0.5, 0.6, 0.25);
        let count = 2 * n_side + 3;
        let endo: Vec<Point> = (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                let phi = PI * (1.0 - t);
                Point::new(cx + r * phi.cos(), cy - r * phi.sin())
            })
            .collect();
        let center = Point::new(cx, cy);
        let epi: Vec<Point> =
            endo.iter().map(|&p| center.add(p.sub(center).scale(1.1))).collect();
        let la: Vec<Point> = (0..21)
            .map(|i| {
                let t = (i + 1) as f64 / 22.0;
                Point::new(cx - r + 2.0 * r * t, cy + 0.05 * (PI * t).sin())
            })
            .collect();
        KeypointSet::new(n_side, 10, endo, epi, la, PixelSpacing::isotropic(0.5).unwrap())
            .unwrap()
    }

    /// Shrinks all chains toward the base midpoint: volumes scale by s³ while
    /// EF against the original is exactly 1 − s³.
    fn shrink_about_base_mid(kps: &KeypointSet, s: f64) -> KeypointSet {
        let mid = kps.point_a().add(kps.point_b()).scale(0.5);
        let map = |pts: &[Point]| -> Vec<Point> {
            pts.iter().map(|&p| mid.add(p.sub(mid).scale(s))).collect()
        };
        KeypointSet::new(
            kps.n_side(),
            kps.m_side(),
            map(kps.endo()),
            map(kps.epi()),
            map(kps.la()),
            kps.spacing(),
        )
        .unwrap()
    }

    #[test]
    fn hemisphere_volume_matches_closed_form() {
        let radius = 30.0_f64;
        let exact_ml = 2.0 / 3.0 * PI * radius.powi(3) / 1000.0;
        for (n, tol) in [(20, 0.02), (200, 0.0005)] {
            let disks = hemisphere_disks(radius, n);
            let v = simpson_biplane(&disks, &disks).unwrap();
            let rel = (v.volume_ml - exact_ml).abs() / exact_ml;
            assert!(rel < tol, "n={n}: {} ml vs exact {exact_ml} ml (rel {rel})", v.volume_ml);
        }
    }

    #[test]
    fn doubling_diameters_quadruples_volume() {
        let disks = hemisphere_disks(25.0, 20);
        let doubled = ViewDisks {
            length_mm: disks.length_mm,
            diameters_mm: disks.diameters_mm.iter().map(|d| 2.0 * d).collect(),
        };
        let v1 = simpson_biplane(&disks, &disks).unwrap().volume_ml;
        let v4 = simpson_biplane(&doubled, &doubled).unwrap().volume_ml;
        assert_relative_eq!(v4, 4.0 * v1, max_relative = 1e-12);
    }

    #[test]
    fn ef_formula_and_guards() {
        assert_relative_eq!(ejection_fraction(100.0, 50.0).unwrap(), 0.5);
        assert_relative_eq!(ejection_fraction(120.0, 48.0).unwrap(), 0.6);
        assert_relative_eq!(ejection_fraction(80.0, 80.0).unwrap(), 0.0);
        assert!(matches!(ejection_fraction(0.0, 10.0), Err(ClinicalError::NonPositiveEdv(_))));
        assert_relative_eq!(ensemble_ef(0.5, 0.7), 0.6);
    }

    #[test]
    fn ef_is_invariant_under_uniform_scaling() {
        let ed = hemisphere_disks(30.0, 20);
        let es = hemisphere_disks(24.0, 20);
        let ef = |a: &ViewDisks, b: &ViewDisks| {
            ejection_fraction(
                simpson_biplane(a, a).unwrap().volume_ml,
                simpson_biplane(b, b).unwrap().volume_ml,
            )
            .unwrap()
        };
        let base = ef(&ed, &es);
        for s in [0.5, 2.0, 3.7] {
            let scaled = ef(&scale_disks(&ed, s), &scale_disks(&es, s));
            assert!(
                (scaled - base).abs() < 1e-12,
                "scale {s}: EF {scaled} vs {base}"
            );
        }
    }

    #[test]
    fn rectangle_cavity_has_constant_chords() {
        let kps = rectangle_keypoints();
        let geometry = frame(100, 100, 0.5);
        let axis = lv_axis(&kps, geometry).unwrap();
        // Vertical axis of designed length 0.35 (normalized) = 17.5 mm.
        assert_relative_eq!(axis.length_mm, 17.5, epsilon = 1e-9);
        let diameters = disk_diameters(&kps, &axis, 20, geometry).unwrap();
        for d in &diameters {
            assert_relative_eq!(*d, 20.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn half_disk_diameters_follow_the_chord_formula() {
        let kps = half_disk_keypoints(100);
        let geometry = frame(200, 200, 0.5);
        let axis = lv_axis(&kps, geometry).unwrap();
        let radius = 0.25 * 200.0 * 0.5;
        assert_relative_eq!(axis.length_mm, radius, epsilon = 1e-6);
        let n = 20;
        let diameters = disk_diameters(&kps, &axis, n, geometry).unwrap();
        for (i, d) in diameters.iter().enumerate() {
            let h = (i as f64 + 0.5) / n as f64 * radius;
            let exact = 2.0 * (radius * radius - h * h).sqrt();
            let rel = (d - exact).abs() / exact;
            assert!(rel < 0.02, "disk {i}: {d} mm vs analytic {exact} mm");
        }
    }

    #[test]
    fn axis_length_is_rotation_invariant_on_phantoms() {
        // Same seed, same draw order, only the rotation differs: the cavity
        // is congruent, so the measured axis must match across tilts.
        let geometry = frame(512, 512, 0.7);
        for seed in [11, 12, 13] {
            let mut lengths = Vec::new();
            for angle in [-8.0, 0.0, 8.0] {
                let params = PhantomParams {
                    width: 512,
                    height: 512,
                    rotation_deg: (angle, angle),
                    ..PhantomParams::default()
                };
                let (_, mask) = generate_phantom(seed, &params).unwrap();
                let kps =
                    extract_keypoints(&mask, geometry.spacing, &SamplingConfig::default())
                        .unwrap();
                let axis = lv_axis(&kps, geometry).unwrap();
                assert!(
                    (20.0..100.0).contains(&axis.length_mm),
                    "implausible axis {} mm",
                    axis.length_mm
                );
                lengths.push(axis.length_mm);
            }
            let (min, max) = (
                lengths.iter().cloned().fold(f64::INFINITY, f64::min),
                lengths.iter().cloned().fold(0.0, f64::max),
            );
            assert!(
                (max - min) / max < 0.01,
                "seed {seed}: axis lengths {lengths:?} vary more than 1%"
            );
        }
    }

    #[test]
    fn degenerate_axis_is_rejected() {
        let pts = vec![Point::new(0.5, 0.5); 23];
        let la = vec![Point::new(0.5, 0.7); 21];
        let kps = KeypointSet::new(
            10,
            10,
            pts.clone(),
            pts,
            la,
            PixelSpacing::isotropic(1.0).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            lv_axis(&kps, frame(100, 100, 1.0)),
            Err(ClinicalError::DegenerateAxis)
        ));
    }

    #[test]
    fn chords_outside_the_cavity_error() {
        let kps = rectangle_keypoints();
        let geometry = frame(100, 100, 0.5);
        let axis = lv_axis(&kps, geometry).unwrap();
        // Reflect the axis through the base: every disk lands in the atrium.
        let away = LvAxis {
            apex: axis.base_mid.add(axis.base_mid.sub(axis.apex)),
            base_mid: axis.base_mid,
            direction: axis.direction.scale(-1.0),
            length_mm: axis.length_mm,
        };
        assert!(matches!(
            disk_diameters(&kps, &away, 20, geometry),
            Err(ClinicalError::EmptyChord)
        ));
    }

    #[test]
    fn simpson_rejects_mismatched_views() {
        let a = hemisphere_disks(30.0, 20);
        let b = hemisphere_disks(30.0, 10);
        assert!(matches!(
            simpson_biplane(&a, &b),
            Err(ClinicalError::DiskCountMismatch { a4c: 20, a2c: 10 })
        ));
        let flat = ViewDisks { length_mm: 0.0, diameters_mm: vec![1.0; 20] };
        assert!(matches!(
            simpson_biplane(&flat, &flat),
            Err(ClinicalError::BadLength(_))
        ));
    }

    #[test]
    fn usability_follows_landmark_extraction() {
        let params = PhantomParams::default();
        let (_, mask) = generate_phantom(40, &params).unwrap();
        assert!(mask_is_usable(&mask, params.spacing));

        let mut no_atrium = mask.clone();
        let la_pixels: Vec<(usize, usize)> = no_atrium.pixels_of(Label::La).collect();
        for (x, y) in la_pixels {
            no_atrium.set(x, y, Label::Background);
        }
        assert!(!mask_is_usable(&no_atrium, params.spacing));
    }

    fn phantom_frames(seed: u64, shrinks: &[f64]) -> (FrameGeometry, Vec<SegmentedFrame>) {
        let params = PhantomParams::default();
        let (_, mask) = generate_phantom(seed, &params).unwrap();
        let kps = extract_keypoints(&mask, params.spacing, &SamplingConfig::default()).unwrap();
        let geometry = FrameGeometry::new(params.width, params.height, params.spacing);
        let frames = shrinks
            .iter()
            .map(|&s| SegmentedFrame { keypoints: shrink_about_base_mid(&kps, s), agreement: None })
            .collect();
        (geometry, frames)
    }

    fn two_cycle_exam(seed: u64) -> ExamManifest {
        // Frames: [ED0 (full size), ES0 (×0.8), ED1 (full), ES1 (×0.7)].
        let (geometry, frames) = phantom_frames(seed, &[1.0, 0.8, 1.0, 0.7]);
        let cycles = vec![CycleMarkers { ed: 0, es: 1 }, CycleMarkers { ed: 2, es: 3 }];
        let view = ViewRecording { geometry, frames, cycles };
        ExamManifest {
            patient: "p0".into(),
            a4c: view.clone(),
            a2c: view,
            reference_ef: Some(0.55),
        }
    }

    #[test]
    fn exam_ef_matches_the_shrink_construction() {
        let exam = two_cycle_exam(50);
        let result = exam_ef(&exam, DEFAULT_DISKS, None).unwrap();
        assert_eq!(result.usable_cycles, 2);
        assert!(!result.excluded);
        // Shrinking every chain by s scales L and all diameters by s, hence
        // volumes by s³ and cycle EF = 1 − s³ exactly.
        let expected = [1.0 - 0.8f64.powi(3), 1.0 - 0.7f64.powi(3)];
        for (cycle, want) in result.cycle_efs.iter().zip(expected) {
            assert!(
                (cycle.ef - want).abs() < 1e-12,
                "cycle {}: EF {} vs designed {want}",
                cycle.cycle,
                cycle.ef
            );
        }
        let mean = result.mean_ef.unwrap();
        assert!((mean - (expected[0] + expected[1]) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_cycles_average_to_the_single_cycle_ef() {
        let (geometry, frames) = phantom_frames(51, &[1.0, 0.75]);
        let cycles = vec![CycleMarkers { ed: 0, es: 1 }; 3];
        let view = ViewRecording { geometry, frames, cycles };
        let exam = ExamManifest {
            patient: "p1".into(),
            a4c: view.clone(),
            a2c: view,
            reference_ef: None,
        };
        let result = exam_ef(&exam, DEFAULT_DISKS, None).unwrap();
        assert_eq!(result.usable_cycles, 3);
        let single = result.cycle_efs[0].ef;
        assert!((result.mean_ef.unwrap() - single).abs() < 1e-12);
    }

    #[test]
    fn agreement_filtering_drops_cycles_and_excludes_patients() {
        let mut exam = two_cycle_exam(52);
        let unfiltered = exam_ef(&exam, DEFAULT_DISKS, None).unwrap();

        // Tag every frame as high agreement except cycle 0's ES in one view.
        for view in [&mut exam.a4c, &mut exam.a2c] {
            for frame in &mut view.frames {
                frame.agreement = Some(0.95);
            }
        }
        exam.a4c.frames[1].agreement = Some(0.80);
        let filtered = exam_ef(&exam, DEFAULT_DISKS, Some(0.85)).unwrap();
        assert_eq!(filtered.usable_cycles, 1);
        assert!(!filtered.excluded);
        assert_eq!(filtered.cycle_efs[0].cycle, 1);
        assert!((filtered.mean_ef.unwrap() - unfiltered.cycle_efs[1].ef).abs() < 1e-12);

        // Dropping an ED frame from the *other* view kills the other cycle:
        // every cycle now loses a frame somewhere → exclusion, not error.
        exam.a2c.frames[2].agreement = Some(0.10);
        let excluded = exam_ef(&exam, DEFAULT_DISKS, Some(0.85)).unwrap();
        assert!(excluded.excluded);
        assert_eq!(excluded.usable_cycles, 0);
        assert_eq!(excluded.mean_ef, None);

        // The same exam without filtering is still fully usable.
        let still_ok = exam_ef(&exam, DEFAULT_DISKS, None).unwrap();
        assert_eq!(still_ok.usable_cycles, 2);
    }

    #[test]
    fn exam_without_cycles_errors_unfiltered() {
        let (geometry, frames) = phantom_frames(53, &[1.0, 0.8]);
        let view = ViewRecording { geometry, frames, cycles: vec![] };
        let exam = ExamManifest {
            patient: "p2".into(),
            a4c: view.clone(),
            a2c: view,
            reference_ef: None,
        };
        assert!(matches!(
            exam_ef(&exam, DEFAULT_DISKS, None),
            Err(ClinicalError::NoUsableCycle)
        ));
    }

    #[test]
    fn malformed_manifests_are_rejected() {
        let mut exam = two_cycle_exam(54);
        exam.a2c.cycles.pop();
        assert!(matches!(
            exam_ef(&exam, DEFAULT_DISKS, None),
            Err(ClinicalError::BadManifest(_))
        ));

        let mut exam = two_cycle_exam(54);
        exam.a4c.cycles[0] = CycleMarkers { ed: 1, es: 1 };
        assert!(matches!(
            exam_ef(&exam, DEFAULT_DISKS, None),
            Err(ClinicalError::BadManifest(_))
        ));

        let mut exam = two_cycle_exam(54);
        exam.a4c.cycles[1] = CycleMarkers { ed: 2, es: 9 };
        assert!(matches!(
            exam_ef(&exam, DEFAULT_DISKS, None),
            Err(ClinicalError::BadManifest(_))
        ));
    }

    #[test]
    fn ef_result_json_round_trip() {
        let exam = two_cycle_exam(55);
        let result = exam_ef(&exam, DEFAULT_DISKS, None).unwrap();
        let text = serde_json::to_string(&result).unwrap();
        let back: EfResult = serde_json::from_str(&text).unwrap();
        assert_eq!(result, back);
    }
}
