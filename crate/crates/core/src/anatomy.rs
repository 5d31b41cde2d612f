//! Anatomical-correctness checks for label masks and keypoint sets.
//!
//! A segmentation counts as anatomically correct when every criterion in
//! [`AnatomyReport`] holds: each structure is one 4-connected piece without
//! enclosed holes, no hole opens up between structures, the myocardial band
//! (closed at the base by the atrium) seals the cavity off from outside air,
//! the atrium touches the cavity, and — in keypoint space — the two contour
//! rings neither cross nor invert.
//!
//! A *hole* is an enclosed pocket of empty space: a 4-connected component of
//! background pixels that cannot reach the image border without entering the
//! region under test. Enclosed pockets of other structures (for example a
//! cavity sealed in by muscle) are not holes — they are judged by the
//! component, enclosure, and adjacency criteria instead.
//!
//! Mask-space checks are total functions: an empty or mangled structure
//! fails its criteria rather than erroring. Keypoint-space checks rasterize
//! the contours first and can therefore report degenerate geometry.

use crate::geom::segments_intersect;
use crate::imaging::{
    components_of, connected_components, rasterize_keypoints, Components, ImagingError, Label,
    LabelMask,
};
use crate::keypoints::{outward_normal, KeypointError, KeypointSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Resolution at which keypoint sets are rasterized for the mask-space
/// criteria.
const KEYPOINT_RASTER_SIZE: usize = 256;

#[derive(Debug, Error)]
pub enum AnatomyError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Keypoint(#[from] KeypointError),
}

/// Pass/fail record of every anatomical criterion.
///
/// `ring_crossing_free` is a keypoint-space property; [`check_mask`] has no
/// contours to test and reports it as passing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnatomyReport {
    pub lv_single_component: bool,
    pub myo_single_component: bool,
    pub la_single_component: bool,
    pub lv_no_holes: bool,
    pub myo_no_holes: bool,
    pub la_no_holes: bool,
    /// Holes of LV∪MYO and LV∪MYO∪LA that are not holes of a single
    /// structure (a pocket pinched between two structures).
    pub no_inter_structure_holes: bool,
    /// Border-connected background never touches the main cavity component:
    /// the myocardial band, closed at the base by the atrium, seals the LV.
    pub myo_band_encloses_lv: bool,
    /// Some atrial pixel touches the cavity. Vacuously true when the atrium
    /// is absent — absence already fails the component-count criterion.
    pub la_adjacent_to_lv: bool,
    pub ring_crossing_free: bool,
}

impl AnatomyReport {
    /// AND of all criteria; the "anatomically correct" verdict.
    pub fn overall(&self) -> bool {
        self.failures().is_empty()
    }

    /// Names of the failed criteria, in declaration order.
    pub fn failures(&self) -> Vec<&'static str> {
        let all = [
            (self.lv_single_component, "lv_single_component"),
            (self.myo_single_component, "myo_single_component"),
            (self.la_single_component, "la_single_component"),
            (self.lv_no_holes, "lv_no_holes"),
            (self.myo_no_holes, "myo_no_holes"),
            (self.la_no_holes, "la_no_holes"),
            (self.no_inter_structure_holes, "no_inter_structure_holes"),
            (self.myo_band_encloses_lv, "myo_band_encloses_lv"),
            (self.la_adjacent_to_lv, "la_adjacent_to_lv"),
            (self.ring_crossing_free, "ring_crossing_free"),
        ];
        all.iter().filter(|(ok, _)| !ok).map(|&(_, name)| name).collect()
    }
}

/// Per-pixel flags of the holes of a region: 4-connected components of the
/// region's complement that never touch the image border and consist solely
/// of background pixels (enclosed empty space, not an enclosed structure).
fn hole_pixels(mask: &LabelMask, region: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let (width, height) = (mask.width(), mask.height());
    let comps = components_of(width, height, |x, y| !region(x, y));
    let mut disqualified = vec![false; comps.count() + 1];
    let bg = Label::Background.code();
    for (i, &id) in comps.labels.iter().enumerate() {
        if id != 0 && mask.data()[i] != bg {
            disqualified[id as usize] = true;
        }
    }
    let mut mark = |x: usize, y: usize| {
        let id = comps.labels[y * width + x];
        if id != 0 {
            disqualified[id as usize] = true;
        }
    };
    for x in 0..width {
        mark(x, 0);
        mark(x, height - 1);
    }
    for y in 0..height {
        mark(0, y);
        mark(width - 1, y);
    }
    comps
        .labels
        .iter()
        .map(|&id| id != 0 && !disqualified[id as usize])
        .collect()
}

fn has_true(flags: &[bool]) -> bool {
    flags.iter().any(|&b| b)
}

/// True when the main (largest) component of `of` never 4-touches a pixel
/// flagged in `against`. Vacuously true when `of` is empty.
fn component_clear_of(comps: &Components, against: &[bool], width: usize, height: usize) -> bool {
    if comps.count() == 0 {
        return true;
    }
    for (i, &id) in comps.labels.iter().enumerate() {
        if id != 1 {
            continue;
        }
        let (x, y) = (i % width, i / width);
        let exposed = (x > 0 && against[i - 1])
            || (x + 1 < width && against[i + 1])
            || (y > 0 && against[i - width])
            || (y + 1 < height && against[i + width]);
        if exposed {
            return false;
        }
    }
    true
}

/// Evaluates the mask-space criteria. Never errors: missing or broken
/// structures fail their criteria instead.
pub fn check_mask(mask: &LabelMask) -> AnatomyReport {
    let (w, h) = (mask.width(), mask.height());
    let lv = connected_components(mask, Label::Lv);
    let myo = connected_components(mask, Label::Myo);
    let la = connected_components(mask, Label::La);

    let is = |x: usize, y: usize, label: Label| mask.get(x, y) == label.code();
    let lv_holes = hole_pixels(mask, |x, y| is(x, y, Label::Lv));
    let myo_holes = hole_pixels(mask, |x, y| is(x, y, Label::Myo));
    let la_holes = hole_pixels(mask, |x, y| is(x, y, Label::La));

    // Union holes count only when not attributable to a single structure.
    let single_holes: Vec<bool> = (0..w * h)
        .map(|i| lv_holes[i] || myo_holes[i] || la_holes[i])
        .collect();
    let pair_holes = hole_pixels(mask, |x, y| is(x, y, Label::Lv) || is(x, y, Label::Myo));
    let all_holes = hole_pixels(mask, |x, y| mask.get(x, y) != Label::Background.code());
    let inter_ok = (0..w * h)
        .all(|i| (!pair_holes[i] || single_holes[i]) && (!all_holes[i] || single_holes[i]));

    // Outside air: background connected to the image border (all background
    // is either that or a hole of the structure union).
    let outside_air: Vec<bool> = (0..w * h)
        .map(|i| mask.data()[i] == Label::Background.code() && !all_holes[i])
        .collect();
    let encloses = component_clear_of(&lv, &outside_air, w, h);

    let la_code = Label::La.code();
    let adjacent = la.count() == 0
        || mask.pixels_of(Label::Lv).any(|(x, y)| {
            (x > 0 && mask.get(x - 1, y) == la_code)
                || (x + 1 < w && mask.get(x + 1, y) == la_code)
                || (y > 0 && mask.get(x, y - 1) == la_code)
                || (y + 1 < h && mask.get(x, y + 1) == la_code)
        });

    AnatomyReport {
        lv_single_component: lv.count() == 1,
        myo_single_component: myo.count() == 1,
        la_single_component: la.count() == 1,
        lv_no_holes: !has_true(&lv_holes),
        myo_no_holes: !has_true(&myo_holes),
        la_no_holes: !has_true(&la_holes),
        no_inter_structure_holes: inter_ok,
        myo_band_encloses_lv: encloses,
        la_adjacent_to_lv: adjacent,
        ring_crossing_free: true,
    }
}

/// Contour-ring coherence: every epicardial point sits on the outward side
/// of its endocardial partner, and the two open chains never cross. The
/// shared base closure is excluded from the segment test — the nearly
/// collinear closing segments of valid shapes would otherwise self-flag.
fn rings_coherent(kps: &KeypointSet) -> Result<bool, KeypointError> {
    let endo = kps.endo();
    let epi = kps.epi();
    for i in 0..endo.len() {
        let n = outward_normal(endo, i, false)?;
        if epi[i].sub(endo[i]).dot(n) < 0.0 {
            return Ok(false);
        }
    }
    for e in endo.windows(2) {
        for p in epi.windows(2) {
            if segments_intersect(e[0], e[1], p[0], p[1]) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Evaluates all criteria for a keypoint set: ring coherence directly on the
/// contours, everything else on the rasterization.
pub fn check_keypoints(kps: &KeypointSet) -> Result<AnatomyReport, AnatomyError> {
    let mask = rasterize_keypoints(kps, KEYPOINT_RASTER_SIZE, KEYPOINT_RASTER_SIZE)?;
    let mut report = check_mask(&mask);
    report.ring_crossing_free = rings_coherent(kps)?;
    Ok(report)
}
