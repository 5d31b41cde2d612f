//! Surgically defective phantoms: each defect is constructed analytically in
//! the phantom's local frame so that it violates exactly one anatomical
//! criterion (or, for missing structures, the designed pair). Used to pin
//! down the anatomy checker's behavior case by case.

use super::{PhantomError, PhantomParams, SampledShape, FIT_MARGIN_PX};
use crate::imaging::{Label, LabelMask};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How far the detached atrium is pushed down, in pixels; the gap is
/// back-filled with myocardium so only adjacency breaks.
const DETACH_GAP: f64 = 4.5;

/// One deliberately broken aspect of an otherwise valid phantom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectKind {
    /// A horizontal background seam cuts the atrium into an upper rim (still
    /// adjacent to the cavity) and a lower remnant.
    SplitAtrium,
    /// A background pocket strictly inside the cavity.
    CavityHole,
    /// The basal end of the myocardial band is carved away on one side,
    /// exposing the cavity to outside air.
    ShellGap,
    /// The atrium sits lower than it should, separated from the cavity by a
    /// myocardium-filled gap.
    DetachedAtrium,
    /// A second small cavity component floats in the far background.
    DuplicatedCavity,
    /// A background pocket pinched between cavity and myocardium at the apex:
    /// a hole of the union that is no structure's own hole.
    InterStructureHole,
    /// The atrium is replaced by myocardium entirely: zero atrial components.
    /// (Adjacency is vacuous on an absent atrium, and a muscle-sealed cavity
    /// is an enclosed structure, not a hole.)
    MissingAtrium,
    /// The myocardial band is removed entirely.
    MissingMyocardium,
}

impl DefectKind {
    pub const ALL: [DefectKind; 8] = [
        DefectKind::SplitAtrium,
        DefectKind::CavityHole,
        DefectKind::ShellGap,
        DefectKind::DetachedAtrium,
        DefectKind::DuplicatedCavity,
        DefectKind::InterStructureHole,
        DefectKind::MissingAtrium,
        DefectKind::MissingMyocardium,
    ];

    /// The exact criteria this defect is designed to break, in the order the
    /// anatomy report lists failures.
    pub fn expected_failures(self) -> &'static [&'static str] {
        match self {
            DefectKind::SplitAtrium => &["la_single_component"],
            DefectKind::CavityHole => &["lv_no_holes"],
            DefectKind::ShellGap => &["myo_band_encloses_lv"],
            DefectKind::DetachedAtrium => &["la_adjacent_to_lv"],
            DefectKind::DuplicatedCavity => &["lv_single_component"],
            DefectKind::InterStructureHole => &["no_inter_structure_holes"],
            DefectKind::MissingAtrium => &["la_single_component"],
            DefectKind::MissingMyocardium => &["myo_single_component", "myo_band_encloses_lv"],
        }
    }
}

fn inside(qx: f64, qy: f64, sx: f64, sy: f64) -> bool {
    (qx / sx).powi(2) + (qy / sy).powi(2) <= 1.0
}

/// Applies one defect to the label of the pixel at image coordinates (x, y),
/// local coordinates (qx, qy).
fn apply(
    kind: DefectKind,
    shape: &SampledShape,
    x: usize,
    y: usize,
    qx: f64,
    qy: f64,
    current: Label,
) -> Label {
    match kind {
        DefectKind::SplitAtrium => {
            let seam_top = 0.45 * shape.la_ry;
            if current == Label::La && qy >= seam_top && qy <= seam_top + 1.8 {
                Label::Background
            } else {
                current
            }
        }
        DefectKind::CavityHole => {
            let (dx, dy) = (qx, qy + 0.5 * shape.ry);
            if (dx * dx + dy * dy).sqrt() <= 2.5 {
                Label::Background
            } else {
                current
            }
        }
        DefectKind::ShellGap => {
            if current == Label::Myo && qy >= -2.6 && qx > 0.0 {
                Label::Background
            } else {
                current
            }
        }
        DefectKind::DetachedAtrium => {
            if qy <= 0.0 {
                return current;
            }
            let shifted_qy = qy - DETACH_GAP;
            if shifted_qy > 0.0 && inside(qx, shifted_qy, shape.la_rx, shape.la_ry) {
                Label::La
            } else if current == Label::La {
                // The vacated upper slab becomes myocardium, keeping the
                // cavity sealed and the band in one piece.
                Label::Myo
            } else {
                current
            }
        }
        DefectKind::DuplicatedCavity => {
            let (dx, dy) = (x as f64 - 7.0, y as f64 - 7.0);
            if (dx * dx + dy * dy).sqrt() <= 2.6 {
                Label::Lv
            } else {
                current
            }
        }
        DefectKind::InterStructureHole => {
            let (dx, dy) = (qx, qy + shape.ry);
            if (dx * dx + dy * dy).sqrt() <= 2.0 {
                Label::Background
            } else {
                current
            }
        }
        DefectKind::MissingAtrium => {
            if current == Label::La {
                Label::Myo
            } else {
                current
            }
        }
        DefectKind::MissingMyocardium => {
            if current == Label::Myo {
                Label::Background
            } else {
                current
            }
        }
    }
}

/// Generates the label mask of phantom `seed` with the given defects applied
/// in order. The geometry matches `generate_phantom(seed, params)` exactly.
pub fn add_defect(
    seed: u64,
    params: &PhantomParams,
    kinds: &[DefectKind],
) -> Result<LabelMask, PhantomError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = SampledShape::sample(&mut rng, params);
    shape.check_fit(params.width, params.height)?;
    if kinds.contains(&DefectKind::DetachedAtrium) {
        let lowest = shape.center.y + shape.la_ry + DETACH_GAP;
        if lowest > params.height as f64 - 1.0 - FIT_MARGIN_PX {
            return Err(PhantomError::InfeasibleGeometry(format!(
                "detached atrium would reach row {lowest:.1} of a {}-row image",
                params.height
            )));
        }
    }

    let (w, h) = (params.width, params.height);
    let mut mask = LabelMask::filled(w, h, Label::Background);
    for y in 0..h {
        for x in 0..w {
            let (qx, qy) = shape.local(x as f64, y as f64);
            let mut label = shape.label_from_local(qx, qy);
            for &kind in kinds {
                label = apply(kind, &shape, x, y, qx, qy, label);
            }
            mask.set(x, y, label);
        }
    }
    Ok(mask)
}

/// Generates the label mask of phantom `seed` broken by exactly one defect.
pub fn generate_defective_phantom(
    seed: u64,
    params: &PhantomParams,
    kind: DefectKind,
) -> Result<LabelMask, PhantomError> {
    add_defect(seed, params, &[kind])
}
