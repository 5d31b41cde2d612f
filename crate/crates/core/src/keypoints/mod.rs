//! Contour keypoint representation of an apical cardiac view.
//!
//! A segmentation is encoded as three ordered point chains in normalized
//! image coordinates (`[0, 1]`, divided by width/height):
//!
//! - `endo`: endocardial border, `2·n_side + 3` points ordered
//!   A → (arc) → E → (arc) → B, where A/B are the annulus corners (ends of
//!   the LV–LA interface) and E is the LV apex;
//! - `epi`: epicardial border, `2·n_side + 3` points ordered C → F → D,
//!   where C/D are the farthest myocardium points along the extended base
//!   line and F is the epicardial apex;
//! - `la`: left-atrial border, `2·m_side + 1` points running from the A side
//!   over the LA apex G to the B side. The atrial corner points are excluded
//!   (they coincide with the annulus, which already belongs to `endo`).
//!
//! Arc samples are equidistant in arc length with sub-pixel interpolation.
//! Landmark positions inside the arrays are fixed by construction:
//! A = endo[0], E = endo[n+1], B = endo[2n+2]; C/F/D likewise in `epi`;
//! G = la[m].

mod displacement;
mod extract;
mod io;
mod mirror;

pub use displacement::{from_displacement, outward_normal, to_displacement, DISP_EPSILON};
pub use extract::{extract_keypoints, extract_landmarks, LandmarkPixels};
pub use io::{load_keypoints, read_keypoints, save_keypoints, write_keypoints, KeypointIoError};
pub use mirror::mirror_keypoints;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;
use crate::imaging::{ImagingError, Label, PixelSpacing};

#[derive(Debug, Error)]
pub enum KeypointError {
    #[error("structure {0:?} is missing from the mask")]
    MissingStructure(Label),
    #[error("no LV–LA interface (or no MYO on the extended base line)")]
    NoInterface,
    #[error("{arc} arc too short: {got} pixels for {needed} samples")]
    ContourTooShort { arc: &'static str, needed: usize, got: usize },
    #[error("zero-length tangent at ring index {index}")]
    ZeroTangent { index: usize },
    #[error("degenerate landmark geometry: {0}")]
    DegenerateLandmarks(&'static str),
    #[error("{array} has {got} points, expected {expected}")]
    BadCount { array: &'static str, expected: usize, got: usize },
    #[error("{array}[{index}] outside [0,1] or not finite")]
    CoordOutOfRange { array: &'static str, index: usize },
    #[error("invalid sampling config: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// Keypoint sampling densities (points per arc side) and the annulus variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Samples per endo/epi arc side; endo and epi get `2·n_side + 3` points.
    pub n_side: usize,
    /// Samples per LA arc side; LA gets `2·m_side + 1` points.
    pub m_side: usize,
    /// When true, the annulus corners A/B come from the MYO–LA interface
    /// extremes instead of the LV–LA interface (default).
    pub annulus_from_myo: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { n_side: 20, m_side: 10, annulus_from_myo: false }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), KeypointError> {
        if self.n_side == 0 {
            return Err(KeypointError::BadConfig("n_side must be >= 1"));
        }
        if self.m_side == 0 {
            return Err(KeypointError::BadConfig("m_side must be >= 1"));
        }
        Ok(())
    }

    pub fn endo_len(&self) -> usize {
        2 * self.n_side + 3
    }

    pub fn la_len(&self) -> usize {
        2 * self.m_side + 1
    }

    pub fn total(&self) -> usize {
        2 * self.endo_len() + self.la_len()
    }
}

/// A complete keypoint segmentation (see module docs for layout).
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    n_side: usize,
    m_side: usize,
    endo: Vec<Point>,
    epi: Vec<Point>,
    la: Vec<Point>,
    spacing: PixelSpacing,
}

fn check_array(
    name: &'static str,
    pts: &[Point],
    expected: usize,
) -> Result<(), KeypointError> {
    if pts.len() != expected {
        return Err(KeypointError::BadCount { array: name, expected, got: pts.len() });
    }
    for (index, p) in pts.iter().enumerate() {
        let ok = p.x.is_finite() && p.y.is_finite() && (0.0..=1.0).contains(&p.x)
            && (0.0..=1.0).contains(&p.y);
        if !ok {
            return Err(KeypointError::CoordOutOfRange { array: name, index });
        }
    }
    Ok(())
}

impl KeypointSet {
    pub fn new(
        n_side: usize,
        m_side: usize,
        endo: Vec<Point>,
        epi: Vec<Point>,
        la: Vec<Point>,
        spacing: PixelSpacing,
    ) -> Result<Self, KeypointError> {
        if n_side == 0 || m_side == 0 {
            return Err(KeypointError::BadConfig("side counts must be >= 1"));
        }
        check_array("endo", &endo, 2 * n_side + 3)?;
        check_array("epi", &epi, 2 * n_side + 3)?;
        check_array("la", &la, 2 * m_side + 1)?;
        Ok(KeypointSet { n_side, m_side, endo, epi, la, spacing })
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    pub fn m_side(&self) -> usize {
        self.m_side
    }

    pub fn endo(&self) -> &[Point] {
        &self.endo
    }

    pub fn epi(&self) -> &[Point] {
        &self.epi
    }

    pub fn la(&self) -> &[Point] {
        &self.la
    }

    pub fn spacing(&self) -> PixelSpacing {
        self.spacing
    }

    pub fn total(&self) -> usize {
        self.endo.len() + self.epi.len() + self.la.len()
    }

    // Canonical landmark indices.
    pub fn idx_a(&self) -> usize {
        0
    }
    pub fn idx_e(&self) -> usize {
        self.n_side + 1
    }
    pub fn idx_b(&self) -> usize {
        2 * self.n_side + 2
    }
    pub fn idx_g(&self) -> usize {
        self.m_side
    }

    pub fn point_a(&self) -> Point {
        self.endo[0]
    }
    pub fn point_b(&self) -> Point {
        self.endo[2 * self.n_side + 2]
    }
    pub fn point_e(&self) -> Point {
        self.endo[self.n_side + 1]
    }
    pub fn point_c(&self) -> Point {
        self.epi[0]
    }
    pub fn point_d(&self) -> Point {
        self.epi[2 * self.n_side + 2]
    }
    pub fn point_f(&self) -> Point {
        self.epi[self.n_side + 1]
    }
    pub fn point_g(&self) -> Point {
        self.la[self.m_side]
    }
}

/// Displacement parameterisation: the epicardium as a strictly positive
/// normal offset of each endocardial keypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementSet {
    n_side: usize,
    m_side: usize,
    endo: Vec<Point>,
    la: Vec<Point>,
    /// Normal displacement per endo keypoint, clamped to `>= DISP_EPSILON`.
    disp: Vec<f64>,
    spacing: PixelSpacing,
}

impl DisplacementSet {
    pub fn new(
        n_side: usize,
        m_side: usize,
        endo: Vec<Point>,
        la: Vec<Point>,
        disp: Vec<f64>,
        spacing: PixelSpacing,
    ) -> Result<Self, KeypointError> {
        if n_side == 0 || m_side == 0 {
            return Err(KeypointError::BadConfig("side counts must be >= 1"));
        }
        check_array("endo", &endo, 2 * n_side + 3)?;
        check_array("la", &la, 2 * m_side + 1)?;
        if disp.len() != endo.len() {
            return Err(KeypointError::BadCount {
                array: "disp",
                expected: endo.len(),
                got: disp.len(),
            });
        }
        let disp = disp.into_iter().map(|d| d.max(displacement::DISP_EPSILON)).collect();
        Ok(DisplacementSet { n_side, m_side, endo, la, disp, spacing })
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }
    pub fn m_side(&self) -> usize {
        self.m_side
    }
    pub fn endo(&self) -> &[Point] {
        &self.endo
    }
    pub fn la(&self) -> &[Point] {
        &self.la
    }
    pub fn disp(&self) -> &[f64] {
        &self.disp
    }
    pub fn spacing(&self) -> PixelSpacing {
        self.spacing
    }
}
