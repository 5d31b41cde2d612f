//! Deterministic synthetic echo phantoms: parametric heart-shaped label masks
//! with matching speckled grayscale images, plus geometric/intensity
//! augmentation of (image, keypoints) pairs.
//!
//! A phantom is a half-annulus-plus-ellipse composite drawn in a rotated local
//! frame: a truncated-ellipse ventricular cavity, a constant-thickness
//! myocardial band around it, and an atrial half-ellipse below the base line.
//! Labels are assigned analytically per pixel, so the same seed always
//! reproduces the exact same pair. Images get per-label mean intensities,
//! multiplicative speckle, and an optional sector wedge that darkens
//! everything outside the imaging cone (the mask is never clipped).

mod augment;
mod defects;

pub use augment::{augment, AugmentConfig};
pub use defects::{add_defect, generate_defective_phantom, DefectKind};

use crate::geom::Point;
use crate::imaging::{Image, ImagingError, Label, LabelMask, PixelSpacing};
use crate::keypoints::KeypointError;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Margin in pixels kept between any structure and the image border.
const FIT_MARGIN_PX: f64 = 3.0;
/// Base line sits at this fraction of the image height (before jitter).
const BASE_CENTER_Y: f64 = 0.55;
/// The atrial half-ellipse is wider than the cavity base by this many pixels,
/// sampled uniformly, so the cavity-atrium interface spans the full base.
const LA_MARGIN_PX: (f64, f64) = (1.0, 3.0);

/// Per-label mean intensities of the rendered image.
const MEAN_BACKGROUND: f32 = 0.12;
const MEAN_LV: f32 = 0.06;
const MEAN_MYO: f32 = 0.60;
const MEAN_LA: f32 = 0.10;

/// Errors from phantom generation and augmentation.
#[derive(Debug, Error)]
pub enum PhantomError {
    /// Parameter ranges are malformed (unordered, non-finite, non-positive).
    #[error("bad configuration: {0}")]
    BadConfig(String),
    /// The sampled shapes cannot fit inside the image with the safety margin.
    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),
    /// Augmentation could not keep all keypoints inside [0,1].
    #[error("augmentation exhausted {tries} retries keeping keypoints in frame")]
    RetriesExhausted { tries: usize },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Keypoint(#[from] KeypointError),
}

/// Imaging wedge applied to the rendered image (never to the label mask).
/// The wedge opens downward from an apex above the probe face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectorGeometry {
    /// Disable to render a full rectangular field of view.
    pub enabled: bool,
    /// Half-opening angle of the wedge, degrees.
    pub half_angle_deg: f64,
    /// Wedge apex as fractions of (width, height); y is typically negative,
    /// placing the apex above the top edge so the cone is wide at depth.
    pub apex: (f64, f64),
    /// Maximum imaging depth from the apex, as a fraction of image height.
    pub max_depth: f64,
}

impl Default for SectorGeometry {
    fn default() -> Self {
        SectorGeometry { enabled: true, half_angle_deg: 45.0, apex: (0.5, -0.06), max_depth: 1.15 }
    }
}

impl SectorGeometry {
    fn validate(&self) -> Result<(), PhantomError> {
        if !(self.half_angle_deg.is_finite() && self.half_angle_deg > 0.0 && self.half_angle_deg <= 90.0) {
            return Err(PhantomError::BadConfig(format!(
                "sector half angle {} deg must be in (0, 90]",
                self.half_angle_deg
            )));
        }
        if !(self.max_depth.is_finite() && self.max_depth > 0.0) {
            return Err(PhantomError::BadConfig("sector max depth must be positive".into()));
        }
        if !(self.apex.0.is_finite() && self.apex.1.is_finite()) {
            return Err(PhantomError::BadConfig("sector apex must be finite".into()));
        }
        Ok(())
    }

    /// Whether the pixel at (x, y) lies inside the imaging cone.
    fn contains(&self, x: f64, y: f64, width: usize, height: usize) -> bool {
        if !self.enabled {
            return true;
        }
        let ax = self.apex.0 * width as f64;
        let ay = self.apex.1 * height as f64;
        let (vx, vy) = (x - ax, y - ay);
        if vy <= 0.0 {
            return false;
        }
        let depth = (vx * vx + vy * vy).sqrt();
        if depth > self.max_depth * height as f64 {
            return false;
        }
        vx.atan2(vy).abs() <= self.half_angle_deg.to_radians()
    }
}

/// Sampling ranges for a phantom family. Linear sizes are fractions of
/// `min(width, height)` so the same family scales across resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomParams {
    /// Rendered image / mask size in pixels.
    pub width: usize,
    pub height: usize,
    /// Cavity semi-axis along the base line (fraction of min dimension).
    pub lv_radius: (f64, f64),
    /// Cavity elongation: the apex-directed semi-axis is `lv_radius * this`.
    pub lv_elongation: (f64, f64),
    /// Myocardial band thickness (fraction of min dimension).
    pub myo_thickness: (f64, f64),
    /// Atrial semi-axis below the base line (fraction of min dimension).
    pub la_height: (f64, f64),
    /// Whole-heart tilt, degrees.
    pub rotation_deg: (f64, f64),
    /// Uniform jitter of the base-line center (fraction of min dimension).
    pub center_jitter: f64,
    /// Multiplicative speckle amplitude: intensity scales by `1 + speckle*u`
    /// with `u ~ U(-1, 1)` per pixel.
    pub speckle: f64,
    /// Imaging cone darkening the rendered image outside the wedge.
    pub sector: SectorGeometry,
    /// Physical pixel spacing recorded with extracted keypoints.
    pub spacing: PixelSpacing,
}

impl Default for PhantomParams {
    fn default() -> Self {
        PhantomParams {
            width: 256,
            height: 256,
            lv_radius: (0.11, 0.16),
            lv_elongation: (1.25, 1.55),
            myo_thickness: (0.035, 0.06),
            la_height: (0.08, 0.13),
            rotation_deg: (-8.0, 8.0),
            center_jitter: 0.02,
            speckle: 0.18,
            sector: SectorGeometry::default(),
            spacing: PixelSpacing::isotropic(0.7).expect("positive spacing"),
        }
    }
}

impl PhantomParams {
    pub fn validate(&self) -> Result<(), PhantomError> {
        if self.width < 32 || self.height < 32 {
            return Err(PhantomError::BadConfig(format!(
                "image size {}x{} is too small for a phantom",
                self.width, self.height
            )));
        }
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        let positive = |(lo, _): (f64, f64)| lo > 0.0;
        for (name, range, must_be_positive) in [
            ("lv_radius", self.lv_radius, true),
            ("lv_elongation", self.lv_elongation, true),
            ("myo_thickness", self.myo_thickness, true),
            ("la_height", self.la_height, true),
            ("rotation_deg", self.rotation_deg, false),
        ] {
            if !range_ok(range) {
                return Err(PhantomError::BadConfig(format!(
                    "{name} range ({}, {}) must be finite and ordered",
                    range.0, range.1
                )));
            }
            if must_be_positive && !positive(range) {
                return Err(PhantomError::BadConfig(format!(
                    "{name} range must be strictly positive, got lower bound {}",
                    range.0
                )));
            }
        }
        if !(self.center_jitter.is_finite() && self.center_jitter >= 0.0) {
            return Err(PhantomError::BadConfig("center_jitter must be a finite non-negative value".into()));
        }
        if !(self.speckle.is_finite() && (0.0..1.0).contains(&self.speckle)) {
            return Err(PhantomError::BadConfig(format!("speckle {} must lie in [0, 1)", self.speckle)));
        }
        self.sector.validate()
    }
}

/// The concrete shape drawn for one seed, in pixel units.
struct SampledShape {
    /// Base-line center of the cavity ellipse.
    center: Point,
    /// Clockwise tilt of the local frame, radians.
    theta: f64,
    /// Cavity semi-axes: `rx` along the base, `ry` toward the apex.
    rx: f64,
    ry: f64,
    /// Myocardial band thickness.
    thickness: f64,
    /// Atrial semi-axes below the base.
    la_rx: f64,
    la_ry: f64,
}

impl SampledShape {
    fn sample(rng: &mut ChaCha8Rng, params: &PhantomParams) -> SampledShape {
        let min_dim = params.width.min(params.height) as f64;
        let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| rng.random_range(lo..=hi);
        let rx = draw(rng, params.lv_radius) * min_dim;
        let ry = rx * draw(rng, params.lv_elongation);
        let thickness = draw(rng, params.myo_thickness) * min_dim;
        let la_ry = draw(rng, params.la_height) * min_dim;
        let la_rx = rx + draw(rng, LA_MARGIN_PX);
        let theta = draw(rng, params.rotation_deg).to_radians();
        let jitter = params.center_jitter * min_dim;
        let cx = params.width as f64 / 2.0 + rng.random_range(-1.0..=1.0) * jitter;
        let cy = params.height as f64 * BASE_CENTER_Y + rng.random_range(-1.0..=1.0) * jitter;
        SampledShape { center: Point::new(cx, cy), theta, rx, ry, thickness, la_rx, la_ry }
    }

    /// Checks the rotated bounding boxes of both ellipses against the frame.
    fn check_fit(&self, width: usize, height: usize) -> Result<(), PhantomError> {
        let extent = |a: f64, b: f64| {
            let (sin, cos) = self.theta.sin_cos();
            let ex = ((a * cos).powi(2) + (b * sin).powi(2)).sqrt();
            let ey = ((a * sin).powi(2) + (b * cos).powi(2)).sqrt();
            (ex, ey)
        };
        let (outer_ex, outer_ey) = extent(self.rx + self.thickness, self.ry + self.thickness);
        let (la_ex, la_ey) = extent(self.la_rx, self.la_ry);
        let reach_x = outer_ex.max(la_ex);
        let fits = self.center.x - reach_x >= FIT_MARGIN_PX
            && self.center.x + reach_x <= width as f64 - 1.0 - FIT_MARGIN_PX
            && self.center.y - outer_ey >= FIT_MARGIN_PX
            && self.center.y + la_ey <= height as f64 - 1.0 - FIT_MARGIN_PX;
        if fits {
            Ok(())
        } else {
            Err(PhantomError::InfeasibleGeometry(format!(
                "shape with outer extent ({outer_ex:.1}, {outer_ey:.1})px and atrial extent \
                 ({la_ex:.1}, {la_ey:.1})px around ({:.1}, {:.1}) does not fit in {width}x{height} \
                 with a {FIT_MARGIN_PX}px margin",
                self.center.x, self.center.y
            )))
        }
    }

    /// Local coordinates of the pixel at (x, y): the base-line center maps to
    /// the origin and the tilt is undone, so `qy <= 0` is the ventricular side.
    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let (sin, cos) = self.theta.sin_cos();
        let (dx, dy) = (x - self.center.x, y - self.center.y);
        // Inverse rotation: local = R(-theta) * (p - center).
        (cos * dx + sin * dy, -sin * dx + cos * dy)
    }

    /// Label of the pixel at (x, y), decided in the unrotated local frame.
    fn label_at(&self, x: f64, y: f64) -> Label {
        let (qx, qy) = self.local(x, y);
        self.label_from_local(qx, qy)
    }

    /// Label of the local-frame point (qx, qy).
    fn label_from_local(&self, qx: f64, qy: f64) -> Label {
        let inside = |sx: f64, sy: f64| (qx / sx).powi(2) + (qy / sy).powi(2) <= 1.0;
        if qy <= 0.0 {
            if inside(self.rx, self.ry) {
                Label::Lv
            } else if inside(self.rx + self.thickness, self.ry + self.thickness) {
                Label::Myo
            } else {
                Label::Background
            }
        } else if inside(self.la_rx, self.la_ry) {
            Label::La
        } else {
            Label::Background
        }
    }
}

/// Generates one phantom (image, label mask) pair. Deterministic per seed.
pub fn generate_phantom(seed: u64, params: &PhantomParams) -> Result<(Image, LabelMask), PhantomError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = SampledShape::sample(&mut rng, params);
    shape.check_fit(params.width, params.height)?;

    let (w, h) = (params.width, params.height);
    let mut mask = LabelMask::filled(w, h, Label::Background);
    let mut image = Image::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let label = shape.label_at(x as f64, y as f64);
            mask.set(x, y, label);
            let mean = match label {
                Label::Background => MEAN_BACKGROUND,
                Label::Lv => MEAN_LV,
                Label::Myo => MEAN_MYO,
                Label::La => MEAN_LA,
            };
            let u = rng.random_range(-1.0..=1.0_f64);
            let value = if params.sector.contains(x as f64, y as f64, w, h) {
                (mean as f64 * (1.0 + params.speckle * u)).clamp(0.0, 1.0) as f32
            } else {
                0.0
            };
            image.set(x, y, value);
        }
    }
    Ok((image, mask))
}
