//! Raster types and algorithms: grayscale images, label masks, connected
//! components, boundary tracing, polygon rasterization, resizing, PNG I/O.
//!
//! Conventions used throughout the crate:
//! - Pixel `(x, y)` has `x` growing rightwards and `y` growing downwards;
//!   row-major storage, index `y * width + x`.
//! - Label masks use the fixed code set 0 = background, 1 = LV, 2 = MYO,
//!   3 = LA.
//! - Images hold `f32` intensities in `[0, 1]`; files are 8-bit grayscale
//!   PNG (`round(v * 255)` on save, `v / 255` on load).

mod components;
mod contour;
mod png;
mod raster;
mod resize;

pub use components::{connected_components, Components};
pub(crate) use components::components_of;
pub use contour::{extract_contour, trace_region, Contour};
pub use png::{load_image, load_mask, save_image, save_mask};
pub use raster::{fill_polygon, rasterize_keypoints};
pub use resize::{bilinear_sample, resize_image, resize_mask};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Structure codes of a label mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Background = 0,
    Lv = 1,
    Myo = 2,
    La = 3,
}

impl Label {
    pub const STRUCTURES: [Label; 3] = [Label::Lv, Label::Myo, Label::La];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Label> {
        match code {
            0 => Some(Label::Background),
            1 => Some(Label::Lv),
            2 => Some(Label::Myo),
            3 => Some(Label::La),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("buffer length {got} does not match {width}x{height}")]
    DataLength { width: usize, height: usize, got: usize },
    #[error("zero-sized raster {width}x{height}")]
    EmptySize { width: usize, height: usize },
    #[error("value {value} at index {index} is not a label code (0..=3)")]
    LabelOutOfRange { index: usize, value: u8 },
    #[error("intensity {value} at index {index} outside [0, 1]")]
    IntensityOutOfRange { index: usize, value: f32 },
    #[error("label {label:?} has no pixels")]
    LabelAbsent { label: Label },
    #[error("{polygon} polygon is degenerate (|area| = {area:.3e} px^2)")]
    DegenerateGeometry { polygon: &'static str, area: f64 },
    #[error("pixel spacing must be positive, got ({sx}, {sy})")]
    NonPositiveSpacing { sx: f64, sy: f64 },
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Physical pixel size in millimetres per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelSpacing {
    pub sx: f64,
    pub sy: f64,
}

impl PixelSpacing {
    pub fn new(sx: f64, sy: f64) -> Result<Self, ImagingError> {
        if sx <= 0.0 || sy <= 0.0 || !sx.is_finite() || !sy.is_finite() {
            return Err(ImagingError::NonPositiveSpacing { sx, sy });
        }
        Ok(PixelSpacing { sx, sy })
    }

    pub fn isotropic(s: f64) -> Result<Self, ImagingError> {
        PixelSpacing::new(s, s)
    }
}

/// Grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptySize { width, height });
        }
        if data.len() != width * height {
            return Err(ImagingError::DataLength { width, height, got: data.len() });
        }
        if let Some((index, &value)) =
            data.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(ImagingError::IntensityOutOfRange { index, value });
        }
        Ok(Image { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Image { width, height, data: vec![0.0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }
}

/// Label mask over the code set `{0, 1, 2, 3}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptySize { width, height });
        }
        if data.len() != width * height {
            return Err(ImagingError::DataLength { width, height, got: data.len() });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| **v > 3) {
            return Err(ImagingError::LabelOutOfRange { index, value });
        }
        Ok(LabelMask { width, height, data })
    }

    pub fn filled(width: usize, height: usize, label: Label) -> Self {
        LabelMask { width, height, data: vec![label.code(); width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: Label) {
        self.data[y * self.width + x] = label.code();
    }

    pub fn count(&self, label: Label) -> usize {
        let code = label.code();
        self.data.iter().filter(|&&v| v == code).count()
    }

    /// Iterator over `(x, y)` of pixels carrying `label`.
    pub fn pixels_of(&self, label: Label) -> impl Iterator<Item = (usize, usize)> + '_ {
        let code = label.code();
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(move |(_, &v)| v == code)
            .map(move |(i, _)| (i % w, i / w))
    }
}
