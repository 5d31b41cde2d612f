//! Resampling: bilinear for images, nearest-neighbor for label masks.

use super::{Image, ImagingError, LabelMask};

/// Bilinear sample at a continuous pixel coordinate, clamped at the borders.
/// Integer coordinates hit pixel values exactly.
pub fn bilinear_sample(img: &Image, x: f64, y: f64) -> f32 {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = (x - x0) as f32;
    let fy = (y - y0) as f32;
    let clamp = |v: isize, hi: isize| v.clamp(0, hi - 1) as usize;
    let (ix0, iy0) = (clamp(x0 as isize, w), clamp(y0 as isize, h));
    let (ix1, iy1) = (clamp(x0 as isize + 1, w), clamp(y0 as isize + 1, h));
    let top = img.get(ix0, iy0) * (1.0 - fx) + img.get(ix1, iy0) * fx;
    let bot = img.get(ix0, iy1) * (1.0 - fx) + img.get(ix1, iy1) * fx;
    top * (1.0 - fy) + bot * fy
}

/// Map a destination pixel index to the source coordinate under pixel-center
/// alignment; the identity when sizes match.
fn src_coord(dst: usize, src_len: usize, dst_len: usize) -> f64 {
    (dst as f64 + 0.5) * (src_len as f64 / dst_len as f64) - 0.5
}

/// Bilinear image resize.
pub fn resize_image(img: &Image, width: usize, height: usize) -> Result<Image, ImagingError> {
    if width == 0 || height == 0 {
        return Err(ImagingError::EmptySize { width, height });
    }
    let mut data = Vec::with_capacity(width * height);
    for j in 0..height {
        let sy = src_coord(j, img.height(), height);
        for i in 0..width {
            let sx = src_coord(i, img.width(), width);
            data.push(bilinear_sample(img, sx, sy).clamp(0.0, 1.0));
        }
    }
    Image::new(width, height, data)
}

/// Nearest-neighbor mask resize (labels are categorical).
pub fn resize_mask(mask: &LabelMask, width: usize, height: usize) -> Result<LabelMask, ImagingError> {
    if width == 0 || height == 0 {
        return Err(ImagingError::EmptySize { width, height });
    }
    let mut data = Vec::with_capacity(width * height);
    for j in 0..height {
        let sy = src_coord(j, mask.height(), height).round().clamp(0.0, mask.height() as f64 - 1.0)
            as usize;
        for i in 0..width {
            let sx = src_coord(i, mask.width(), width).round().clamp(0.0, mask.width() as f64 - 1.0)
                as usize;
            data.push(mask.get(sx, sy));
        }
    }
    LabelMask::new(width, height, data)
}
