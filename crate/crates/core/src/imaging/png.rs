//! 8-bit grayscale PNG I/O for images (intensities × 255) and label masks
//! (raw codes 0..=3).

use std::path::Path;

use image::{GrayImage, ImageReader};

use super::{Image, ImagingError, LabelMask};

pub fn save_image(img: &Image, path: &Path) -> Result<(), ImagingError> {
    let buf: Vec<u8> = img.data().iter().map(|v| (v * 255.0).round() as u8).collect();
    let gray = GrayImage::from_raw(img.width() as u32, img.height() as u32, buf)
        .expect("buffer length matches dimensions");
    gray.save(path)?;
    Ok(())
}

pub fn load_image(path: &Path) -> Result<Image, ImagingError> {
    let gray = ImageReader::open(path)?.decode()?.into_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let data = gray.into_raw().iter().map(|&v| v as f32 / 255.0).collect();
    Image::new(w, h, data)
}

pub fn save_mask(mask: &LabelMask, path: &Path) -> Result<(), ImagingError> {
    let gray = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, mask.data().to_vec())
        .expect("buffer length matches dimensions");
    gray.save(path)?;
    Ok(())
}

pub fn load_mask(path: &Path) -> Result<LabelMask, ImagingError> {
    let gray = ImageReader::open(path)?.decode()?.into_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    LabelMask::new(w, h, gray.into_raw())
}
