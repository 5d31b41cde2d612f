//! Polygon rasterization: scanline fill with a half-open pixel-center rule,
//! and keypoint-set → label-mask conversion.

use super::{ImagingError, Label, LabelMask};
use crate::geom::{signed_area, Point};
use crate::keypoints::KeypointSet;

/// Fill `poly` (vertices in pixel coordinates) into a boolean grid.
///
/// A pixel `(i, j)` is inside when its center `(i + 0.5, j + 0.5)` is inside
/// the polygon under the even-odd rule with half-open edge crossings
/// (`min_y <= y < max_y`), which makes abutting polygons partition pixels
/// without gaps or double coverage.
pub fn fill_polygon(poly: &[Point], width: usize, height: usize) -> Vec<bool> {
    let mut grid = vec![false; width * height];
    if poly.len() < 3 {
        return grid;
    }
    let mut xs: Vec<f64> = Vec::with_capacity(8);
    for j in 0..height {
        let y = j as f64 + 0.5;
        xs.clear();
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            if (a.y <= y) != (b.y <= y) {
                xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
            }
        }
        xs.sort_by(|p, q| p.partial_cmp(q).expect("crossings are finite"));
        for span in xs.chunks_exact(2) {
            // pixels with x0 <= i + 0.5 < x1
            let lo = (span[0] - 0.5).ceil().max(0.0) as usize;
            let hi_excl = ((span[1] - 0.5).ceil() as isize).clamp(0, width as isize) as usize;
            for i in lo..hi_excl {
                grid[j * width + i] = true;
            }
        }
    }
    grid
}

/// Rasterize a keypoint set to a label mask.
///
/// Polygons: LV = the endo chain closed by the base segment B→A; the
/// epicardial region = the epi chain closed through the base corners
/// D→B→A→C, so its mid-base boundary is the very segment that closes the LV
/// and LA polygons (abutting regions then partition pixels exactly — no
/// sliver of band can appear across the base opening); LA = A → la chain → B
/// closed by the base segment. Overlaps resolve with priority LV > MYO > LA
/// (so MYO is the epicardial fill minus LV).
pub fn rasterize_keypoints(
    kps: &KeypointSet,
    width: usize,
    height: usize,
) -> Result<LabelMask, ImagingError> {
    let scale = Point::new(width as f64, height as f64);
    let to_px = |p: &Point| p.mul(scale);

    let lv_poly: Vec<Point> = kps.endo().iter().map(to_px).collect();
    let mut epi_poly: Vec<Point> = Vec::with_capacity(kps.epi().len() + 2);
    epi_poly.extend(kps.epi().iter().map(to_px));
    epi_poly.push(to_px(&kps.point_b()));
    epi_poly.push(to_px(&kps.point_a()));
    let mut la_poly: Vec<Point> = Vec::with_capacity(kps.la().len() + 2);
    la_poly.push(to_px(&kps.point_a()));
    la_poly.extend(kps.la().iter().map(to_px));
    la_poly.push(to_px(&kps.point_b()));

    for (name, poly) in [("endo", &lv_poly), ("epi", &epi_poly), ("la", &la_poly)] {
        let area = signed_area(poly).abs();
        if poly.len() < 3 || area < 1e-9 {
            return Err(ImagingError::DegenerateGeometry { polygon: name, area });
        }
    }

    let lv = fill_polygon(&lv_poly, width, height);
    let epi = fill_polygon(&epi_poly, width, height);
    let la = fill_polygon(&la_poly, width, height);

    let data = (0..width * height)
        .map(|i| {
            if lv[i] {
                Label::Lv.code()
            } else if epi[i] {
                Label::Myo.code()
            } else if la[i] {
                Label::La.code()
            } else {
                Label::Background.code()
            }
        })
        .collect();
    LabelMask::new(width, height, data)
}
