//! Horizontal mirroring of keypoint sets.
//!
//! Mirroring maps x to 1 − x in normalized coordinates and swaps the two
//! sides of the heart, so every array is reversed to restore the canonical
//! ordering (A before B in traversal order, C before D, LA from the A corner
//! to the B corner).

use crate::geom::Point;
use crate::keypoints::KeypointSet;

pub fn mirror_keypoints(kps: &KeypointSet) -> KeypointSet {
    let flip = |pts: &[Point]| -> Vec<Point> {
        pts.iter().rev().map(|p| Point::new(1.0 - p.x, p.y)).collect()
    };
    KeypointSet::new(
        kps.n_side(),
        kps.m_side(),
        flip(kps.endo()),
        flip(kps.epi()),
        flip(kps.la()),
        kps.spacing(),
    )
    .expect("mirroring preserves counts and the [0,1] range")
}
