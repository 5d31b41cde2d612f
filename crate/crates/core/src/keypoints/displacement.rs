//! Displacement parameterisation of the epicardium.
//!
//! `epi[i] = endo[i] + disp[i] · n̂(endo, i)` with `disp[i] >= DISP_EPSILON`,
//! where `n̂` is the boundary normal oriented away from the ring centroid.
//! Because the displacement is strictly positive, the epicardial ring cannot
//! cross to the inside of the endocardial ring.

use crate::geom::Point;
use crate::keypoints::{DisplacementSet, KeypointError, KeypointSet};

/// Lower clamp for displacements (normalized coordinates).
pub const DISP_EPSILON: f64 = 1e-4;

/// Boundary normal at `ring[i]`, unit length, oriented away from the ring
/// centroid (ties keep the unflipped 90°-clockwise perpendicular of the
/// tangent).
///
/// The tangent is the central difference of the two neighboring points. For
/// `closed = false` the array is an open chain and the one-sided neighbor
/// replaces the missing one at the ends; for `closed = true` indexing wraps.
pub fn outward_normal(ring: &[Point], i: usize, closed: bool) -> Result<Point, KeypointError> {
    assert!(i < ring.len(), "index {i} out of bounds for ring of {}", ring.len());
    assert!(ring.len() >= 2, "ring needs at least two points");
    let len = ring.len();
    let (prev, next) = if closed {
        (ring[(i + len - 1) % len], ring[(i + 1) % len])
    } else if i == 0 {
        (ring[0], ring[1])
    } else if i == len - 1 {
        (ring[len - 2], ring[len - 1])
    } else {
        (ring[i - 1], ring[i + 1])
    };
    let tangent = next.sub(prev);
    // perp() is 90° counter-clockwise in a y-up frame; orientation is fixed
    // against the centroid below, so the initial handedness only matters for
    // the documented tie case.
    let n = tangent
        .perp()
        .normalized(1e-12)
        .ok_or(KeypointError::ZeroTangent { index: i })?;
    let centroid = ring
        .iter()
        .fold(Point::new(0.0, 0.0), |acc, p| acc.add(*p))
        .scale(1.0 / len as f64);
    if n.dot(ring[i].sub(centroid)) < 0.0 {
        Ok(n.scale(-1.0))
    } else {
        Ok(n)
    }
}

/// Project the epicardium of `kps` onto the endo normals.
///
/// Displacements are the scalar projections `(epi[i] − endo[i]) · n̂_i`,
/// clamped to `>= DISP_EPSILON` by `DisplacementSet::new`.
pub fn to_displacement(kps: &KeypointSet) -> Result<DisplacementSet, KeypointError> {
    let endo = kps.endo();
    let mut disp = Vec::with_capacity(endo.len());
    for (i, (en, ep)) in endo.iter().zip(kps.epi()).enumerate() {
        let n = outward_normal(endo, i, false)?;
        disp.push(ep.sub(*en).dot(n));
    }
    DisplacementSet::new(
        kps.n_side(),
        kps.m_side(),
        endo.to_vec(),
        kps.la().to_vec(),
        disp,
        kps.spacing(),
    )
}

/// Materialise the epicardium from a displacement set; coordinates are
/// clamped to `[0, 1]`.
pub fn from_displacement(ds: &DisplacementSet) -> Result<KeypointSet, KeypointError> {
    let endo = ds.endo();
    let mut epi = Vec::with_capacity(endo.len());
    for (i, (en, d)) in endo.iter().zip(ds.disp()).enumerate() {
        let n = outward_normal(endo, i, false)?;
        let p = en.add(n.scale(*d));
        epi.push(Point::new(p.x.clamp(0.0, 1.0), p.y.clamp(0.0, 1.0)));
    }
    KeypointSet::new(
        ds.n_side(),
        ds.m_side(),
        endo.to_vec(),
        epi,
        ds.la().to_vec(),
        ds.spacing(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::PixelSpacing;
    use std::f64::consts::PI;

    fn spacing() -> PixelSpacing {
        PixelSpacing::isotropic(0.3).unwrap()
    }

    /// Concentric half-ellipse rings + LA arc, sized like real keypoints.
    fn ring_set(n_side: usize, m_side: usize, r_endo: f64, r_epi: f64) -> KeypointSet {
        let c = Point::new(0.5, 0.62);
        let half = |r: f64, k: usize, total: usize| -> Point {
            let phi = PI * (1.0 - k as f64 / (total - 1) as f64);
            Point::new(c.x + r * phi.cos(), c.y - r * phi.sin())
        };
        let endo_len = 2 * n_side + 3;
        let endo: Vec<Point> = (0..endo_len).map(|k| half(r_endo, k, endo_len)).collect();
        let epi: Vec<Point> = (0..endo_len).map(|k| half(r_epi, k, endo_len)).collect();
        let la_len = 2 * m_side + 1;
        let la: Vec<Point> = (0..la_len)
            .map(|k| {
                let phi = PI + PI * (k + 1) as f64 / (la_len + 1) as f64;
                Point::new(c.x + 0.15 * phi.cos(), c.y - 0.1 * phi.sin())
            })
            .collect();
        KeypointSet::new(n_side, m_side, endo, epi, la, spacing()).unwrap()
    }

    #[test]
    fn hexagon_normals_point_radially_outward() {
        let c = Point::new(0.5, 0.5);
        let hex: Vec<Point> = (0..6)
            .map(|k| {
                let phi = PI / 3.0 * k as f64;
                Point::new(c.x + 0.3 * phi.cos(), c.y + 0.3 * phi.sin())
            })
            .collect();
        for i in 0..6 {
            let n = outward_normal(&hex, i, true).unwrap();
            let radial = hex[i].sub(c).normalized(1e-12).unwrap();
            assert!((n.x - radial.x).abs() < 1e-6 && (n.y - radial.y).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_tangent_is_rejected() {
        let ring = vec![Point::new(0.2, 0.2), Point::new(0.2, 0.2), Point::new(0.5, 0.5)];
        let err = outward_normal(&ring, 0, false).unwrap_err();
        assert!(matches!(err, KeypointError::ZeroTangent { index: 0 }));
    }

    #[test]
    fn concentric_rings_give_near_constant_displacement() {
        let kps = ring_set(20, 10, 0.2, 0.27);
        let ds = to_displacement(&kps).unwrap();
        for d in ds.disp() {
            // Interior points are almost exactly radial; open-chain endpoints
            // use one-sided tangents, which tilts the normal by half a step.
            assert!((d - 0.07).abs() < 2e-3, "displacement {d}");
        }
    }

    #[test]
    fn displacement_round_trip_is_exact_on_normal_rays() {
        let kps = ring_set(8, 4, 0.2, 0.26);
        let ds = to_displacement(&kps).unwrap();
        let back = from_displacement(&ds).unwrap();
        let ds2 = to_displacement(&back).unwrap();
        for (a, b) in ds.disp().iter().zip(ds2.disp()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_displacements_clamp_to_epsilon() {
        let kps = ring_set(8, 4, 0.2, 0.26);
        let ds = to_displacement(&kps).unwrap();
        let forced = DisplacementSet::new(
            ds.n_side(),
            ds.m_side(),
            ds.endo().to_vec(),
            ds.la().to_vec(),
            vec![0.0; ds.disp().len()],
            ds.spacing(),
        )
        .unwrap();
        assert!(forced.disp().iter().all(|&d| d == DISP_EPSILON));
    }

    #[test]
    fn from_displacement_keeps_epi_outside_endo() {
        let kps = ring_set(20, 10, 0.2, 0.27);
        let ds = to_displacement(&kps).unwrap();
        let out = from_displacement(&ds).unwrap();
        for (i, (en, ep)) in out.endo().iter().zip(out.epi()).enumerate() {
            let n = outward_normal(out.endo(), i, false).unwrap();
            assert!(ep.sub(*en).dot(n) >= DISP_EPSILON * 0.99);
        }
    }
}
