//! Small 2-D geometry kit shared by the contour, keypoint and clinical
//! modules: points, affine maps, polygon predicates.
//!
//! Coordinates are `f64` throughout; the NN engine converts at its boundary.

use serde::{Deserialize, Serialize};

/// A 2-D point (or vector — the distinction is by use).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    /// Component-wise multiplication (used for pixel→mm scaling).
    pub fn mul(self, o: Point) -> Point {
        Point::new(self.x * o.x, self.y * o.y)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product (signed parallelogram area).
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    /// Unit vector; `None` when shorter than `eps`.
    pub fn normalized(self, eps: f64) -> Option<Point> {
        let n = self.norm();
        (n > eps).then(|| self.scale(1.0 / n))
    }

    /// Rotate 90° counter-clockwise in a y-up frame: (x, y) → (-y, x).
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

/// Row-major 2×3 affine transform `p ↦ A·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub a: [f64; 4], // [a00, a01, a10, a11]
    pub t: Point,
}

impl Affine {
    pub fn identity() -> Self {
        Affine { a: [1.0, 0.0, 0.0, 1.0], t: Point::new(0.0, 0.0) }
    }

    /// Rotation by `theta` radians about `center`, then uniform scale by `s`
    /// about the same center, then translation by `shift`.
    pub fn similarity(center: Point, theta: f64, s: f64, shift: Point) -> Self {
        let (sin, cos) = theta.sin_cos();
        let a = [s * cos, -s * sin, s * sin, s * cos];
        // t = center + shift - A*center
        let ac = Point::new(a[0] * center.x + a[1] * center.y, a[2] * center.x + a[3] * center.y);
        Affine { a, t: center.add(shift).sub(ac) }
    }

    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            self.a[0] * p.x + self.a[1] * p.y + self.t.x,
            self.a[2] * p.x + self.a[3] * p.y + self.t.y,
        )
    }

    /// Inverse transform; `None` if the linear part is singular.
    pub fn inverse(&self) -> Option<Affine> {
        let det = self.a[0] * self.a[3] - self.a[1] * self.a[2];
        if det.abs() < 1e-300 {
            return None;
        }
        let inv = [self.a[3] / det, -self.a[1] / det, -self.a[2] / det, self.a[0] / det];
        let it = Point::new(
            -(inv[0] * self.t.x + inv[1] * self.t.y),
            -(inv[2] * self.t.x + inv[3] * self.t.y),
        );
        Some(Affine { a: inv, t: it })
    }
}

/// Signed polygon area (shoelace). Positive for counter-clockwise order in a
/// y-up frame; image-space callers flip the sign convention as needed.
pub fn signed_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        acc += p.cross(q);
    }
    acc / 2.0
}

/// Even-odd point-in-polygon test with the half-open crossing rule
/// (an edge counts when `min_y <= p.y < max_y`), so shared vertices are not
/// double-counted. Points exactly on a horizontal edge are resolved by the
/// same rule rather than treated specially.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        if (a.y <= p.y) != (b.y <= p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// True when segments AB and CD share at least one point (proper crossings,
/// endpoint touches, and collinear overlaps all count).
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = b.sub(a).cross(c.sub(a));
    let d2 = b.sub(a).cross(d.sub(a));
    let d3 = d.sub(c).cross(a.sub(c));
    let d4 = d.sub(c).cross(b.sub(c));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // Collinear / endpoint cases.
    (d1 == 0.0 && on_segment(a, b, c))
        || (d2 == 0.0 && on_segment(a, b, d))
        || (d3 == 0.0 && on_segment(c, d, a))
        || (d4 == 0.0 && on_segment(c, d, b))
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Crossing parameters of a line `origin + t·dir` with a polygon boundary,
/// using the same half-open rule as `point_in_polygon` but in the rotated
/// frame where `dir` is the x-axis. Returns sorted `t` values; consecutive
/// pairs bound the inside intervals (even-odd rule).
pub fn line_polygon_crossings(origin: Point, dir: Point, poly: &[Point]) -> Vec<f64> {
    // Work in the frame (t, s): t along dir, s along perp(dir).
    let n = dir.perp();
    let mut ts = Vec::new();
    for i in 0..poly.len() {
        let a = poly[i].sub(origin);
        let b = poly[(i + 1) % poly.len()].sub(origin);
        let (sa, sb) = (a.dot(n), b.dot(n));
        if (sa <= 0.0) != (sb <= 0.0) {
            let (ta, tb) = (a.dot(dir), b.dot(dir));
            ts.push(ta + (0.0 - sa) / (sb - sa) * (tb - ta));
        }
    }
    ts.sort_by(|p, q| p.partial_cmp(q).expect("crossing params are finite"));
    ts
}
