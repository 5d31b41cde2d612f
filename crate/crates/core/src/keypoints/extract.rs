//! Landmark and keypoint extraction from label masks.
//!
//! Landmarks (pixel space):
//! - A, B: extremes of the LV pixels 4-adjacent to LA (the annulus); with
//!   `annulus_from_myo` the MYO–LA interface is used instead. The pair is
//!   labeled so the atrium lies on the positive-cross side of the A→B
//!   direction, which makes the naming mirror-covariant: flipping the mask
//!   left-right swaps the roles of A and B.
//! - C, D: farthest MYO pixels along the extended base line (within 0.75 px
//!   perpendicular distance of it); C on the A side, D on the B side.
//! - E, F: farthest LV / MYO pixel from the base line on the ventricular
//!   side; G: farthest LA pixel on the atrial side. The atrial side is the
//!   side of the LA centroid. All ties resolve to the smaller row-major
//!   index.

use crate::geom::Point;
use crate::imaging::{trace_region, Label, LabelMask, PixelSpacing};
use crate::keypoints::{KeypointError, KeypointSet, SamplingConfig};

type Px = (usize, usize);

/// Landmark pixels A..G in mask coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LandmarkPixels {
    pub a: Px,
    pub b: Px,
    pub c: Px,
    pub d: Px,
    pub e: Px,
    pub f: Px,
    pub g: Px,
}

fn pixels_of(mask: &LabelMask, label: Label) -> Vec<Px> {
    mask.pixels_of(label).collect()
}

fn as_point(p: Px) -> Point {
    Point::new(p.0 as f64, p.1 as f64)
}

/// Pixels of `of` having a 4-neighbor labelled `near`.
fn interface_pixels(mask: &LabelMask, of: Label, near: Label) -> Vec<Px> {
    let (w, h) = (mask.width(), mask.height());
    let near_code = near.code();
    mask.pixels_of(of)
        .filter(|&(x, y)| {
            (x > 0 && mask.get(x - 1, y) == near_code)
                || (x + 1 < w && mask.get(x + 1, y) == near_code)
                || (y > 0 && mask.get(x, y - 1) == near_code)
                || (y + 1 < h && mask.get(x, y + 1) == near_code)
        })
        .collect()
}

/// The most distant pair among `pts` (row-major ordered input); the first
/// element of the result is the pair member with the smaller row-major index.
fn extremal_pair(pts: &[Px]) -> Option<(Px, Px)> {
    if pts.len() < 2 {
        return None;
    }
    let mut best = (0usize, 1usize);
    let mut best_d = -1.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = as_point(pts[i]).sub(as_point(pts[j])).dot(as_point(pts[i]).sub(as_point(pts[j])));
            if d > best_d {
                best_d = d;
                best = (i, j);
            }
        }
    }
    (best_d > 0.0).then(|| (pts[best.0], pts[best.1]))
}

/// Row-major argmax of `score` with strict improvement (ties keep the first,
/// i.e. smaller row-major index). Returns `None` when no score is positive.
fn argmax_positive(pts: &[Px], score: impl Fn(Point) -> f64) -> Option<Px> {
    let mut best: Option<(Px, f64)> = None;
    for &p in pts {
        let s = score(as_point(p));
        if s > 0.0 && best.map_or(true, |(_, bs)| s > bs) {
            best = Some((p, s));
        }
    }
    best.map(|(p, _)| p)
}

pub fn extract_landmarks(
    mask: &LabelMask,
    cfg: &SamplingConfig,
) -> Result<LandmarkPixels, KeypointError> {
    cfg.validate()?;
    for label in Label::STRUCTURES {
        if mask.count(label) == 0 {
            return Err(KeypointError::MissingStructure(label));
        }
    }

    let annulus_source = if cfg.annulus_from_myo { Label::Myo } else { Label::Lv };
    let interface = interface_pixels(mask, annulus_source, Label::La);
    if interface.is_empty() {
        return Err(KeypointError::NoInterface);
    }
    let (a0, b0) = extremal_pair(&interface)
        .ok_or(KeypointError::DegenerateLandmarks("annulus interface narrower than 2 pixels"))?;

    let u0 = as_point(b0)
        .sub(as_point(a0))
        .normalized(1e-12)
        .ok_or(KeypointError::DegenerateLandmarks("base direction is zero"))?;
    let la_px = pixels_of(mask, Label::La);
    let la_sum: f64 = la_px.iter().map(|&p| u0.cross(as_point(p).sub(as_point(a0)))).sum();
    if la_sum == 0.0 {
        return Err(KeypointError::DegenerateLandmarks("LA centroid lies on the base line"));
    }
    // Label the extremal pair so the atrium sits on the positive-cross side
    // of A→B; mirroring the mask then swaps A and B, keeping extraction
    // consistent with mirrored keypoint chains.
    let (a, b) = if la_sum > 0.0 { (a0, b0) } else { (b0, a0) };
    let pa = as_point(a);
    let u = if la_sum > 0.0 { u0 } else { u0.scale(-1.0) };
    // Signed perpendicular distance to the base line (sign picks a side).
    let side = |p: Point| u.cross(p.sub(pa));
    let atrial_sign = 1.0;

    let lv_px = pixels_of(mask, Label::Lv);
    let myo_px = pixels_of(mask, Label::Myo);
    let e = argmax_positive(&lv_px, |p| -atrial_sign * side(p))
        .ok_or(KeypointError::DegenerateLandmarks("no LV pixel on the ventricular side"))?;
    let f = argmax_positive(&myo_px, |p| -atrial_sign * side(p))
        .ok_or(KeypointError::DegenerateLandmarks("no MYO pixel on the ventricular side"))?;
    let g = argmax_positive(&la_px, |p| atrial_sign * side(p))
        .ok_or(KeypointError::DegenerateLandmarks("no LA pixel on the atrial side"))?;

    // C/D: myocardium extremes along the extended base line.
    let on_line: Vec<Px> =
        myo_px.iter().copied().filter(|&p| side(as_point(p)).abs() <= 0.75).collect();
    if on_line.is_empty() {
        return Err(KeypointError::NoInterface);
    }
    let along = |p: Px| u.dot(as_point(p).sub(pa));
    let mut c = on_line[0];
    let mut d = on_line[0];
    for &p in &on_line[1..] {
        if along(p) < along(c) {
            c = p;
        }
        if along(p) > along(d) {
            d = p;
        }
    }
    if c == d {
        return Err(KeypointError::DegenerateLandmarks("single MYO pixel on the base line"));
    }

    Ok(LandmarkPixels { a, b, c, d, e, f, g })
}

/// Index of `target` on `ring`: exact match if present (first occurrence),
/// otherwise the nearest ring pixel within 2.5 px.
fn ring_index_of(ring: &[Px], target: Px) -> Result<usize, KeypointError> {
    if let Some(i) = ring.iter().position(|&p| p == target) {
        return Ok(i);
    }
    let t = as_point(target);
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in ring.iter().enumerate() {
        let d = as_point(p).sub(t).dot(as_point(p).sub(t));
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    match best {
        Some((i, d)) if d <= 6.25 => Ok(i),
        _ => Err(KeypointError::DegenerateLandmarks("landmark is not on its contour")),
    }
}

/// Walk `ring` from `from` to `to` choosing the cyclic direction that does
/// not pass through `avoid`. Endpoints inclusive.
fn arc_between(ring: &[Px], from: usize, to: usize, avoid: usize) -> Vec<Px> {
    let len = ring.len();
    let forward: Vec<Px> = {
        let mut v = Vec::new();
        let mut i = from;
        loop {
            v.push(ring[i]);
            if i == to {
                break;
            }
            i = (i + 1) % len;
        }
        v
    };
    let steps_fwd = (to + len - from) % len;
    let avoid_fwd = avoid != from && avoid != to && (avoid + len - from) % len < steps_fwd.max(1);
    if !avoid_fwd && !(from == to) {
        return forward;
    }
    // Backward walk.
    let mut v = Vec::new();
    let mut i = from;
    loop {
        v.push(ring[i]);
        if i == to {
            break;
        }
        i = (i + len - 1) % len;
    }
    v
}

/// `count` arc-length-equidistant interior samples of the pixel chain
/// (endpoints excluded), with sub-pixel linear interpolation.
fn sample_arc(
    path: &[Px],
    count: usize,
    arc: &'static str,
) -> Result<Vec<Point>, KeypointError> {
    if path.len() < count + 2 {
        return Err(KeypointError::ContourTooShort { arc, needed: count, got: path.len() });
    }
    let pts: Vec<Point> = path.iter().map(|&p| as_point(p)).collect();
    let mut cum = Vec::with_capacity(pts.len());
    let mut total = 0.0;
    cum.push(0.0);
    for w in pts.windows(2) {
        total += w[1].dist(w[0]);
        cum.push(total);
    }
    if total <= 0.0 {
        return Err(KeypointError::ContourTooShort { arc, needed: count, got: path.len() });
    }
    let mut out = Vec::with_capacity(count);
    let mut seg = 0usize;
    for k in 1..=count {
        let target = total * k as f64 / (count + 1) as f64;
        while cum[seg + 1] < target && seg + 2 < cum.len() {
            seg += 1;
        }
        let seg_len = cum[seg + 1] - cum[seg];
        let t = if seg_len > 0.0 { (target - cum[seg]) / seg_len } else { 0.0 };
        out.push(pts[seg].lerp(pts[seg + 1], t));
    }
    Ok(out)
}

/// Extract the full keypoint set from a label mask.
pub fn extract_keypoints(
    mask: &LabelMask,
    spacing: PixelSpacing,
    cfg: &SamplingConfig,
) -> Result<KeypointSet, KeypointError> {
    let lm = extract_landmarks(mask, cfg)?;
    let (w, h) = (mask.width(), mask.height());
    let (n, m) = (cfg.n_side, cfg.m_side);

    let endo_ring = trace_region(w, h, |x, y| mask.get(x, y) == Label::Lv.code())
        .ok_or(KeypointError::MissingStructure(Label::Lv))?;
    let epi_ring = trace_region(w, h, |x, y| {
        let v = mask.get(x, y);
        v == Label::Lv.code() || v == Label::Myo.code()
    })
    .expect("LV is non-empty, so the union is non-empty");
    let la_ring = trace_region(w, h, |x, y| mask.get(x, y) == Label::La.code())
        .ok_or(KeypointError::MissingStructure(Label::La))?;

    // Endo chain: A → E → B.
    let (ia, ie, ib) = (
        ring_index_of(&endo_ring, lm.a)?,
        ring_index_of(&endo_ring, lm.e)?,
        ring_index_of(&endo_ring, lm.b)?,
    );
    let arc_ae = arc_between(&endo_ring, ia, ie, ib);
    let arc_eb = arc_between(&endo_ring, ie, ib, ia);
    let mut endo = Vec::with_capacity(2 * n + 3);
    endo.push(as_point(endo_ring[ia]));
    endo.extend(sample_arc(&arc_ae, n, "endo A–E")?);
    endo.push(as_point(endo_ring[ie]));
    endo.extend(sample_arc(&arc_eb, n, "endo E–B")?);
    endo.push(as_point(endo_ring[ib]));

    // Epi chain: C → F → D.
    let (ic, if_, id) = (
        ring_index_of(&epi_ring, lm.c)?,
        ring_index_of(&epi_ring, lm.f)?,
        ring_index_of(&epi_ring, lm.d)?,
    );
    let arc_cf = arc_between(&epi_ring, ic, if_, id);
    let arc_fd = arc_between(&epi_ring, if_, id, ic);
    let mut epi = Vec::with_capacity(2 * n + 3);
    epi.push(as_point(epi_ring[ic]));
    epi.extend(sample_arc(&arc_cf, n, "epi C–F")?);
    epi.push(as_point(epi_ring[if_]));
    epi.extend(sample_arc(&arc_fd, n, "epi F–D")?);
    epi.push(as_point(epi_ring[id]));

    // LA chain: (A corner) → G → (B corner); corners excluded from output.
    let ig = ring_index_of(&la_ring, lm.g)?;
    let nearest_on_la = |target: Px| -> usize {
        let t = as_point(target);
        let mut best = (0usize, f64::INFINITY);
        for (i, &p) in la_ring.iter().enumerate() {
            let d = as_point(p).sub(t).dot(as_point(p).sub(t));
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    };
    let ica = nearest_on_la(lm.a);
    let icb = nearest_on_la(lm.b);
    if ica == icb {
        return Err(KeypointError::DegenerateLandmarks("LA corners coincide"));
    }
    let arc_ag = arc_between(&la_ring, ica, ig, icb);
    let arc_gb = arc_between(&la_ring, ig, icb, ica);
    let mut la = Vec::with_capacity(2 * m + 1);
    la.extend(sample_arc(&arc_ag, m, "LA A–G")?);
    la.push(as_point(la_ring[ig]));
    la.extend(sample_arc(&arc_gb, m, "LA G–B")?);

    let norm = |pts: Vec<Point>| -> Vec<Point> {
        pts.into_iter().map(|p| Point::new(p.x / w as f64, p.y / h as f64)).collect()
    };
    KeypointSet::new(n, m, norm(endo), norm(epi), norm(la), spacing)
}
