//! Geometric and intensity augmentation of (image, keypoints) pairs.
//!
//! One similarity transform (rotation, isotropic scale, translation) is
//! sampled per attempt and applied identically to both halves of the pair:
//! keypoints are mapped analytically through the affine, the image is warped
//! by inverse-mapping each output pixel through the same affine and sampling
//! bilinearly. Mirroring flips the image column order exactly and reverses
//! the keypoint chains via `mirror_keypoints`; brightness shifts the image
//! only. If any transformed keypoint leaves the unit square the transform is
//! resampled, up to a bounded retry budget.

use super::PhantomError;
use crate::geom::{Affine, Point};
use crate::imaging::{bilinear_sample, Image};
use crate::keypoints::{mirror_keypoints, KeypointSet};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Sampling ranges for one augmentation draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Rotation is drawn uniformly from `[-rotation_deg, +rotation_deg]`.
    pub rotation_deg: f64,
    /// Isotropic scale factor range.
    pub scale: (f64, f64),
    /// Translation is drawn from `[-crop/2, +crop/2]` per axis, in normalized
    /// units: a crop fraction of 0.1 shifts the frame by up to 5% either way.
    pub crop: f64,
    /// Additive brightness shift range `[-brightness, +brightness]`; the
    /// result is clamped to [0, 1]. Image only.
    pub brightness: f64,
    /// Probability of mirroring left-right.
    pub mirror_prob: f64,
    /// Resampling budget when keypoints land outside [0,1].
    pub max_retries: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rotation_deg: 10.0,
            scale: (0.9, 1.1),
            crop: 0.08,
            brightness: 0.10,
            mirror_prob: 0.5,
            max_retries: 16,
        }
    }
}

impl AugmentConfig {
    /// A configuration whose every draw is the exact identity.
    pub fn identity() -> Self {
        AugmentConfig {
            rotation_deg: 0.0,
            scale: (1.0, 1.0),
            crop: 0.0,
            brightness: 0.0,
            mirror_prob: 0.0,
            max_retries: 16,
        }
    }

    pub fn validate(&self) -> Result<(), PhantomError> {
        let finite = [
            ("rotation_deg", self.rotation_deg),
            ("scale lower bound", self.scale.0),
            ("scale upper bound", self.scale.1),
            ("crop", self.crop),
            ("brightness", self.brightness),
            ("mirror_prob", self.mirror_prob),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(PhantomError::BadConfig(format!("{name} must be finite, got {v}")));
            }
        }
        for (name, v) in [("rotation_deg", self.rotation_deg), ("crop", self.crop), ("brightness", self.brightness)] {
            if v < 0.0 {
                return Err(PhantomError::BadConfig(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.scale.0 > 0.0 && self.scale.0 <= self.scale.1) {
            return Err(PhantomError::BadConfig(format!(
                "scale range ({}, {}) must be positive and ordered",
                self.scale.0, self.scale.1
            )));
        }
        if !(0.0..=1.0).contains(&self.mirror_prob) {
            return Err(PhantomError::BadConfig(format!(
                "mirror_prob {} must lie in [0, 1]",
                self.mirror_prob
            )));
        }
        if self.max_retries == 0 {
            return Err(PhantomError::BadConfig("max_retries must be at least 1".into()));
        }
        Ok(())
    }
}

/// One concrete draw from an `AugmentConfig`.
struct SampledTransform {
    mirror: bool,
    theta: f64,
    scale: f64,
    shift: Point,
    brightness: f64,
}

impl SampledTransform {
    fn sample(rng: &mut ChaCha8Rng, cfg: &AugmentConfig) -> SampledTransform {
        let sym = |rng: &mut ChaCha8Rng, r: f64| rng.random_range(-r..=r);
        SampledTransform {
            mirror: rng.random_bool(cfg.mirror_prob),
            theta: sym(rng, cfg.rotation_deg).to_radians(),
            scale: rng.random_range(cfg.scale.0..=cfg.scale.1),
            shift: Point::new(sym(rng, cfg.crop / 2.0), sym(rng, cfg.crop / 2.0)),
            brightness: sym(rng, cfg.brightness),
        }
    }

    /// Whether the geometric part maps every point to itself.
    fn is_geometric_identity(&self) -> bool {
        !self.mirror && self.theta == 0.0 && self.scale == 1.0 && self.shift.x == 0.0 && self.shift.y == 0.0
    }

    /// Similarity about the frame center, in normalized coordinates.
    fn affine(&self) -> Affine {
        Affine::similarity(Point::new(0.5, 0.5), self.theta, self.scale, self.shift)
    }
}

/// Maps every keypoint through `m`, or None if any lands outside [0,1].
fn transform_keypoints(kps: &KeypointSet, m: &Affine) -> Option<KeypointSet> {
    let map_chain = |pts: &[Point]| -> Option<Vec<Point>> {
        pts.iter()
            .map(|p| {
                let q = m.apply(*p);
                ((0.0..=1.0).contains(&q.x) && (0.0..=1.0).contains(&q.y)).then_some(q)
            })
            .collect()
    };
    let endo = map_chain(kps.endo())?;
    let epi = map_chain(kps.epi())?;
    let la = map_chain(kps.la())?;
    Some(
        KeypointSet::new(kps.n_side(), kps.m_side(), endo, epi, la, kps.spacing())
            .expect("affine map preserves counts and the checked [0,1] range"),
    )
}

/// Exact left-right flip of the pixel grid.
fn flip_image_x(img: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    let mut out = Image::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, img.get(w - 1 - x, y));
        }
    }
    out
}

/// Warps the image so that features move with `m`: each destination pixel is
/// pulled from the source at `m^{-1}(dst)`, sampled bilinearly with border
/// clamping. Coordinates are normalized by width/height, matching the
/// convention used when keypoints are extracted from label masks.
fn warp_image(img: &Image, m: &Affine) -> Image {
    let inv = m.inverse().expect("similarity with positive scale is invertible");
    let (w, h) = (img.width(), img.height());
    let (wf, hf) = (w as f64, h as f64);
    let mut out = Image::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let src = inv.apply(Point::new(x as f64 / wf, y as f64 / hf));
            out.set(x, y, bilinear_sample(img, src.x * wf, src.y * hf));
        }
    }
    out
}

fn shift_brightness(img: &mut Image, delta: f64) {
    if delta == 0.0 {
        return;
    }
    let (w, h) = (img.width(), img.height());
    for y in 0..h {
        for x in 0..w {
            img.set(x, y, (img.get(x, y) as f64 + delta).clamp(0.0, 1.0) as f32);
        }
    }
}

/// Applies one sampled transform to the pair; None if keypoints leave [0,1].
fn apply_transform(
    img: &Image,
    kps: &KeypointSet,
    t: &SampledTransform,
) -> Option<(Image, KeypointSet)> {
    let (base_img, base_kps);
    if t.mirror {
        base_img = flip_image_x(img);
        base_kps = mirror_keypoints(kps);
    } else {
        base_img = img.clone();
        base_kps = kps.clone();
    }
    if t.is_geometric_identity() {
        let mut out = base_img;
        shift_brightness(&mut out, t.brightness);
        return Some((out, base_kps));
    }
    let m = t.affine();
    let kps2 = transform_keypoints(&base_kps, &m)?;
    let mut out = warp_image(&base_img, &m);
    shift_brightness(&mut out, t.brightness);
    Some((out, kps2))
}

/// Augments an (image, keypoints) pair with one randomly drawn mirror +
/// similarity + brightness transform. Deterministic per seed. Transforms that
/// push any keypoint outside [0,1] are redrawn up to `cfg.max_retries` times;
/// exhaustion is an error.
pub fn augment(
    img: &Image,
    kps: &KeypointSet,
    cfg: &AugmentConfig,
    seed: u64,
) -> Result<(Image, KeypointSet), PhantomError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.max_retries {
        let t = SampledTransform::sample(&mut rng, cfg);
        if let Some(pair) = apply_transform(img, kps, &t) {
            return Ok(pair);
        }
    }
    Err(PhantomError::RetriesExhausted { tries: cfg.max_retries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::PixelSpacing;

    /// A symmetric, well-centered keypoint set for transform tests: cavity
    /// half-circle of radius 0.18 about (0.5, 0.5), wall offset 0.05, atrial
    /// half-ellipse below the base.
    fn symmetric_keypoints() -> KeypointSet {
        let (n_side, m_side) = (20usize, 10usize);
        let endo_len = 2 * n_side + 3;
        let la_len = 2 * m_side + 1;
        let (cx, cy) = (0.5, 0.5);
        let (rx, ry) = (0.18, 0.18);
        let arc = |i: usize, len: usize, sx: f64, sy: f64, below: bool| {
            let t = i as f64 / (len - 1) as f64 * std::f64::consts::PI;
            let y = if below { cy + sy * t.sin() } else { cy - sy * t.sin() };
            Point::new(cx - sx * t.cos(), y)
        };
        let endo: Vec<Point> = (0..endo_len).map(|i| arc(i, endo_len, rx, ry, false)).collect();
        let epi: Vec<Point> = (0..endo_len).map(|i| arc(i, endo_len, rx + 0.05, ry + 0.05, false)).collect();
        let la: Vec<Point> = (1..=la_len)
            .map(|i| {
                let t = i as f64 / (la_len + 1) as f64 * std::f64::consts::PI;
                Point::new(cx - 0.19 * t.cos(), cy + 0.11 * t.sin())
            })
            .collect();
        KeypointSet::new(n_side, m_side, endo, epi, la, PixelSpacing::isotropic(0.7).unwrap()).unwrap()
    }

    fn noise_image(seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = Image::zeros(64, 64);
        for y in 0..64 {
            for x in 0..64 {
                img.set(x, y, rng.random_range(0.0..1.0_f32));
            }
        }
        img
    }

    #[test]
    fn identity_config_returns_unchanged_pair() {
        let img = noise_image(5);
        let kps = symmetric_keypoints();
        let (img2, kps2) = augment(&img, &kps, &AugmentConfig::identity(), 123).unwrap();
        assert_eq!(img.data(), img2.data());
        assert_eq!(kps.endo(), kps2.endo());
        assert_eq!(kps.epi(), kps2.epi());
        assert_eq!(kps.la(), kps2.la());
    }

    #[test]
    fn quarter_turn_moves_keypoints_exactly_like_the_affine() {
        let img = noise_image(6);
        let kps = symmetric_keypoints();
        let t = SampledTransform {
            mirror: false,
            theta: std::f64::consts::FRAC_PI_2,
            scale: 1.0,
            shift: Point::new(0.0, 0.0),
            brightness: 0.0,
        };
        let (_, kps2) = apply_transform(&img, &kps, &t).expect("centered points stay in frame");
        // A quarter turn about the center sends (x, y) to (1 - y, x) up to
        // the rotation sign convention used by the affine itself.
        let m = t.affine();
        let (sin, cos) = (std::f64::consts::FRAC_PI_2.sin(), std::f64::consts::FRAC_PI_2.cos());
        for (p, q) in kps.endo().iter().zip(kps2.endo()) {
            let expect = m.apply(*p);
            assert!((q.x - expect.x).abs() < 1e-6 && (q.y - expect.y).abs() < 1e-6);
            // And the affine really is the analytic quarter turn about center.
            let (dx, dy) = (p.x - 0.5, p.y - 0.5);
            let rot = Point::new(0.5 + cos * dx - sin * dy, 0.5 + sin * dx + cos * dy);
            assert!((q.x - rot.x).abs() < 1e-6 && (q.y - rot.y).abs() < 1e-6);
        }
    }

    #[test]
    fn same_seed_is_deterministic() {
        let img = noise_image(7);
        let kps = symmetric_keypoints();
        let cfg = AugmentConfig::default();
        let (img_a, kps_a) = augment(&img, &kps, &cfg, 42).unwrap();
        let (img_b, kps_b) = augment(&img, &kps, &cfg, 42).unwrap();
        assert_eq!(img_a.data(), img_b.data());
        assert_eq!(kps_a.endo(), kps_b.endo());
        let (img_c, _) = augment(&img, &kps, &cfg, 43).unwrap();
        assert_ne!(img_a.data(), img_c.data());
    }

    #[test]
    fn brightness_shifts_image_only() {
        let img = noise_image(8);
        let kps = symmetric_keypoints();
        let cfg = AugmentConfig { brightness: 0.5, ..AugmentConfig::identity() };
        let (img2, kps2) = augment(&img, &kps, &cfg, 9).unwrap();
        assert_eq!(kps.endo(), kps2.endo());
        assert_ne!(img.data(), img2.data());
        // Shifted values remain clamped to [0, 1].
        assert!(img2.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn mirror_only_flips_image_columns_and_keypoint_order() {
        let img = noise_image(9);
        let kps = symmetric_keypoints();
        let cfg = AugmentConfig { mirror_prob: 1.0, ..AugmentConfig::identity() };
        let (img2, kps2) = augment(&img, &kps, &cfg, 10).unwrap();
        assert_eq!(img2.get(0, 0), img.get(63, 0));
        let expect = mirror_keypoints(&kps);
        assert_eq!(kps2.endo(), expect.endo());
        assert_eq!(kps2.la(), expect.la());
    }

    #[test]
    fn out_of_frame_transforms_exhaust_retries() {
        let img = noise_image(10);
        let kps = symmetric_keypoints();
        let cfg = AugmentConfig { scale: (4.0, 4.0), max_retries: 8, ..AugmentConfig::identity() };
        match augment(&img, &kps, &cfg, 11) {
            Err(PhantomError::RetriesExhausted { tries: 8 }) => {}
            other => panic!("expected RetriesExhausted, got {other:?}"),
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let img = noise_image(11);
        let kps = symmetric_keypoints();
        let bad_scale = AugmentConfig { scale: (1.2, 0.8), ..AugmentConfig::default() };
        assert!(matches!(augment(&img, &kps, &bad_scale, 0), Err(PhantomError::BadConfig(_))));
        let bad_prob = AugmentConfig { mirror_prob: 1.5, ..AugmentConfig::default() };
        assert!(matches!(augment(&img, &kps, &bad_prob, 0), Err(PhantomError::BadConfig(_))));
    }

    #[test]
    fn mirrored_keypoints_match_extraction_from_mirrored_mask() {
        use crate::imaging::{Label, LabelMask};
        use crate::keypoints::{extract_keypoints, SamplingConfig};
        use crate::phantom::{generate_phantom, PhantomParams};

        // Generic tilts keep boundary landmarks unique; an exactly axis-
        // aligned ellipse has a flat apex plateau whose tie-break is not
        // mirror-covariant.
        let params = PhantomParams::default();
        let cfg = SamplingConfig::default();
        let aug = AugmentConfig { mirror_prob: 1.0, ..AugmentConfig::identity() };
        for seed in [21u64, 22, 23, 24, 25] {
            let (img, mask) = generate_phantom(seed, &params).unwrap();
            let kps = extract_keypoints(&mask, params.spacing, &cfg).unwrap();
            let (_, kps_aug) = augment(&img, &kps, &aug, 3).unwrap();

            // Flip the mask columns exactly and re-extract.
            let (w, h) = (mask.width(), mask.height());
            let mut flipped = LabelMask::filled(w, h, Label::Background);
            for y in 0..h {
                for x in 0..w {
                    flipped.set(x, y, Label::from_code(mask.get(w - 1 - x, y)).unwrap());
                }
            }
            let kps_re = extract_keypoints(&flipped, params.spacing, &cfg).unwrap();

            let tol = 2.0 / w as f64; // two pixels, in normalized units
            for (chain_a, chain_b) in [
                (kps_aug.endo(), kps_re.endo()),
                (kps_aug.epi(), kps_re.epi()),
                (kps_aug.la(), kps_re.la()),
            ] {
                for (a, b) in chain_a.iter().zip(chain_b) {
                    assert!(
                        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol,
                        "seed {seed}: mirror mismatch {a:?} vs {b:?}"
                    );
                }
            }
        }
    }
}
