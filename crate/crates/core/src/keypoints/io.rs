//! JSON serialization of keypoint sets.
//!
//! The file format is versioned and self-describing: point arrays are
//! `[x, y]` pairs in normalized coordinates, and the `landmarks` block
//! records the array indices of A..G. Those indices are fully determined by
//! `n_side`/`m_side`, so on load they act as a consistency check against
//! files produced with a different layout convention.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;
use crate::imaging::PixelSpacing;
use crate::keypoints::{KeypointError, KeypointSet};

pub const KEYPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum KeypointIoError {
    #[error("unsupported keypoint file version {0}")]
    UnsupportedVersion(u32),
    #[error("landmark {name} index {got} does not match layout index {expected}")]
    LandmarkIndex { name: &'static str, got: usize, expected: usize },
    #[error("invalid pixel spacing {sx}x{sy}")]
    BadSpacing { sx: f64, sy: f64 },
    #[error(transparent)]
    Invalid(#[from] KeypointError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandmarkIndices {
    a: usize,
    e: usize,
    b: usize,
    c: usize,
    f: usize,
    d: usize,
    g: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpacingRepr {
    sx: f64,
    sy: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeypointFile {
    version: u32,
    n_side: usize,
    m_side: usize,
    endo: Vec<[f64; 2]>,
    epi: Vec<[f64; 2]>,
    la: Vec<[f64; 2]>,
    landmarks: LandmarkIndices,
    spacing: SpacingRepr,
}

fn to_pairs(pts: &[Point]) -> Vec<[f64; 2]> {
    pts.iter().map(|p| [p.x, p.y]).collect()
}

fn to_points(pairs: Vec<[f64; 2]>) -> Vec<Point> {
    pairs.into_iter().map(|[x, y]| Point::new(x, y)).collect()
}

fn file_repr(kps: &KeypointSet) -> KeypointFile {
    KeypointFile {
        version: KEYPOINT_FORMAT_VERSION,
        n_side: kps.n_side(),
        m_side: kps.m_side(),
        endo: to_pairs(kps.endo()),
        epi: to_pairs(kps.epi()),
        la: to_pairs(kps.la()),
        landmarks: LandmarkIndices {
            a: kps.idx_a(),
            e: kps.idx_e(),
            b: kps.idx_b(),
            c: kps.idx_a(),
            f: kps.idx_e(),
            d: kps.idx_b(),
            g: kps.idx_g(),
        },
        spacing: SpacingRepr { sx: kps.spacing().sx, sy: kps.spacing().sy },
    }
}

/// Serialize to pretty-printed JSON.
pub fn write_keypoints<W: Write>(kps: &KeypointSet, mut writer: W) -> Result<(), KeypointIoError> {
    serde_json::to_writer_pretty(&mut writer, &file_repr(kps))?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_keypoints<R: Read>(reader: R) -> Result<KeypointSet, KeypointIoError> {
    let file: KeypointFile = serde_json::from_reader(reader)?;
    if file.version != KEYPOINT_FORMAT_VERSION {
        return Err(KeypointIoError::UnsupportedVersion(file.version));
    }
    let spacing = PixelSpacing::new(file.spacing.sx, file.spacing.sy)
        .map_err(|_| KeypointIoError::BadSpacing { sx: file.spacing.sx, sy: file.spacing.sy })?;
    let kps = KeypointSet::new(
        file.n_side,
        file.m_side,
        to_points(file.endo),
        to_points(file.epi),
        to_points(file.la),
        spacing,
    )?;
    let check = |name: &'static str, got: usize, expected: usize| {
        (got == expected).then_some(()).ok_or(KeypointIoError::LandmarkIndex {
            name,
            got,
            expected,
        })
    };
    check("a", file.landmarks.a, kps.idx_a())?;
    check("e", file.landmarks.e, kps.idx_e())?;
    check("b", file.landmarks.b, kps.idx_b())?;
    check("c", file.landmarks.c, kps.idx_a())?;
    check("f", file.landmarks.f, kps.idx_e())?;
    check("d", file.landmarks.d, kps.idx_b())?;
    check("g", file.landmarks.g, kps.idx_g())?;
    Ok(kps)
}

pub fn save_keypoints<P: AsRef<Path>>(kps: &KeypointSet, path: P) -> Result<(), KeypointIoError> {
    write_keypoints(kps, BufWriter::new(File::create(path)?))
}

pub fn load_keypoints<P: AsRef<Path>>(path: P) -> Result<KeypointSet, KeypointIoError> {
    read_keypoints(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set() -> KeypointSet {
        let n = 3;
        let m = 2;
        let chain = |y0: f64, r: f64| -> Vec<Point> {
            (0..2 * n + 3)
                .map(|i| {
                    let t = i as f64 / (2 * n + 2) as f64 * std::f64::consts::PI;
                    Point::new(0.5 - r * t.cos(), y0 - r * t.sin())
                })
                .collect()
        };
        let la: Vec<Point> = (0..2 * m + 1)
            .map(|i| Point::new(0.3 + 0.1 * i as f64, 0.8))
            .collect();
        KeypointSet::new(
            n,
            m,
            chain(0.6, 0.2),
            chain(0.6, 0.25),
            la,
            PixelSpacing::new(0.25, 0.31).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let kps = sample_set();
        let mut buf = Vec::new();
        write_keypoints(&kps, &mut buf).unwrap();
        let back = read_keypoints(buf.as_slice()).unwrap();
        assert_eq!(kps, back);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let kps = sample_set();
        let mut buf = Vec::new();
        write_keypoints(&kps, &mut buf).unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        v["extra"] = serde_json::json!(42);
        let text = serde_json::to_vec(&v).unwrap();
        assert!(matches!(read_keypoints(text.as_slice()), Err(KeypointIoError::Json(_))));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let kps = sample_set();
        let mut buf = Vec::new();
        write_keypoints(&kps, &mut buf).unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        v["version"] = serde_json::json!(99);
        let text = serde_json::to_vec(&v).unwrap();
        assert!(matches!(
            read_keypoints(text.as_slice()),
            Err(KeypointIoError::UnsupportedVersion(99))
        ));
    }

    #[test]
    fn landmark_index_mismatch_is_rejected() {
        let kps = sample_set();
        let mut buf = Vec::new();
        write_keypoints(&kps, &mut buf).unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        v["landmarks"]["e"] = serde_json::json!(1);
        let text = serde_json::to_vec(&v).unwrap();
        assert!(matches!(
            read_keypoints(text.as_slice()),
            Err(KeypointIoError::LandmarkIndex { name: "e", .. })
        ));
    }

    #[test]
    fn bad_count_is_rejected() {
        let kps = sample_set();
        let mut buf = Vec::new();
        write_keypoints(&kps, &mut buf).unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        v["la"].as_array_mut().unwrap().pop();
        let text = serde_json::to_vec(&v).unwrap();
        assert!(matches!(
            read_keypoints(text.as_slice()),
            Err(KeypointIoError::Invalid(KeypointError::BadCount { .. }))
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kps.json");
        let kps = sample_set();
        save_keypoints(&kps, &path).unwrap();
        assert_eq!(load_keypoints(&path).unwrap(), kps);
    }
}
