//! Contour-keypoint cardiac segmentation toolkit.
//!
//! The pipeline represents the left ventricle (LV), myocardium (MYO) and left
//! atrium (LA) in an apical ultrasound view as a fixed-size set of contour
//! keypoints instead of a dense label mask. A compact CNN encoder summarises
//! the image into an embedding; a dual-ring graph-convolutional decoder turns
//! the embedding into keypoint coordinates (optionally parameterising the
//! epicardium as a positive normal displacement of the endocardium, which
//! makes endo/epi ring crossings structurally impossible). Downstream modules
//! rasterize keypoints back to masks, check anatomical correctness, compute
//! clinical measurements (biplane Simpson volumes, ejection fraction), gate
//! samples by inter-model agreement, and benchmark inference.
//!
//! Everything is deterministic given a seed: synthetic phantom generation,
//! weight initialisation, augmentation, training, and sampling.

pub mod agreement;
pub mod anatomy;
pub mod bench;
pub mod clinical;
pub mod gcn;
pub mod geom;
pub mod gradcheck;
pub mod imaging;
pub mod keypoints;
pub mod metrics;
pub mod nn;
pub mod phantom;

pub use imaging::{Image, Label, LabelMask, PixelSpacing};
pub use keypoints::{DisplacementSet, KeypointSet, LandmarkPixels, SamplingConfig};
