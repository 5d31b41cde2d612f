//! Training objective: summed Euclidean keypoint error plus (for the
//! displacement head) a mean absolute displacement error.
//!
//! `L = Σᵢ ‖p̂ᵢ − pᵢ‖₂  +  (1/|endo|) Σⱼ |d̂ⱼ − dⱼ|`
//!
//! where `i` runs over all keypoints of all three chains in normalized
//! coordinates and `j` over the endocardial slots. Predictions enter
//! unclamped; target displacements are recovered from the target keypoints
//! with the same normal construction the model uses to materialize the
//! epicardium.

use crate::gcn::model::DecodedKeypoints;
use crate::gcn::GcnError;
use crate::keypoints::{to_displacement, KeypointSet};
use crate::nn::Real;

/// Gradients of a scalar loss with respect to the decoded model outputs.
#[derive(Debug, Clone)]
pub struct KeypointGrads<T> {
    pub endo: Vec<[T; 2]>,
    pub epi: Vec<[T; 2]>,
    pub la: Vec<[T; 2]>,
    /// Present iff the prediction carried displacements.
    pub disp: Option<Vec<T>>,
}

/// Loss value split into its two terms (`total = point_term + disp_term`).
#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub point_term: T,
    pub disp_term: T,
}

fn chain_term<T: Real>(
    pred: &[[T; 2]],
    target: &[crate::geom::Point],
    grads: &mut [[T; 2]],
) -> T {
    let tiny = T::from_f64(1e-12);
    let mut sum = T::zero();
    for ((p, t), g) in pred.iter().zip(target).zip(grads) {
        let ex = p[0] - T::from_f64(t.x);
        let ey = p[1] - T::from_f64(t.y);
        let norm = (ex * ex + ey * ey).sqrt();
        sum += norm;
        if norm > tiny {
            g[0] = ex / norm;
            g[1] = ey / norm;
        }
    }
    sum
}

/// Compute the loss and its gradients wrt the decoded outputs.
///
/// Errors with `LayoutMismatch` if prediction and target chain lengths
/// disagree.
pub fn keypoint_loss<T: Real>(
    pred: &DecodedKeypoints<T>,
    target: &KeypointSet,
) -> Result<(LossBreakdown<T>, KeypointGrads<T>), GcnError> {
    for (name, got, expected) in [
        ("predicted endo", pred.endo.len(), target.endo().len()),
        ("predicted epi", pred.epi.len(), target.epi().len()),
        ("predicted la", pred.la.len(), target.la().len()),
    ] {
        if got != expected {
            return Err(GcnError::LayoutMismatch { array: name, expected, got });
        }
    }

    let mut grads = KeypointGrads {
        endo: vec![[T::zero(); 2]; pred.endo.len()],
        epi: vec![[T::zero(); 2]; pred.epi.len()],
        la: vec![[T::zero(); 2]; pred.la.len()],
        disp: None,
    };
    let mut point_term = T::zero();
    point_term += chain_term(&pred.endo, target.endo(), &mut grads.endo);
    point_term += chain_term(&pred.epi, target.epi(), &mut grads.epi);
    point_term += chain_term(&pred.la, target.la(), &mut grads.la);

    let mut disp_term = T::zero();
    if let Some(d_pred) = &pred.disp {
        if d_pred.len() != target.endo().len() {
            return Err(GcnError::LayoutMismatch {
                array: "predicted displacements",
                expected: target.endo().len(),
                got: d_pred.len(),
            });
        }
        let d_target = to_displacement(target)?;
        let inv = T::from_f64(1.0 / d_pred.len() as f64);
        let mut g = vec![T::zero(); d_pred.len()];
        for ((dp, dt), gd) in d_pred.iter().zip(d_target.disp()).zip(&mut g) {
            let diff = *dp - T::from_f64(*dt);
            disp_term += diff.abs() * inv;
            if diff > T::zero() {
                *gd = inv;
            } else if diff < T::zero() {
                *gd = -inv;
            }
        }
        grads.disp = Some(g);
    }

    let breakdown =
        LossBreakdown { total: point_term + disp_term, point_term, disp_term };
    Ok((breakdown, grads))
}
