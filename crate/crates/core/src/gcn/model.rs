//! Encoder + ring-decoder model: image in, keypoint rings out.

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::gcn::ring_conv::{RingConv, RingConvCache};
use crate::gcn::topology::{InnerSlot, OuterSlot, RingTopology, TOPOLOGY_VERSION};
use crate::gcn::{DecoderConfig, GcnError, HeadKind, KeypointGrads};
use crate::imaging::{Image, PixelSpacing};
use crate::keypoints::{from_displacement, DisplacementSet, KeypointSet, SamplingConfig, DISP_EPSILON};
use crate::nn::{
    load_weights_file, save_weights_file, Dense, DenseCache, Encoder, EncoderCache, EncoderConfig,
    Real, Tensor,
};

/// Version of the model file header.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Canonical-anatomy template the heads are residual on: a half-ellipse LV
/// cavity with its base at y = 0.62, a constant-thickness wall, and a
/// half-ellipse atrium below the base. Normalized coordinates.
const TEMPLATE_CX: f64 = 0.5;
const TEMPLATE_BASE_Y: f64 = 0.62;
const TEMPLATE_ENDO_RX: f64 = 0.24;
const TEMPLATE_ENDO_RY: f64 = 0.34;
const TEMPLATE_LA_RX: f64 = 0.26;
const TEMPLATE_LA_RY: f64 = 0.14;
/// Template wall thickness = epicardial displacement of the template.
const TEMPLATE_WALL: f64 = 0.05;
/// Residual heads start with weights scaled down by this factor so a fresh
/// model outputs contours near the template.
const HEAD_INIT_SCALE: f64 = 0.01;

/// Numerically stable `ln(1 + e^z)`.
fn softplus<T: Real>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

/// Numerically stable logistic function (the derivative of softplus).
fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Decoded model outputs in normalized coordinates, *not* clamped to
/// `[0, 1]` (clamping happens when building a [`KeypointSet`], outside any
/// loss computation).
#[derive(Debug, Clone)]
pub struct DecodedKeypoints<T> {
    pub endo: Vec<[T; 2]>,
    /// Raw outer-ring coordinates (coordinate head) or the materialized
    /// `endo + d·n̂` ring (displacement head).
    pub epi: Vec<[T; 2]>,
    pub la: Vec<[T; 2]>,
    /// Strictly positive epicardial displacements (displacement head only).
    pub disp: Option<Vec<T>>,
}

/// Intermediate values of [`materialize_epi`] needed for its backward pass.
#[derive(Debug, Clone)]
pub struct MaterializeCache<T> {
    /// Outward unit normal per endocardial point.
    normals: Vec<[T; 2]>,
    /// Length of the (perpendicular) tangent before normalization.
    norms: Vec<T>,
    /// Orientation sign fixed against the chain centroid (±1).
    signs: Vec<T>,
    disp: Vec<T>,
}

/// Offset an open endocardial chain outward: `epi[i] = endo[i] + d[i]·n̂[i]`.
///
/// The normal is the 90°-rotated central-difference tangent (one-sided at
/// the chain ends), unit-normalized and oriented away from the chain
/// centroid — the same construction the displacement round-trip uses, so
/// training-time materialization and [`from_displacement`] agree.
pub fn materialize_epi<T: Real>(
    endo: &[[T; 2]],
    disp: &[T],
) -> Result<(Vec<[T; 2]>, MaterializeCache<T>), GcnError> {
    if endo.len() != disp.len() {
        return Err(GcnError::LayoutMismatch {
            array: "displacements",
            expected: endo.len(),
            got: disp.len(),
        });
    }
    if endo.len() < 2 {
        return Err(GcnError::LayoutMismatch { array: "endo chain", expected: 2, got: endo.len() });
    }
    let n = endo.len();
    let inv_n = T::from_f64(1.0 / n as f64);
    let (mut cx, mut cy) = (T::zero(), T::zero());
    for p in endo {
        cx += p[0];
        cy += p[1];
    }
    cx *= inv_n;
    cy *= inv_n;

    let eps = T::from_f64(1e-12);
    let mut epi = Vec::with_capacity(n);
    let mut cache = MaterializeCache {
        normals: Vec::with_capacity(n),
        norms: Vec::with_capacity(n),
        signs: Vec::with_capacity(n),
        disp: disp.to_vec(),
    };
    for i in 0..n {
        let (prev, next) = match i {
            0 => (endo[0], endo[1]),
            _ if i == n - 1 => (endo[n - 2], endo[n - 1]),
            _ => (endo[i - 1], endo[i + 1]),
        };
        let t = [next[0] - prev[0], next[1] - prev[1]];
        // 90° counter-clockwise rotation of the tangent.
        let u = [-t[1], t[0]];
        let norm = (u[0] * u[0] + u[1] * u[1]).sqrt();
        if norm < eps {
            return Err(GcnError::ZeroTangent { index: i });
        }
        let mut nx = u[0] / norm;
        let mut ny = u[1] / norm;
        // Ties (dot == 0) keep the unflipped orientation.
        let sign = if nx * (endo[i][0] - cx) + ny * (endo[i][1] - cy) < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        nx *= sign;
        ny *= sign;
        epi.push([endo[i][0] + disp[i] * nx, endo[i][1] + disp[i] * ny]);
        cache.normals.push([nx, ny]);
        cache.norms.push(norm);
        cache.signs.push(sign);
    }
    Ok((epi, cache))
}

/// Back-propagate through [`materialize_epi`].
///
/// Returns `(grad_endo, grad_disp)`. The orientation sign and the centroid
/// enter only through the piecewise-constant sign, whose derivative is zero
/// almost everywhere, so they are treated as constants.
pub fn materialize_epi_backward<T: Real>(
    cache: &MaterializeCache<T>,
    grad_epi: &[[T; 2]],
) -> Result<(Vec<[T; 2]>, Vec<T>), GcnError> {
    let n = cache.normals.len();
    if grad_epi.len() != n {
        return Err(GcnError::LayoutMismatch { array: "grad_epi", expected: n, got: grad_epi.len() });
    }
    let mut grad_endo = vec![[T::zero(); 2]; n];
    let mut grad_disp = vec![T::zero(); n];
    for i in 0..n {
        let g = grad_epi[i];
        let nrm = cache.normals[i];
        grad_endo[i][0] += g[0];
        grad_endo[i][1] += g[1];
        grad_disp[i] = nrm[0] * g[0] + nrm[1] * g[1];
        // grad wrt the unnormalized perpendicular u: (d·s/‖u‖)·(g − n̂(n̂·g)).
        let coeff = cache.disp[i] * cache.signs[i] / cache.norms[i];
        let ndotg = grad_disp[i];
        let gu = [coeff * (g[0] - nrm[0] * ndotg), coeff * (g[1] - nrm[1] * ndotg)];
        // u = (−t_y, t_x) ⇒ grad_t = (gu_y, −gu_x).
        let gt = [gu[1], -gu[0]];
        let (plus, minus) = match i {
            0 => (1, 0),
            _ if i == n - 1 => (n - 1, n - 2),
            _ => (i + 1, i - 1),
        };
        grad_endo[plus][0] += gt[0];
        grad_endo[plus][1] += gt[1];
        grad_endo[minus][0] -= gt[0];
        grad_endo[minus][1] -= gt[1];
    }
    Ok((grad_endo, grad_disp))
}

/// Activation record of one full forward pass.
#[derive(Debug)]
pub struct GcnCache<T: Real> {
    enc: EncoderCache<T>,
    proj: DenseCache<T>,
    rings: Vec<RingConvCache<T>>,
    /// Final head output plus template, `[ring_size, out_channels]`.
    raw_inner: Tensor<T>,
    mat: Option<MaterializeCache<T>>,
}

/// CNN encoder + dual-ring graph-convolutional decoder.
#[derive(Debug, Clone)]
pub struct GcnModel<T: Real> {
    encoder: Encoder<T>,
    sampling: SamplingConfig,
    decoder: DecoderConfig,
    topology: RingTopology,
    projection: Dense<T>,
    rings: Vec<RingConv<T>>,
    template_inner: Tensor<T>,
    template_outer: Tensor<T>,
}

fn build_template(
    topology: &RingTopology,
    out_ch: usize,
) -> Result<(Tensor<f64>, Tensor<f64>), GcnError> {
    let s = topology.ring_size();
    let e = topology.endo_len();
    let l = topology.la_len();
    let endo: Vec<[f64; 2]> = (0..e)
        .map(|i| {
            let theta = std::f64::consts::PI * i as f64 / (e - 1) as f64;
            [TEMPLATE_CX - TEMPLATE_ENDO_RX * theta.cos(), TEMPLATE_BASE_Y - TEMPLATE_ENDO_RY * theta.sin()]
        })
        .collect();
    let la: Vec<[f64; 2]> = (0..l)
        .map(|k| {
            let phi = std::f64::consts::PI * (k + 1) as f64 / (l + 1) as f64;
            [TEMPLATE_CX - TEMPLATE_LA_RX * phi.cos(), TEMPLATE_BASE_Y + TEMPLATE_LA_RY * phi.sin()]
        })
        .collect();
    let (epi, _) = materialize_epi(&endo, &vec![TEMPLATE_WALL; e])?;
    // Raw displacement-channel value that materializes to TEMPLATE_WALL after
    // softplus + epsilon.
    let disp_raw = ((TEMPLATE_WALL - DISP_EPSILON).exp() - 1.0).ln();

    let mut inner = Tensor::<f64>::zeros(vec![s, out_ch]);
    let mut outer = Tensor::<f64>::zeros(vec![s, out_ch]);
    for i in 0..s {
        let row = i * out_ch;
        match topology.inner_slot(i) {
            InnerSlot::Endo(k) => {
                inner.data_mut()[row] = endo[k][0];
                inner.data_mut()[row + 1] = endo[k][1];
                if out_ch > 2 {
                    inner.data_mut()[row + 2] = disp_raw;
                }
            }
            InnerSlot::La(k) => {
                inner.data_mut()[row] = la[k][0];
                inner.data_mut()[row + 1] = la[k][1];
            }
        }
        if let OuterSlot::Epi(k) = topology.outer_slot(i) {
            outer.data_mut()[row] = epi[k][0];
            outer.data_mut()[row + 1] = epi[k][1];
        }
    }
    Ok((inner, outer))
}

impl<T: Real> GcnModel<T> {
    /// Build a freshly initialized model. Initialization is deterministic in
    /// `seed` (ChaCha8 stream, parameters drawn in declaration order).
    pub fn new(
        encoder_cfg: EncoderConfig,
        decoder: DecoderConfig,
        sampling: SamplingConfig,
        seed: u64,
    ) -> Result<Self, GcnError> {
        sampling.validate()?;
        let topology = RingTopology::new(&sampling);
        let s = topology.ring_size();
        decoder.validate(s)?;
        let out_ch = decoder.head.out_channels();
        let w = decoder.window_for(s);
        let v = decoder.secondary_window;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Encoder::new(encoder_cfg, &mut rng)?;
        let emb = encoder.embedding_size();

        let (projection, rings) = match &decoder.channels {
            Some(channels) => {
                let projection = Dense::new(emb, 2 * s * channels[0], &mut rng)?;
                let k = channels.len();
                let mut rings = Vec::with_capacity(k);
                for i in 0..k {
                    let c_in = channels[i];
                    let (c_out, relu) =
                        if i + 1 < k { (channels[i + 1], true) } else { (out_ch, false) };
                    rings.push(RingConv::new(c_in, c_out, w, v, relu, &mut rng)?);
                }
                // Residual head: start near the template.
                let scale = T::from_f64(HEAD_INIT_SCALE);
                rings.last_mut().expect("k >= 1").scale_weights_in_place(scale);
                (projection, rings)
            }
            None => {
                // Direct dense head straight from the embedding.
                let mut projection = Dense::new(emb, 2 * s * out_ch, &mut rng)?;
                projection.weight_mut().scale_in_place(T::from_f64(HEAD_INIT_SCALE));
                (projection, Vec::new())
            }
        };

        let (ti, to) = build_template(&topology, out_ch)?;
        Ok(GcnModel {
            encoder,
            sampling,
            decoder,
            topology,
            projection,
            rings,
            template_inner: ti.cast(),
            template_outer: to.cast(),
        })
    }

    pub fn encoder_config(&self) -> &EncoderConfig {
        self.encoder.config()
    }

    pub fn decoder_config(&self) -> &DecoderConfig {
        &self.decoder
    }

    pub fn sampling(&self) -> &SamplingConfig {
        &self.sampling
    }

    pub fn topology(&self) -> &RingTopology {
        &self.topology
    }

    fn out_channels(&self) -> usize {
        self.decoder.head.out_channels()
    }

    /// Zero the embeddings of outer-ring pad slots (the contiguous tail of
    /// the ring). Applied after the projection and after every ring layer,
    /// outside the layers themselves so they stay circularly equivariant.
    fn zero_pads(&self, outer: &mut Tensor<T>) {
        let c = outer.shape()[1];
        let start = self.topology.endo_len() * c;
        for v in &mut outer.data_mut()[start..] {
            *v = T::zero();
        }
    }

    /// Full forward pass in training form: unclamped coordinates plus the
    /// activation cache for [`Self::backward`].
    pub fn forward(&self, img: &Image) -> Result<(DecodedKeypoints<T>, GcnCache<T>), GcnError> {
        let x = Encoder::<T>::image_tensor(img);
        let (emb, enc_cache) = self.encoder.forward(&x)?;
        let (proj_out, proj_cache) = self.projection.forward(&emb)?;

        let s = self.topology.ring_size();
        let c1 = proj_out.len() / (2 * s);
        let mut inner = Tensor::new(vec![s, c1], proj_out.data()[..s * c1].to_vec())?;
        let mut outer = Tensor::new(vec![s, c1], proj_out.data()[s * c1..].to_vec())?;
        self.zero_pads(&mut outer);

        let mut ring_caches = Vec::with_capacity(self.rings.len());
        for layer in &self.rings {
            let (ni, no, cache) = layer.forward(&inner, &outer)?;
            inner = ni;
            outer = no;
            self.zero_pads(&mut outer);
            ring_caches.push(cache);
        }

        let oc = self.out_channels();
        let mut raw_inner = inner;
        raw_inner.add_scaled(&self.template_inner, T::one())?;
        let mut raw_outer = outer;
        raw_outer.add_scaled(&self.template_outer, T::one())?;

        let e = self.topology.endo_len();
        let l = self.topology.la_len();
        let ri = raw_inner.data();
        let endo: Vec<[T; 2]> =
            (0..e).map(|k| [ri[k * oc], ri[k * oc + 1]]).collect();
        let la: Vec<[T; 2]> = (0..l)
            .map(|k| {
                let slot = self.topology.slot_of_la(k);
                [ri[slot * oc], ri[slot * oc + 1]]
            })
            .collect();

        let (epi, disp, mat) = match self.decoder.head {
            HeadKind::Coordinate => {
                let ro = raw_outer.data();
                let epi: Vec<[T; 2]> =
                    (0..e).map(|k| [ro[k * oc], ro[k * oc + 1]]).collect();
                (epi, None, None)
            }
            HeadKind::Displacement => {
                let eps = T::from_f64(DISP_EPSILON);
                let d: Vec<T> = (0..e).map(|k| softplus(ri[k * oc + 2]) + eps).collect();
                let (epi, mat) = materialize_epi(&endo, &d)?;
                (epi, Some(d), Some(mat))
            }
        };

        let decoded = DecodedKeypoints { endo, epi, la, disp };
        let cache = GcnCache { enc: enc_cache, proj: proj_cache, rings: ring_caches, raw_inner, mat };
        Ok((decoded, cache))
    }

    /// Predict a validated [`KeypointSet`] (coordinates clamped to `[0, 1]`;
    /// the displacement head goes through [`from_displacement`]).
    pub fn infer(&self, img: &Image, spacing: PixelSpacing) -> Result<KeypointSet, GcnError> {
        let (decoded, _) = self.forward(img)?;
        let pt = |p: &[T; 2]| {
            Point::new(p[0].to_f64().clamp(0.0, 1.0), p[1].to_f64().clamp(0.0, 1.0))
        };
        let endo: Vec<Point> = decoded.endo.iter().map(pt).collect();
        let la: Vec<Point> = decoded.la.iter().map(pt).collect();
        match &decoded.disp {
            Some(d) => {
                let ds = DisplacementSet::new(
                    self.sampling.n_side,
                    self.sampling.m_side,
                    endo,
                    la,
                    d.iter().map(|&v| v.to_f64()).collect(),
                    spacing,
                )?;
                Ok(from_displacement(&ds)?)
            }
            None => {
                let epi: Vec<Point> = decoded.epi.iter().map(pt).collect();
                Ok(KeypointSet::new(
                    self.sampling.n_side,
                    self.sampling.m_side,
                    endo,
                    epi,
                    la,
                    spacing,
                )?)
            }
        }
    }

    /// Back-propagate loss gradients on the decoded outputs down to every
    /// parameter. The returned tensors align one-to-one with
    /// [`Self::named_params`].
    pub fn backward(
        &self,
        cache: &GcnCache<T>,
        grad: &KeypointGrads<T>,
    ) -> Result<Vec<Tensor<T>>, GcnError> {
        let e = self.topology.endo_len();
        let l = self.topology.la_len();
        let s = self.topology.ring_size();
        let oc = self.out_channels();
        for (name, len, expected) in [
            ("grad endo", grad.endo.len(), e),
            ("grad epi", grad.epi.len(), e),
            ("grad la", grad.la.len(), l),
        ] {
            if len != expected {
                return Err(GcnError::LayoutMismatch { array: name, expected, got: len });
            }
        }

        let mut grad_endo: Vec<[T; 2]> = grad.endo.clone();
        let mut grad_raw_inner = Tensor::<T>::zeros(vec![s, oc]);
        let mut grad_raw_outer = Tensor::<T>::zeros(vec![s, oc]);

        match self.decoder.head {
            HeadKind::Coordinate => {
                if grad.disp.is_some() {
                    return Err(GcnError::LayoutMismatch {
                        array: "grad disp (coordinate head)",
                        expected: 0,
                        got: e,
                    });
                }
                for k in 0..e {
                    grad_raw_outer.data_mut()[k * oc] = grad.epi[k][0];
                    grad_raw_outer.data_mut()[k * oc + 1] = grad.epi[k][1];
                }
            }
            HeadKind::Displacement => {
                let mat = cache.mat.as_ref().ok_or(GcnError::LayoutMismatch {
                    array: "materialize cache",
                    expected: e,
                    got: 0,
                })?;
                let (endo_extra, disp_extra) = materialize_epi_backward(mat, &grad.epi)?;
                let mut grad_disp = disp_extra;
                if let Some(gd) = &grad.disp {
                    if gd.len() != e {
                        return Err(GcnError::LayoutMismatch {
                            array: "grad disp",
                            expected: e,
                            got: gd.len(),
                        });
                    }
                    for (a, b) in grad_disp.iter_mut().zip(gd) {
                        *a += *b;
                    }
                }
                for k in 0..e {
                    grad_endo[k][0] += endo_extra[k][0];
                    grad_endo[k][1] += endo_extra[k][1];
                    // d = softplus(z) + ε ⇒ dz = σ(z)·dd.
                    let z = cache.raw_inner.data()[k * oc + 2];
                    grad_raw_inner.data_mut()[k * oc + 2] = grad_disp[k] * sigmoid(z);
                }
            }
        }

        for k in 0..e {
            grad_raw_inner.data_mut()[k * oc] += grad_endo[k][0];
            grad_raw_inner.data_mut()[k * oc + 1] += grad_endo[k][1];
        }
        for k in 0..l {
            let slot = self.topology.slot_of_la(k);
            grad_raw_inner.data_mut()[slot * oc] += grad.la[k][0];
            grad_raw_inner.data_mut()[slot * oc + 1] += grad.la[k][1];
        }

        // Template addition is an additive constant: gradients pass through.
        let mut g_inner = grad_raw_inner;
        let mut g_outer = grad_raw_outer;
        let mut ring_grads_rev = Vec::with_capacity(self.rings.len());
        for (layer, rc) in self.rings.iter().zip(&cache.rings).rev() {
            // Forward zeroed pads after this layer, so incoming outer grads
            // at pad slots must be zeroed too.
            self.zero_pads(&mut g_outer);
            let (gi, go, pg) = layer.backward(rc, &g_inner, &g_outer)?;
            g_inner = gi;
            g_outer = go;
            ring_grads_rev.push(pg);
        }
        self.zero_pads(&mut g_outer);

        let mut flat = Vec::with_capacity(g_inner.len() + g_outer.len());
        flat.extend_from_slice(g_inner.data());
        flat.extend_from_slice(g_outer.data());
        let grad_proj_out = Tensor::new(vec![flat.len()], flat)?;
        let proj_grads = self.projection.backward(&cache.proj, &grad_proj_out)?;
        let (_, enc_grads) = self.encoder.backward(&cache.enc, &proj_grads.input)?;

        let mut out = enc_grads;
        out.push(proj_grads.weight);
        out.push(proj_grads.bias);
        for pg in ring_grads_rev.into_iter().rev() {
            out.push(pg.inner_weight);
            out.push(pg.inner_bias);
            out.push(pg.outer_weight);
            out.push(pg.outer_bias);
        }
        Ok(out)
    }

    /// Parameters with stable names, in the canonical order used by
    /// [`Self::backward`], [`Self::params_mut`] and the weights file.
    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = self.encoder.named_params();
        out.push(("decoder.projection.weight".to_string(), self.projection.weight()));
        out.push(("decoder.projection.bias".to_string(), self.projection.bias()));
        for (i, r) in self.rings.iter().enumerate() {
            let [iw, ib, ow, ob] = r.params();
            out.push((format!("decoder.ring{i}.inner_weight"), iw));
            out.push((format!("decoder.ring{i}.inner_bias"), ib));
            out.push((format!("decoder.ring{i}.outer_weight"), ow));
            out.push((format!("decoder.ring{i}.outer_bias"), ob));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = self.encoder.params_mut();
        let (w, b) = self.projection.weight_bias_mut();
        out.push(w);
        out.push(b);
        for r in &mut self.rings {
            out.extend(r.params_mut());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.named_params().iter().map(|(_, t)| t.shape().to_vec()).collect()
    }

    /// All parameters concatenated in canonical order (for finite-difference
    /// checks).
    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for (_, t) in self.named_params() {
            out.extend_from_slice(t.data());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[T]) -> Result<(), GcnError> {
        let expected = self.param_count();
        if flat.len() != expected {
            return Err(GcnError::LayoutMismatch {
                array: "flat parameters",
                expected,
                got: flat.len(),
            });
        }
        let mut off = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> GcnModel<U> {
        GcnModel {
            encoder: self.encoder.cast(),
            sampling: self.sampling,
            decoder: self.decoder.clone(),
            topology: self.topology,
            projection: Dense::from_tensors(
                self.projection.weight().cast(),
                self.projection.bias().cast(),
            )
            .expect("cast preserves shapes"),
            rings: self.rings.iter().map(|r| r.cast()).collect(),
            template_inner: self.template_inner.cast(),
            template_outer: self.template_outer.cast(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelHeader {
    format_version: u32,
    topology_version: u32,
    encoder: EncoderConfig,
    decoder: DecoderConfig,
    sampling: SamplingConfig,
}

/// Write the model as a weights container whose JSON header carries the
/// full architecture description.
pub fn save_model<P: AsRef<Path>>(model: &GcnModel<f32>, path: P) -> Result<(), GcnError> {
    let header = ModelHeader {
        format_version: MODEL_FORMAT_VERSION,
        topology_version: TOPOLOGY_VERSION,
        encoder: model.encoder_config().clone(),
        decoder: model.decoder_config().clone(),
        sampling: *model.sampling(),
    };
    let config = serde_json::to_value(&header)?;
    let named = model.named_params();
    let tensors: Vec<(String, &Tensor<f32>)> =
        named.iter().map(|(n, t)| (n.clone(), *t)).collect();
    save_weights_file(path, &config, &tensors)?;
    Ok(())
}

/// Load a model saved by [`save_model`], validating versions, tensor names
/// and shapes.
pub fn load_model<P: AsRef<Path>>(path: P) -> Result<GcnModel<f32>, GcnError> {
    let (config, tensors) = load_weights_file(path)?;
    let header: ModelHeader = serde_json::from_value(config)?;
    if header.format_version != MODEL_FORMAT_VERSION {
        return Err(GcnError::BadConfig(format!(
            "unsupported model format version {}",
            header.format_version
        )));
    }
    if header.topology_version != TOPOLOGY_VERSION {
        return Err(GcnError::BadConfig(format!(
            "unsupported ring topology version {}",
            header.topology_version
        )));
    }
    let mut model = GcnModel::<f32>::new(header.encoder, header.decoder, header.sampling, 0)?;
    let mut by_name: HashMap<String, Tensor<f32>> = tensors.into_iter().collect();
    let names: Vec<String> = model.named_params().iter().map(|(n, _)| n.clone()).collect();
    for (name, param) in names.iter().zip(model.params_mut()) {
        let tensor = by_name
            .remove(name)
            .ok_or_else(|| GcnError::BadConfig(format!("model file is missing tensor {name}")))?;
        if tensor.shape() != param.shape() {
            return Err(GcnError::BadConfig(format!(
                "tensor {name} has shape {:?}, expected {:?}",
                tensor.shape(),
                param.shape()
            )));
        }
        *param = tensor;
    }
    if let Some(extra) = by_name.keys().next() {
        return Err(GcnError::BadConfig(format!("model file has unexpected tensor {extra}")));
    }
    Ok(model)
}
