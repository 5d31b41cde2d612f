//! Whole-stack gradient audit: replays central finite-difference checks
//! against every layer's analytic backward pass, then against a reduced
//! end-to-end model, and reports the worst relative error per check.
//!
//! Probe steps are layer-specific: 1e-3 for purely linear maps, 1e-5 where a
//! ReLU kink could be straddled, and 1e-6 for the materialization and loss
//! (whose absolute-value terms are non-smooth at zero). Tolerances are 1e-4
//! per layer and 1e-3 end-to-end.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::gcn::{
    keypoint_loss, materialize_epi, materialize_epi_backward, DecodedKeypoints, DecoderConfig,
    GcnError, GcnModel, HeadKind, RingConv,
};
use crate::geom::Point;
use crate::imaging::{Image, PixelSpacing};
use crate::keypoints::{KeypointSet, SamplingConfig};
use crate::nn::gradcheck::{finite_difference_gradient, max_relative_error};
use crate::nn::{Conv2d, Dense, Encoder, EncoderConfig, GlobalAvgPool, Relu, Tensor};

/// Worst-layer tolerance for the per-layer checks.
pub const LAYER_TOLERANCE: f64 = 1e-4;
/// Tolerance for the end-to-end reduced-model sweep.
pub const END_TO_END_TOLERANCE: f64 = 1e-3;
/// Denominator floor when analytic and numeric gradients are both tiny.
const REL_ERR_FLOOR: f64 = 1e-6;

/// Verdict of one finite-difference comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

fn uniform(shape: Vec<usize>, scale: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(shape, data).expect("shape/data length agree by construction")
}

/// Dot product of a forward output with a fixed projection: turns any layer
/// into a scalar function whose output gradient is the projection itself.
fn dot(out: &Tensor<f64>, proj: &[f64]) -> f64 {
    out.data().iter().zip(proj).map(|(&o, &p)| o * p).sum()
}

/// 3×3 stride-2 convolution: weight, bias and input gradients.
pub fn check_conv2d(seed: u64) -> Result<CheckResult, GcnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conv = Conv2d::<f64>::new(2, 3, 3, 2, 1, &mut rng)?;
    let x = uniform(vec![2, 8, 8], 1.0, &mut rng);
    let [co, oh, ow] = conv.output_shape(x.shape())?;
    let proj: Vec<f64> = uniform(vec![co * oh * ow], 1.0, &mut rng).into_data();

    let (out, cache) = conv.forward(&x)?;
    let grad_out = Tensor::new(out.shape().to_vec(), proj.clone())?;
    let grads = conv.backward(&cache, &grad_out)?;

    let loss_w = |w: &[f64]| {
        let mut c = conv.clone();
        c.weight_mut().data_mut().copy_from_slice(w);
        dot(&c.forward(&x).unwrap().0, &proj)
    };
    let loss_b = |b: &[f64]| {
        let mut c = conv.clone();
        c.bias_mut().data_mut().copy_from_slice(b);
        dot(&c.forward(&x).unwrap().0, &proj)
    };
    let loss_x = |xd: &[f64]| {
        let xt = Tensor::new(x.shape().to_vec(), xd.to_vec()).unwrap();
        dot(&conv.forward(&xt).unwrap().0, &proj)
    };
    let step = 1e-3;
    let err = [
        max_relative_error(
            grads.weight.data(),
            &finite_difference_gradient(loss_w, conv.weight().data(), step),
            REL_ERR_FLOOR,
        ),
        max_relative_error(
            grads.bias.data(),
            &finite_difference_gradient(loss_b, conv.bias().data(), step),
            REL_ERR_FLOOR,
        ),
        max_relative_error(
            grads.input.data(),
            &finite_difference_gradient(loss_x, x.data(), step),
            REL_ERR_FLOOR,
        ),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(CheckResult { name: "conv2d", max_rel_err: err, tolerance: LAYER_TOLERANCE })
}

/// Fully connected layer: weight, bias and input gradients.
pub fn check_dense(seed: u64) -> Result<CheckResult, GcnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense = Dense::<f64>::new(6, 4, &mut rng)?;
    let x = uniform(vec![6], 1.0, &mut rng);
    let proj: Vec<f64> = uniform(vec![4], 1.0, &mut rng).into_data();

    let (out, cache) = dense.forward(&x)?;
    let grad_out = Tensor::new(out.shape().to_vec(), proj.clone())?;
    let grads = dense.backward(&cache, &grad_out)?;

    let loss_w = |w: &[f64]| {
        let mut d = dense.clone();
        d.weight_mut().data_mut().copy_from_slice(w);
        dot(&d.forward(&x).unwrap().0, &proj)
    };
    let loss_b = |b: &[f64]| {
        let mut d = dense.clone();
        d.bias_mut().data_mut().copy_from_slice(b);
        dot(&d.forward(&x).unwrap().0, &proj)
    };
    let loss_x = |xd: &[f64]| {
        let xt = Tensor::new(vec![6], xd.to_vec()).unwrap();
        dot(&dense.forward(&xt).unwrap().0, &proj)
    };
    let step = 1e-3;
    let err = [
        max_relative_error(
            grads.weight.data(),
            &finite_difference_gradient(loss_w, dense.weight().data(), step),
            REL_ERR_FLOOR,
        ),
        max_relative_error(
            grads.bias.data(),
            &finite_difference_gradient(loss_b, dense.bias().data(), step),
            REL_ERR_FLOOR,
        ),
        max_relative_error(
            grads.input.data(),
            &finite_difference_gradient(loss_x, x.data(), step),
            REL_ERR_FLOOR,
        ),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(CheckResult { name: "dense", max_rel_err: err, tolerance: LAYER_TOLERANCE })
}

/// ReLU input gradient on values bounded away from the kink.
pub fn check_relu(seed: u64) -> Result<CheckResult, GcnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // |x| ≥ 0.1 so the probe step can't cross zero.
    let data: Vec<f64> = (0..24)
        .map(|_| {
            let mag = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let x = Tensor::new(vec![24], data)?;
    let proj: Vec<f64> = uniform(vec![24], 1.0, &mut rng).into_data();

    let out = Relu.forward(&x);
    let grad_out = Tensor::new(vec![24], proj.clone())?;
    let analytic = Relu.backward(&out, &grad_out)?;
    let numeric = finite_difference_gradient(
        |xd| {
            let xt = Tensor::new(vec![24], xd.to_vec()).unwrap();
            dot(&Relu.forward(&xt), &proj)
        },
        x.data(),
        1e-5,
    );
    let err = max_relative_error(analytic.data(), &numeric, REL_ERR_FLOOR);
    Ok(CheckResult { name: "relu", max_rel_err: err, tolerance: LAYER_TOLERANCE })
}

/// Spatial mean pooling input gradient.
pub fn check_global_avg_pool(seed: u64) -> Result<CheckResult, GcnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform(vec![3, 4, 5], 1.0, &mut rng);
    let proj: Vec<f64> = uniform(vec![3], 1.0, &mut rng).into_data();

    let (_, in_shape) = GlobalAvgPool.forward(&x)?;
    let grad_out = Tensor::new(vec![3], proj.clone())?;
    let analytic = GlobalAvgPool.backward(in_shape, &grad_out)?;
    let numeric = finite_difference_gradient(
        |xd| {
            let xt = Tensor::new(vec![3, 4, 5], xd.to_vec()).unwrap();
            dot(&GlobalAvgPool.forward(&xt).unwrap().0, &proj)
        },
        x.data(),
        1e-3,
    );
    let err = max_relative_error(analytic.data(), &numeric, REL_ERR_FLOOR);
    Ok(CheckResult { name: "global_avg_pool", max_rel_err: err, tolerance: LAYER_TOLERANCE })
}

fn ring_conv_errors(relu: bool, step: f64, seed: u64) -> Result<f64, GcnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (slots, c_in, c_out, w, v) = (8usize, 3usize, 2usize, 5usize, 3usize);
    let layer = RingConv::<f64>::new(c_in, c_out, w, v, relu, &mut rng)?;
    let inner = uniform(vec![slots, c_in], 1.0, &mut rng);
    let outer = uniform(vec![slots, c_in], 1.0, &mut rng);
    let proj_inner: Vec<f64> = uniform(vec![slots * c_out], 1.0, &mut rng).into_data();
    let proj_outer: Vec<f64> = uniform(vec![slots * c_out], 1.0, &mut rng).into_data();

    let loss = |l: &RingConv<f64>, i: &Tensor<f64>, o: &Tensor<f64>| {
        let (oi, oo, _) = l.forward(i, o).unwrap();
        dot(&oi, &proj_inner) + dot(&oo, &proj_outer)
    };

    let (oi, oo, cache) = layer.forward(&inner, &outer)?;
    let gi = Tensor::new(oi.shape().to_vec(), proj_inner.clone())?;
    let go = Tensor::new(oo.shape().to_vec(), proj_outer.clone())?;
    let (grad_inner, grad_outer, grads) = layer.backward(&cache, &gi, &go)?;

    let mut worst = max_relative_error(
        grad_inner.data(),
        &finite_difference_gradient(
            |xd| {
                let t = Tensor::new(inner.shape().to_vec(), xd.to_vec()).unwrap();
                loss(&layer, &t, &outer)
            },
            inner.data(),
            step,
        ),
        REL_ERR_FLOOR,
    );
    worst = worst.max(max_relative_error(
        grad_outer.data(),
        &finite_difference_gradient(
            |xd| {
                let t = Tensor::new(outer.shape().to_vec(), xd.to_vec()).unwrap();
                loss(&layer, &inner, &t)
            },
            outer.data(),
            step,
        ),
        REL_ERR_FLOOR,
    ));
    let analytic =
        [&grads.inner_weight, &grads.inner_bias, &grads.outer_weight, &grads.outer_bias];
    for (idx, a) in analytic.into_iter().enumerate() {
        let numeric = finite_difference_gradient(
            |pd: &[f64]| {
                let mut l = layer.clone();
                l.params_mut()[idx].data_mut().copy_from_slice(pd);
                loss(&l, &inner, &outer)
            },
            layer.params()[idx].data(),
            step,
        );
        worst = worst.max(max_relative_error(a.data(), &numeric, REL_ERR_FLOOR));
    }
    Ok(worst)
}

/// Dual-ring graph convolution without its ReLU: weights, biases, both ring
/// inputs.
pub fn check_ring_conv_linear(seed: u64) -> Result<CheckResult, GcnError> {
    let err = ring_conv_errors(false, 1e-3, seed)?;
    Ok(CheckResult { name: "ring_conv", max_rel_err: err, tolerance: LAYER_TOLERANCE })
}

/// Dual-ring graph convolution with ReLU (small probe step for the kinks).
pub fn check_ring_conv_relu(seed: u64) -> Result<CheckResult, GcnError> {
    let err = ring_conv_errors(true, 1e-5, seed)?;
    Ok(CheckResult { name: "ring_conv_relu", max_rel_err: err, tolerance: LAYER_TOLERANCE })
}

/// Arc-shaped endocardial chain for head/loss checks.
fn arc_chain(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let th = std::f64::consts::PI * i as f64 / (n - 1) as f64;
            let j = rng.random_range(-0.004..0.004);
            [0.5 - 0.24 * th.cos() + j, 0.62 - 0.34 * th.sin() + j]
        })
        .collect()
}

/// Displacement head materialization (`epi = endo + d·n̂`): endo and
/// displacement gradients.
pub fn check_displacement_head(seed: u64) -> Result<CheckResult, GcnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 12usize;
    let endo = arc_chain(n, &mut rng);
    let disp: Vec<f64> = (0..n).map(|_| rng.random_range(0.03..0.06)).collect();
    let proj: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();

    let (_, cache) = materialize_epi(&endo, &disp)?;
    let grad_epi: Vec<[f64; 2]> =
        proj.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let (grad_endo, grad_disp) = materialize_epi_backward(&cache, &grad_epi)?;

    let mut flat: Vec<f64> = endo.iter().flatten().copied().collect();
    flat.extend(&disp);
    let loss = |x: &[f64]| -> f64 {
        let endo: Vec<[f64; 2]> =
            x[..2 * n].chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let (epi, _) = materialize_epi(&endo, &x[2 * n..]).unwrap();
        epi.iter().flatten().zip(&proj).map(|(&e, &p)| e * p).sum()
    };
    let numeric = finite_difference_gradient(loss, &flat, 1e-6);
    let mut analytic: Vec<f64> = grad_endo.iter().flatten().copied().collect();
    analytic.extend(grad_disp);
    let err = max_relative_error(&analytic, &numeric, REL_ERR_FLOOR);
    Ok(CheckResult { name: "displacement_head", max_rel_err: err, tolerance: LAYER_TOLERANCE })
}

/// A valid keypoint target shaped like the canonical template, with
/// deterministic jitter.
fn jittered_template(n_side: usize, m_side: usize, seed: u64) -> KeypointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = 2 * n_side + 3;
    let l = 2 * m_side + 1;
    let j = |rng: &mut ChaCha8Rng| rng.random_range(-0.004..0.004);
    let endo: Vec<[f64; 2]> = (0..e)
        .map(|i| {
            let th = std::f64::consts::PI * i as f64 / (e - 1) as f64;
            [0.5 - 0.24 * th.cos() + j(&mut rng), 0.62 - 0.34 * th.sin() + j(&mut rng)]
        })
        .collect();
    let disp: Vec<f64> = (0..e).map(|_| 0.04 + j(&mut rng)).collect();
    let (epi, _) = materialize_epi(&endo, &disp).expect("arc chain has nonzero tangents");
    let la: Vec<Point> = (0..l)
        .map(|k| {
            let phi = std::f64::consts::PI * (k + 1) as f64 / (l + 1) as f64;
            Point::new(0.5 - 0.26 * phi.cos() + j(&mut rng), 0.62 + 0.14 * phi.sin() + j(&mut rng))
        })
        .collect();
    KeypointSet::new(
        n_side,
        m_side,
        endo.iter().map(|p| Point::new(p[0], p[1])).collect(),
        epi.iter().map(|p| Point::new(p[0], p[1])).collect(),
        la,
        PixelSpacing::isotropic(0.5).expect("positive spacing"),
    )
    .expect("template chains have valid counts and coordinates")
}

/// Keypoint loss: gradients wrt every decoded coordinate and displacement.
pub fn check_keypoint_loss(seed: u64) -> Result<CheckResult, GcnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_side, m_side) = (6usize, 3usize);
    let target = jittered_template(n_side, m_side, seed ^ 0x9e37);
    let e = target.endo().len();
    let l = target.la().len();

    // Predictions offset from the target so no norm or |diff| sits at zero.
    let mut off = |p: &Point| [p.x + rng.random_range(0.01..0.03), p.y - rng.random_range(0.01..0.03)];
    let pred = DecodedKeypoints {
        endo: target.endo().iter().map(&mut off).collect(),
        epi: target.epi().iter().map(&mut off).collect(),
        la: target.la().iter().map(&mut off).collect(),
        disp: Some((0..e).map(|_| rng.random_range(0.05..0.08)).collect()),
    };
    let (_, grads) = keypoint_loss(&pred, &target)?;

    let mut flat: Vec<f64> = Vec::new();
    flat.extend(pred.endo.iter().flatten());
    flat.extend(pred.epi.iter().flatten());
    flat.extend(pred.la.iter().flatten());
    flat.extend(pred.disp.as_ref().expect("displacement head prediction"));
    let rebuild = |x: &[f64]| -> DecodedKeypoints<f64> {
        let chain = |s: &[f64]| s.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        DecodedKeypoints {
            endo: chain(&x[..2 * e]),
            epi: chain(&x[2 * e..4 * e]),
            la: chain(&x[4 * e..4 * e + 2 * l]),
            disp: Some(x[4 * e + 2 * l..].to_vec()),
        }
    };
    let numeric = finite_difference_gradient(
        |x| keypoint_loss(&rebuild(x), &target).unwrap().0.total,
        &flat,
        1e-6,
    );
    let mut analytic: Vec<f64> = Vec::new();
    analytic.extend(grads.endo.iter().flatten());
    analytic.extend(grads.epi.iter().flatten());
    analytic.extend(grads.la.iter().flatten());
    analytic.extend(grads.disp.as_ref().expect("displacement gradients"));
    let err = max_relative_error(&analytic, &numeric, 1e-8);
    Ok(CheckResult { name: "keypoint_loss", max_rel_err: err, tolerance: LAYER_TOLERANCE })
}

/// Full CNN encoder stack (convs + ReLUs + pooling + head): every parameter.
pub fn check_encoder(seed: u64) -> Result<CheckResult, GcnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = Encoder::<f64>::new(EncoderConfig::reduced(), &mut rng)?;
    let x = uniform(vec![1, 16, 16], 1.0, &mut rng);
    let emb = enc.embedding_size();
    let proj: Vec<f64> = uniform(vec![emb], 1.0, &mut rng).into_data();

    let (out, cache) = enc.forward(&x)?;
    let grad_out = Tensor::new(out.shape().to_vec(), proj.clone())?;
    let (grad_x, param_grads) = enc.backward(&cache, &grad_out)?;

    let mut worst = 0.0f64;
    let n_params = param_grads.len();
    for idx in 0..n_params {
        let base = enc.named_params()[idx].1.clone();
        let numeric = finite_difference_gradient(
            |pd: &[f64]| {
                let mut e = enc.clone();
                e.params_mut()[idx].data_mut().copy_from_slice(pd);
                dot(&e.forward(&x).unwrap().0, &proj)
            },
            base.data(),
            1e-5,
        );
        worst = worst.max(max_relative_error(param_grads[idx].data(), &numeric, REL_ERR_FLOOR));
    }
    let numeric_x = finite_difference_gradient(
        |xd: &[f64]| {
            let t = Tensor::new(x.shape().to_vec(), xd.to_vec()).unwrap();
            dot(&enc.forward(&t).unwrap().0, &proj)
        },
        x.data(),
        1e-5,
    );
    worst = worst.max(max_relative_error(grad_x.data(), &numeric_x, REL_ERR_FLOOR));
    Ok(CheckResult { name: "encoder_stack", max_rel_err: worst, tolerance: LAYER_TOLERANCE })
}

/// Reduced encoder + dual-ring decoder, displacement head, keypoint loss:
/// full central-difference sweep over every parameter.
pub fn check_end_to_end(seed: u64) -> Result<CheckResult, GcnError> {
    let decoder = DecoderConfig {
        channels: Some(vec![4, 2]),
        primary_window: Some(8),
        secondary_window: 1,
        head: HeadKind::Displacement,
    };
    let model = GcnModel::<f64>::new(
        EncoderConfig::reduced(),
        decoder,
        SamplingConfig::default(),
        seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1);
    let mut img = Image::zeros(32, 32);
    for y in 0..32 {
        for x in 0..32 {
            img.set(x, y, rng.random_range(0.0..1.0));
        }
    }
    let target = jittered_template(20, 10, seed ^ 0xc2b2);

    let (decoded, cache) = model.forward(&img)?;
    let (_, out_grads) = keypoint_loss(&decoded, &target)?;
    let analytic_tensors = model.backward(&cache, &out_grads)?;
    let analytic: Vec<f64> =
        analytic_tensors.iter().flat_map(|t| t.data().iter().copied()).collect();
    let base = model.flat_params();

    // ReLU kinks in the encoder: keep the probe on one linear piece.
    let step = 1e-5;
    let mut worst = 0.0f64;
    let mut probe_model = model.clone();
    let mut params = base.clone();
    for idx in 0..base.len() {
        let mut eval = |x: f64| -> f64 {
            params[idx] = x;
            probe_model.set_flat_params(&params).expect("length preserved");
            let (d, _) = probe_model.forward(&img).expect("forward on probe weights");
            keypoint_loss(&d, &target).expect("loss on probe outputs").0.total
        };
        let numeric = (eval(base[idx] + step) - eval(base[idx] - step)) / (2.0 * step);
        params[idx] = base[idx];
        let denom = analytic[idx].abs().max(numeric.abs()).max(REL_ERR_FLOOR);
        worst = worst.max((analytic[idx] - numeric).abs() / denom);
    }
    Ok(CheckResult {
        name: "end_to_end_reduced",
        max_rel_err: worst,
        tolerance: END_TO_END_TOLERANCE,
    })
}

/// All per-layer checks, in pipeline order.
pub fn run_layer_checks(seed: u64) -> Result<Vec<CheckResult>, GcnError> {
    Ok(vec![
        check_conv2d(seed)?,
        check_relu(seed.wrapping_add(1))?,
        check_global_avg_pool(seed.wrapping_add(2))?,
        check_dense(seed.wrapping_add(3))?,
        check_encoder(seed.wrapping_add(4))?,
        check_ring_conv_linear(seed.wrapping_add(5))?,
        check_ring_conv_relu(seed.wrapping_add(6))?,
        check_displacement_head(seed.wrapping_add(7))?,
        check_keypoint_loss(seed.wrapping_add(8))?,
    ])
}

/// Layer checks plus the end-to-end reduced-model sweep.
pub fn run_full_audit(seed: u64) -> Result<Vec<CheckResult>, GcnError> {
    let mut results = run_layer_checks(seed)?;
    results.push(check_end_to_end(seed.wrapping_add(9))?);
    Ok(results)
}
