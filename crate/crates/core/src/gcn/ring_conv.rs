//! Circular convolution over two parallel rings of slot embeddings.
//!
//! Each layer updates both rings at once. The new embedding of a slot is a
//! learned linear map of a window of `w` neighboring slots on the *same*
//! ring concatenated with a window of `v` slots on the *other* ring (both
//! windows centered on the slot, indices wrapping circularly), followed by
//! an optional ReLU. The inner→inner/outer and outer→outer/inner paths use
//! distinct weight matrices.
//!
//! The layer itself is circularly equivariant: rotating both input rings by
//! `r` slots rotates both outputs by `r` slots. Pinning pad slots to zero is
//! done *outside* the layer (see [`super::GcnModel`]) precisely so this
//! equivariance holds exactly.

use rand::Rng;

use crate::nn::gemm::{gemm_acc, gemm_a_bt_acc, gemm_at_b_acc};
use crate::nn::{init_he_uniform, NnError, Real, Tensor};

/// One dual-ring convolution layer.
#[derive(Debug, Clone)]
pub struct RingConv<T: Real> {
    c_in: usize,
    c_out: usize,
    /// Same-ring window width (may be even; the window starts `⌊w/2⌋` slots
    /// before the center).
    w: usize,
    /// Other-ring window width (odd, centered).
    v: usize,
    relu: bool,
    /// `[c_out, (w + v) · c_in]`, applied to inner-ring windows.
    inner_weight: Tensor<T>,
    /// `[c_out]`.
    inner_bias: Tensor<T>,
    /// `[c_out, (w + v) · c_in]`, applied to outer-ring windows.
    outer_weight: Tensor<T>,
    /// `[c_out]`.
    outer_bias: Tensor<T>,
}

/// Activations saved by [`RingConv::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct RingConvCache<T: Real> {
    slots: usize,
    /// Gathered windows for the inner update, `[slots, (w+v)·c_in]`.
    gathered_inner: Tensor<T>,
    /// Gathered windows for the outer update, `[slots, (w+v)·c_in]`.
    gathered_outer: Tensor<T>,
    /// Post-activation outputs (ReLU masks are recovered from the output).
    out_inner: Tensor<T>,
    out_outer: Tensor<T>,
}

/// Parameter gradients of one layer, in declaration order.
#[derive(Debug, Clone)]
pub struct RingConvGrads<T: Real> {
    pub inner_weight: Tensor<T>,
    pub inner_bias: Tensor<T>,
    pub outer_weight: Tensor<T>,
    pub outer_bias: Tensor<T>,
}

impl<T: Real> RingConv<T> {
    pub fn new(
        c_in: usize,
        c_out: usize,
        w: usize,
        v: usize,
        relu: bool,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        Self::validate_dims(c_in, c_out, w, v)?;
        let fan_in = (w + v) * c_in;
        let mut inner_weight = Tensor::zeros(vec![c_out, fan_in]);
        init_he_uniform(&mut inner_weight, fan_in, rng);
        let mut outer_weight = Tensor::zeros(vec![c_out, fan_in]);
        init_he_uniform(&mut outer_weight, fan_in, rng);
        Ok(RingConv {
            c_in,
            c_out,
            w,
            v,
            relu,
            inner_weight,
            inner_bias: Tensor::zeros(vec![c_out]),
            outer_weight,
            outer_bias: Tensor::zeros(vec![c_out]),
        })
    }

    pub fn from_tensors(
        w: usize,
        v: usize,
        relu: bool,
        inner_weight: Tensor<T>,
        inner_bias: Tensor<T>,
        outer_weight: Tensor<T>,
        outer_bias: Tensor<T>,
    ) -> Result<Self, NnError> {
        let shape = inner_weight.shape().to_vec();
        if shape.len() != 2 {
            return Err(NnError::ShapeMismatch {
                context: "ring conv inner weight",
                expected: vec![0, (w + v).max(1)],
                got: shape,
            });
        }
        let (c_out, fan_in) = (shape[0], shape[1]);
        if fan_in % (w + v) != 0 {
            return Err(NnError::BadConfig(format!(
                "ring conv weight fan-in {fan_in} is not a multiple of w + v = {}",
                w + v
            )));
        }
        let c_in = fan_in / (w + v);
        Self::validate_dims(c_in, c_out, w, v)?;
        for (name, t, shape) in [
            ("ring conv outer weight", &outer_weight, vec![c_out, fan_in]),
            ("ring conv inner bias", &inner_bias, vec![c_out]),
            ("ring conv outer bias", &outer_bias, vec![c_out]),
        ] {
            if t.shape() != shape.as_slice() {
                return Err(NnError::ShapeMismatch {
                    context: name,
                    expected: shape,
                    got: t.shape().to_vec(),
                });
            }
        }
        Ok(RingConv { c_in, c_out, w, v, relu, inner_weight, inner_bias, outer_weight, outer_bias })
    }

    fn validate_dims(c_in: usize, c_out: usize, w: usize, v: usize) -> Result<(), NnError> {
        if c_in == 0 || c_out == 0 {
            return Err(NnError::BadConfig("ring conv channels must be >= 1".into()));
        }
        if w == 0 {
            return Err(NnError::BadConfig("same-ring window w must be >= 1".into()));
        }
        if v == 0 || v % 2 == 0 {
            return Err(NnError::BadConfig(format!("other-ring window v must be odd >= 1, got {v}")));
        }
        Ok(())
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn window(&self) -> (usize, usize) {
        (self.w, self.v)
    }

    pub fn has_relu(&self) -> bool {
        self.relu
    }

    pub fn params(&self) -> [&Tensor<T>; 4] {
        [&self.inner_weight, &self.inner_bias, &self.outer_weight, &self.outer_bias]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor<T>; 4] {
        [&mut self.inner_weight, &mut self.inner_bias, &mut self.outer_weight, &mut self.outer_bias]
    }

    /// Multiply both weight matrices by `factor` (used to start residual
    /// heads close to the identity-on-template output).
    pub fn scale_weights_in_place(&mut self, factor: T) {
        self.inner_weight.scale_in_place(factor);
        self.outer_weight.scale_in_place(factor);
    }

    pub fn cast<U: Real>(&self) -> RingConv<U> {
        RingConv {
            c_in: self.c_in,
            c_out: self.c_out,
            w: self.w,
            v: self.v,
            relu: self.relu,
            inner_weight: self.inner_weight.cast(),
            inner_bias: self.inner_bias.cast(),
            outer_weight: self.outer_weight.cast(),
            outer_bias: self.outer_bias.cast(),
        }
    }

    /// Gather the window features for updating one ring.
    ///
    /// Row `i` of the result is the concatenation of `own` embeddings at
    /// slots `i - ⌊w/2⌋ … i - ⌊w/2⌋ + w - 1` followed by `other` embeddings
    /// at slots `i - (v-1)/2 … i + (v-1)/2`, all indices modulo the ring
    /// size.
    fn gather(&self, own: &Tensor<T>, other: &Tensor<T>) -> Tensor<T> {
        let slots = own.shape()[0];
        let c = self.c_in;
        let q = (self.w + self.v) * c;
        let mut g = Tensor::zeros(vec![slots, q]);
        let gd = g.data_mut();
        let od = own.data();
        let xd = other.data();
        let s = slots as isize;
        for i in 0..slots {
            let row = i * q;
            for t in 0..self.w {
                let j = (i as isize + t as isize - (self.w / 2) as isize).rem_euclid(s) as usize;
                gd[row + t * c..row + (t + 1) * c].copy_from_slice(&od[j * c..(j + 1) * c]);
            }
            for t in 0..self.v {
                let j = (i as isize + t as isize - ((self.v - 1) / 2) as isize).rem_euclid(s) as usize;
                let base = row + (self.w + t) * c;
                gd[base..base + c].copy_from_slice(&xd[j * c..(j + 1) * c]);
            }
        }
        g
    }

    /// Scatter window gradients back onto the two rings (transpose of
    /// [`Self::gather`]).
    fn scatter(
        &self,
        grad_gathered: &Tensor<T>,
        grad_own: &mut Tensor<T>,
        grad_other: &mut Tensor<T>,
    ) {
        let slots = grad_own.shape()[0];
        let c = self.c_in;
        let q = (self.w + self.v) * c;
        let gd = grad_gathered.data();
        let s = slots as isize;
        for i in 0..slots {
            let row = i * q;
            for t in 0..self.w {
                let j = (i as isize + t as isize - (self.w / 2) as isize).rem_euclid(s) as usize;
                let dst = &mut grad_own.data_mut()[j * c..(j + 1) * c];
                for (d, g) in dst.iter_mut().zip(&gd[row + t * c..row + (t + 1) * c]) {
                    *d += *g;
                }
            }
            for t in 0..self.v {
                let j = (i as isize + t as isize - ((self.v - 1) / 2) as isize).rem_euclid(s) as usize;
                let base = row + (self.w + t) * c;
                let dst = &mut grad_other.data_mut()[j * c..(j + 1) * c];
                for (d, g) in dst.iter_mut().zip(&gd[base..base + c]) {
                    *d += *g;
                }
            }
        }
    }

    fn check_inputs(&self, inner: &Tensor<T>, outer: &Tensor<T>) -> Result<usize, NnError> {
        let shape = inner.shape();
        if shape.len() != 2 || shape[1] != self.c_in {
            return Err(NnError::ShapeMismatch {
                context: "ring conv inner input",
                expected: vec![0, self.c_in],
                got: shape.to_vec(),
            });
        }
        if outer.shape() != shape {
            return Err(NnError::ShapeMismatch {
                context: "ring conv outer input",
                expected: shape.to_vec(),
                got: outer.shape().to_vec(),
            });
        }
        let slots = shape[0];
        if self.w > slots {
            return Err(NnError::BadConfig(format!(
                "same-ring window w = {} exceeds ring size {slots}",
                self.w
            )));
        }
        Ok(slots)
    }

    /// Run one layer: `(inner, outer) -> (new_inner, new_outer, cache)`.
    pub fn forward(
        &self,
        inner: &Tensor<T>,
        outer: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, RingConvCache<T>), NnError> {
        let slots = self.check_inputs(inner, outer)?;
        let q = (self.w + self.v) * self.c_in;
        let gathered_inner = self.gather(inner, outer);
        let gathered_outer = self.gather(outer, inner);

        let run = |g: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>| -> Tensor<T> {
            let mut out = Tensor::zeros(vec![slots, self.c_out]);
            gemm_a_bt_acc(slots, q, self.c_out, g.data(), weight.data(), out.data_mut());
            for row in out.data_mut().chunks_exact_mut(self.c_out) {
                for (o, b) in row.iter_mut().zip(bias.data()) {
                    *o += *b;
                    if self.relu && *o < T::zero() {
                        *o = T::zero();
                    }
                }
            }
            out
        };

        let out_inner = run(&gathered_inner, &self.inner_weight, &self.inner_bias);
        let out_outer = run(&gathered_outer, &self.outer_weight, &self.outer_bias);
        let cache = RingConvCache {
            slots,
            gathered_inner,
            gathered_outer,
            out_inner: out_inner.clone(),
            out_outer: out_outer.clone(),
        };
        Ok((out_inner, out_outer, cache))
    }

    /// Back-propagate through the layer.
    ///
    /// Returns gradients with respect to the two input rings plus parameter
    /// gradients. `grad_out_*` must have shape `[slots, c_out]`.
    pub fn backward(
        &self,
        cache: &RingConvCache<T>,
        grad_out_inner: &Tensor<T>,
        grad_out_outer: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, RingConvGrads<T>), NnError> {
        let slots = cache.slots;
        let q = (self.w + self.v) * self.c_in;
        for (name, g) in
            [("grad_out_inner", grad_out_inner), ("grad_out_outer", grad_out_outer)]
        {
            if g.shape() != [slots, self.c_out] {
                return Err(NnError::ShapeMismatch {
                    context: name,
                    expected: vec![slots, self.c_out],
                    got: g.shape().to_vec(),
                });
            }
        }

        let mut grad_inner = Tensor::zeros(vec![slots, self.c_in]);
        let mut grad_outer = Tensor::zeros(vec![slots, self.c_in]);
        let mut grads = RingConvGrads {
            inner_weight: Tensor::zeros(vec![self.c_out, q]),
            inner_bias: Tensor::zeros(vec![self.c_out]),
            outer_weight: Tensor::zeros(vec![self.c_out, q]),
            outer_bias: Tensor::zeros(vec![self.c_out]),
        };

        // Inner update path (reads inner w-window + outer v-window).
        self.backward_one(
            grad_out_inner,
            &cache.out_inner,
            &cache.gathered_inner,
            &self.inner_weight,
            &mut grads.inner_weight,
            &mut grads.inner_bias,
            &mut grad_inner,
            &mut grad_outer,
        );
        // Outer update path (reads outer w-window + inner v-window).
        self.backward_one(
            grad_out_outer,
            &cache.out_outer,
            &cache.gathered_outer,
            &self.outer_weight,
            &mut grads.outer_weight,
            &mut grads.outer_bias,
            &mut grad_outer,
            &mut grad_inner,
        );
        Ok((grad_inner, grad_outer, grads))
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_one(
        &self,
        grad_out: &Tensor<T>,
        out: &Tensor<T>,
        gathered: &Tensor<T>,
        weight: &Tensor<T>,
        grad_weight: &mut Tensor<T>,
        grad_bias: &mut Tensor<T>,
        grad_own: &mut Tensor<T>,
        grad_other: &mut Tensor<T>,
    ) {
        let slots = out.shape()[0];
        let q = (self.w + self.v) * self.c_in;
        // ReLU mask from the stored output: the derivative is 1 where the
        // output is strictly positive, 0 elsewhere.
        let mut grad_pre = grad_out.clone();
        if self.relu {
            for (g, o) in grad_pre.data_mut().iter_mut().zip(out.data()) {
                if *o <= T::zero() {
                    *g = T::zero();
                }
            }
        }
        // grad_W[o, q] = Σ_s grad_pre[s, o] · gathered[s, q]
        gemm_at_b_acc(
            self.c_out,
            slots,
            q,
            grad_pre.data(),
            gathered.data(),
            grad_weight.data_mut(),
        );
        for row in grad_pre.data().chunks_exact(self.c_out) {
            for (b, g) in grad_bias.data_mut().iter_mut().zip(row) {
                *b += *g;
            }
        }
        // grad_gathered[s, q] = Σ_o grad_pre[s, o] · W[o, q]
        let mut grad_gathered = Tensor::zeros(vec![slots, q]);
        gemm_acc(slots, self.c_out, q, grad_pre.data(), weight.data(), grad_gathered.data_mut());
        self.scatter(&grad_gathered, grad_own, grad_other);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{finite_difference_gradient, max_relative_error};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn random_tensor(shape: &[usize], rng: &mut StdRng) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn zero_weights_give_activated_bias_everywhere() {
        let mut rng = StdRng::seed_from_u64(7);
        let mut layer = RingConv::<f64>::new(3, 2, 4, 3, true, &mut rng).unwrap();
        for p in layer.params_mut() {
            for x in p.data_mut() {
                *x = 0.0;
            }
        }
        layer.params_mut()[1].data_mut().copy_from_slice(&[0.5, -0.25]); // inner bias
        layer.params_mut()[3].data_mut().copy_from_slice(&[-1.0, 2.0]); // outer bias
        let inner = random_tensor(&[10, 3], &mut rng);
        let outer = random_tensor(&[10, 3], &mut rng);
        let (oi, oo, _) = layer.forward(&inner, &outer).unwrap();
        for row in oi.data().chunks_exact(2) {
            assert_eq!(row, &[0.5, 0.0]); // ReLU(-0.25) = 0
        }
        for row in oo.data().chunks_exact(2) {
            assert_eq!(row, &[0.0, 2.0]);
        }
    }

    #[test]
    fn rotation_of_inputs_rotates_outputs() {
        let mut rng = StdRng::seed_from_u64(11);
        let layer = RingConv::<f64>::new(3, 2, 5, 3, true, &mut rng).unwrap();
        let slots = 12;
        let inner = random_tensor(&[slots, 3], &mut rng);
        let outer = random_tensor(&[slots, 3], &mut rng);

        let rotate = |t: &Tensor<f64>, r: usize| {
            let c = t.shape()[1];
            let mut data = vec![0.0; t.len()];
            for i in 0..slots {
                let j = (i + r) % slots;
                data[j * c..(j + 1) * c].copy_from_slice(&t.data()[i * c..(i + 1) * c]);
            }
            Tensor::new(t.shape().to_vec(), data).unwrap()
        };

        let (oi, oo, _) = layer.forward(&inner, &outer).unwrap();
        for r in [1, 5, slots - 1] {
            let (ri, ro, _) = layer.forward(&rotate(&inner, r), &rotate(&outer, r)).unwrap();
            for (a, b) in rotate(&oi, r).data().iter().zip(ri.data()) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in rotate(&oo, r).data().iter().zip(ro.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn even_window_still_covers_w_consecutive_slots() {
        // w = 2 with weights that copy the first window slot turn the layer
        // into a circular shift by ⌊w/2⌋ = 1, which pins down the window
        // start convention.
        let mut rng = StdRng::seed_from_u64(3);
        let mut layer = RingConv::<f64>::new(1, 1, 2, 1, false, &mut rng).unwrap();
        for p in layer.params_mut() {
            for x in p.data_mut() {
                *x = 0.0;
            }
        }
        layer.params_mut()[0].data_mut()[0] = 1.0; // inner weight, first window slot
        let inner = Tensor::new(vec![4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let outer = Tensor::zeros(vec![4, 1]);
        let (oi, _, _) = layer.forward(&inner, &outer).unwrap();
        // Slot i reads slots {i-1, i}; copying the first gives inner[i-1].
        assert_eq!(oi.data(), &[4.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        // Linear layer: spec step 1e-3. (The ReLU variant is probed with a
        // smaller step in `relu_gradients_match_finite_differences` to stay
        // clear of activation kinks.)
        check_fd(false, 1e-3, 1e-4);
    }

    #[test]
    fn relu_gradients_match_finite_differences() {
        check_fd(true, 1e-5, 1e-4);
    }

    fn check_fd(relu: bool, step: f64, tol: f64) {
        let mut rng = StdRng::seed_from_u64(42);
        let layer = RingConv::<f64>::new(4, 3, 4, 3, relu, &mut rng).unwrap();
        let slots = 9;
        let inner = random_tensor(&[slots, 4], &mut rng);
        let outer = random_tensor(&[slots, 4], &mut rng);
        // Fixed cotangent so the scalar objective exercises every output.
        let co_inner = random_tensor(&[slots, 3], &mut rng);
        let co_outer = random_tensor(&[slots, 3], &mut rng);
        let objective = |l: &RingConv<f64>, i: &Tensor<f64>, o: &Tensor<f64>| -> f64 {
            let (oi, oo, _) = l.forward(i, o).unwrap();
            oi.data().iter().zip(co_inner.data()).map(|(a, b)| a * b).sum::<f64>()
                + oo.data().iter().zip(co_outer.data()).map(|(a, b)| a * b).sum::<f64>()
        };

        let (_, _, cache) = layer.forward(&inner, &outer).unwrap();
        let (gi, go, grads) = layer.backward(&cache, &co_inner, &co_outer).unwrap();

        // Inputs.
        for (name, tensor, analytic) in [("inner", &inner, &gi), ("outer", &outer, &go)] {
            let numeric = finite_difference_gradient(
                |x| {
                    let t = Tensor::new(tensor.shape().to_vec(), x.to_vec()).unwrap();
                    if name == "inner" {
                        objective(&layer, &t, &outer)
                    } else {
                        objective(&layer, &inner, &t)
                    }
                },
                tensor.data(),
                step,
            );
            let err = max_relative_error(analytic.data(), &numeric, 1e-6);
            assert!(err < tol, "{name} input grad rel err {err}");
        }

        // Parameters.
        let analytic = [
            grads.inner_weight.clone(),
            grads.inner_bias.clone(),
            grads.outer_weight.clone(),
            grads.outer_bias.clone(),
        ];
        for (idx, a) in analytic.iter().enumerate() {
            let base = layer.params()[idx].data().to_vec();
            let numeric = finite_difference_gradient(
                |x| {
                    let mut l = layer.clone();
                    l.params_mut()[idx].data_mut().copy_from_slice(x);
                    objective(&l, &inner, &outer)
                },
                &base,
                step,
            );
            let err = max_relative_error(a.data(), &numeric, 1e-6);
            assert!(err < tol, "param {idx} grad rel err {err}");
        }
    }

    #[test]
    fn rejects_even_v_and_oversized_w() {
        let mut rng = StdRng::seed_from_u64(0);
        assert!(RingConv::<f32>::new(2, 2, 4, 2, true, &mut rng).is_err());
        let layer = RingConv::<f32>::new(2, 2, 10, 1, true, &mut rng).unwrap();
        let inner = Tensor::zeros(vec![6, 2]);
        let outer = Tensor::zeros(vec![6, 2]);
        assert!(matches!(layer.forward(&inner, &outer), Err(NnError::BadConfig(_))));
    }
}
