//! Layers: 2-D convolution (as cross-correlation), ReLU, global average
//! pooling, and dense. Single-sample tensors; the training loop iterates
//! over batch elements and averages parameter gradients.

use crate::nn::gemm::{gemm_a_bt_acc, gemm_acc, gemm_at_b_acc};
use crate::nn::{init_he_uniform, NnError, Real, Tensor};

fn expect_shape<T: Real>(
    context: &'static str,
    t: &Tensor<T>,
    expected: &[usize],
) -> Result<(), NnError> {
    if t.shape() != expected {
        return Err(NnError::ShapeMismatch {
            context,
            expected: expected.to_vec(),
            got: t.shape().to_vec(),
        });
    }
    Ok(())
}

/// 2-D convolution over `[c_in, h, w]` tensors.
///
/// Output height is `(h + 2·padding − kernel)/stride + 1` (floor); with
/// kernel 3, padding 1, stride 2 this is `ceil(h/2)`.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    weight: Tensor<T>, // [c_out, c_in, k, k]
    bias: Tensor<T>,   // [c_out]
    c_in: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
}

#[derive(Debug)]
pub struct Conv2dCache<T> {
    cols: Tensor<T>, // [c_in·k·k, oh·ow]
    in_shape: [usize; 3],
    out_shape: [usize; 3],
}

#[derive(Debug)]
pub struct Conv2dGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl rand::Rng,
    ) -> Result<Self, NnError> {
        if c_in == 0 || c_out == 0 || kernel == 0 || stride == 0 {
            return Err(NnError::BadConfig("conv dimensions and stride must be nonzero".into()));
        }
        let mut weight = Tensor::zeros(vec![c_out, c_in, kernel, kernel]);
        init_he_uniform(&mut weight, c_in * kernel * kernel, rng);
        Ok(Conv2d {
            weight,
            bias: Tensor::zeros(vec![c_out]),
            c_in,
            c_out,
            kernel,
            stride,
            padding,
        })
    }

    pub fn from_tensors(
        weight: Tensor<T>,
        bias: Tensor<T>,
        stride: usize,
        padding: usize,
    ) -> Result<Self, NnError> {
        let s = weight.shape();
        if s.len() != 4 || s[2] != s[3] {
            return Err(NnError::BadConfig(format!(
                "conv weight must be [c_out, c_in, k, k], got {s:?}"
            )));
        }
        let (c_out, c_in, kernel) = (s[0], s[1], s[2]);
        expect_shape("conv bias", &bias, &[c_out])?;
        if stride == 0 {
            return Err(NnError::BadConfig("stride must be nonzero".into()));
        }
        Ok(Conv2d { weight, bias, c_in, c_out, kernel, stride, padding })
    }

    pub fn weight(&self) -> &Tensor<T> {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut Tensor<T> {
        &mut self.weight
    }

    pub fn bias(&self) -> &Tensor<T> {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut Tensor<T> {
        &mut self.bias
    }

    /// Both parameter tensors at once (for optimizer parameter lists).
    pub fn weight_bias_mut(&mut self) -> (&mut Tensor<T>, &mut Tensor<T>) {
        (&mut self.weight, &mut self.bias)
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn output_shape(&self, in_shape: &[usize]) -> Result<[usize; 3], NnError> {
        if in_shape.len() != 3 || in_shape[0] != self.c_in {
            return Err(NnError::ShapeMismatch {
                context: "conv input",
                expected: vec![self.c_in, 0, 0],
                got: in_shape.to_vec(),
            });
        }
        let (h, w) = (in_shape[1], in_shape[2]);
        if h + 2 * self.padding < self.kernel || w + 2 * self.padding < self.kernel {
            return Err(NnError::BadConfig(format!(
                "input {h}x{w} smaller than kernel {} at padding {}",
                self.kernel, self.padding
            )));
        }
        let oh = (h + 2 * self.padding - self.kernel) / self.stride + 1;
        let ow = (w + 2 * self.padding - self.kernel) / self.stride + 1;
        Ok([self.c_out, oh, ow])
    }

    fn im2col(&self, x: &Tensor<T>, oh: usize, ow: usize) -> Tensor<T> {
        let (c_in, h, w) = (self.c_in, x.shape()[1], x.shape()[2]);
        let k = self.kernel;
        let mut cols = Tensor::zeros(vec![c_in * k * k, oh * ow]);
        let data = x.data();
        let out = cols.data_mut();
        for c in 0..c_in {
            for ky in 0..k {
                for kx in 0..k {
                    let row = ((c * k + ky) * k + kx) * (oh * ow);
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        let src = (c * h + iy as usize) * w;
                        let dst = row + oy * ow;
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            if ix >= 0 && (ix as usize) < w {
                                out[dst + ox] = data[src + ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[T], in_shape: [usize; 3], oh: usize, ow: usize) -> Tensor<T> {
        let [c_in, h, w] = in_shape;
        let k = self.kernel;
        let mut grad = Tensor::zeros(vec![c_in, h, w]);
        let out = grad.data_mut();
        for c in 0..c_in {
            for ky in 0..k {
                for kx in 0..k {
                    let row = ((c * k + ky) * k + kx) * (oh * ow);
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        let dst = (c * h + iy as usize) * w;
                        let src = row + oy * ow;
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            if ix >= 0 && (ix as usize) < w {
                                out[dst + ix as usize] += cols[src + ox];
                            }
                        }
                    }
                }
            }
        }
        grad
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Conv2dCache<T>), NnError> {
        let [c_out, oh, ow] = self.output_shape(x.shape())?;
        let cols = self.im2col(x, oh, ow);
        let mut out = Tensor::zeros(vec![c_out, oh, ow]);
        gemm_acc(
            c_out,
            self.c_in * self.kernel * self.kernel,
            oh * ow,
            self.weight.data(),
            cols.data(),
            out.data_mut(),
        );
        for c in 0..c_out {
            let b = self.bias.data()[c];
            for v in &mut out.data_mut()[c * oh * ow..(c + 1) * oh * ow] {
                *v += b;
            }
        }
        let cache = Conv2dCache {
            cols,
            in_shape: [x.shape()[0], x.shape()[1], x.shape()[2]],
            out_shape: [c_out, oh, ow],
        };
        Ok((out, cache))
    }

    pub fn backward(
        &self,
        cache: &Conv2dCache<T>,
        grad_out: &Tensor<T>,
    ) -> Result<Conv2dGrads<T>, NnError> {
        let [c_out, oh, ow] = cache.out_shape;
        expect_shape("conv grad_out", grad_out, &[c_out, oh, ow])?;
        let ckk = self.c_in * self.kernel * self.kernel;

        let mut grad_bias = Tensor::zeros(vec![c_out]);
        for c in 0..c_out {
            grad_bias.data_mut()[c] =
                grad_out.data()[c * oh * ow..(c + 1) * oh * ow].iter().copied().sum();
        }

        let mut grad_weight = Tensor::zeros(vec![self.c_out, self.c_in, self.kernel, self.kernel]);
        gemm_a_bt_acc(
            c_out,
            oh * ow,
            ckk,
            grad_out.data(),
            cache.cols.data(),
            grad_weight.data_mut(),
        );

        let mut grad_cols = vec![T::zero(); ckk * oh * ow];
        gemm_at_b_acc(ckk, c_out, oh * ow, self.weight.data(), grad_out.data(), &mut grad_cols);
        let grad_input = self.col2im(&grad_cols, cache.in_shape, oh, ow);

        Ok(Conv2dGrads { input: grad_input, weight: grad_weight, bias: grad_bias })
    }
}

/// ReLU; the cache is the output itself (the gradient mask is `out > 0`).
#[derive(Debug, Clone, Copy, Default)]
pub struct Relu;

impl Relu {
    pub fn forward<T: Real>(&self, x: &Tensor<T>) -> Tensor<T> {
        x.map(|v| if v > T::zero() { v } else { T::zero() })
    }

    pub fn backward<T: Real>(
        &self,
        out: &Tensor<T>,
        grad_out: &Tensor<T>,
    ) -> Result<Tensor<T>, NnError> {
        expect_shape("relu grad_out", grad_out, out.shape())?;
        let data = out
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&o, &g)| if o > T::zero() { g } else { T::zero() })
            .collect();
        Tensor::new(out.shape().to_vec(), data)
    }
}

/// Mean over the spatial dimensions: `[c, h, w]` → `[c]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GlobalAvgPool;

impl GlobalAvgPool {
    pub fn forward<T: Real>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, [usize; 3]), NnError> {
        let s = x.shape();
        if s.len() != 3 {
            return Err(NnError::ShapeMismatch {
                context: "global avg pool input",
                expected: vec![0, 0, 0],
                got: s.to_vec(),
            });
        }
        let (c, hw) = (s[0], s[1] * s[2]);
        let inv = T::from_f64(1.0 / hw as f64);
        let data = (0..c)
            .map(|i| x.data()[i * hw..(i + 1) * hw].iter().copied().sum::<T>() * inv)
            .collect();
        Ok((Tensor::new(vec![c], data)?, [s[0], s[1], s[2]]))
    }

    pub fn backward<T: Real>(
        &self,
        in_shape: [usize; 3],
        grad_out: &Tensor<T>,
    ) -> Result<Tensor<T>, NnError> {
        let [c, h, w] = in_shape;
        expect_shape("global avg pool grad_out", grad_out, &[c])?;
        let inv = T::from_f64(1.0 / (h * w) as f64);
        let mut grad = Tensor::zeros(vec![c, h, w]);
        for i in 0..c {
            let g = grad_out.data()[i] * inv;
            for v in &mut grad.data_mut()[i * h * w..(i + 1) * h * w] {
                *v = g;
            }
        }
        Ok(grad)
    }
}

/// Fully connected affine map on flat vectors.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    weight: Tensor<T>, // [out, in]
    bias: Tensor<T>,   // [out]
    in_size: usize,
    out_size: usize,
}

#[derive(Debug)]
pub struct DenseCache<T> {
    input: Tensor<T>,
}

#[derive(Debug)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Dense<T> {
    pub fn new(in_size: usize, out_size: usize, rng: &mut impl rand::Rng) -> Result<Self, NnError> {
        if in_size == 0 || out_size == 0 {
            return Err(NnError::BadConfig("dense sizes must be nonzero".into()));
        }
        let mut weight = Tensor::zeros(vec![out_size, in_size]);
        init_he_uniform(&mut weight, in_size, rng);
        Ok(Dense { weight, bias: Tensor::zeros(vec![out_size]), in_size, out_size })
    }

    pub fn from_tensors(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self, NnError> {
        let s = weight.shape();
        if s.len() != 2 {
            return Err(NnError::BadConfig(format!("dense weight must be 2-D, got {s:?}")));
        }
        let (out_size, in_size) = (s[0], s[1]);
        expect_shape("dense bias", &bias, &[out_size])?;
        Ok(Dense { weight, bias, in_size, out_size })
    }

    pub fn in_size(&self) -> usize {
        self.in_size
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn weight(&self) -> &Tensor<T> {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut Tensor<T> {
        &mut self.weight
    }

    pub fn bias(&self) -> &Tensor<T> {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut Tensor<T> {
        &mut self.bias
    }

    /// Both parameter tensors at once (for optimizer parameter lists).
    pub fn weight_bias_mut(&mut self) -> (&mut Tensor<T>, &mut Tensor<T>) {
        (&mut self.weight, &mut self.bias)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, DenseCache<T>), NnError> {
        expect_shape("dense input", x, &[self.in_size])?;
        let mut out = self.bias.clone();
        gemm_acc(self.out_size, self.in_size, 1, self.weight.data(), x.data(), out.data_mut());
        Ok((out, DenseCache { input: x.clone() }))
    }

    pub fn backward(
        &self,
        cache: &DenseCache<T>,
        grad_out: &Tensor<T>,
    ) -> Result<DenseGrads<T>, NnError> {
        expect_shape("dense grad_out", grad_out, &[self.out_size])?;
        let mut grad_input = Tensor::zeros(vec![self.in_size]);
        gemm_at_b_acc(
            self.in_size,
            self.out_size,
            1,
            self.weight.data(),
            grad_out.data(),
            grad_input.data_mut(),
        );
        let mut grad_weight = Tensor::zeros(vec![self.out_size, self.in_size]);
        gemm_acc(
            self.out_size,
            1,
            self.in_size,
            grad_out.data(),
            cache.input.data(),
            grad_weight.data_mut(),
        );
        Ok(DenseGrads { input: grad_input, weight: grad_weight, bias: grad_out.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{finite_difference_gradient, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let mut t = Tensor::zeros(shape);
        init_he_uniform(&mut t, 4, rng);
        t
    }

    #[test]
    fn identity_one_by_one_conv() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random_tensor(vec![2, 5, 5], &mut rng);
        // Weights select each input channel once: weight[o][i] = δ(o,i).
        let weight =
            Tensor::from_f64s(vec![2, 2, 1, 1], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let conv = Conv2d::from_tensors(weight, Tensor::zeros(vec![2]), 1, 0).unwrap();
        let (out, _) = conv.forward(&x).unwrap();
        assert_eq!(out.shape(), x.shape());
        for (a, b) in out.data().iter().zip(x.data()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn stride_two_halves_spatial_dims_ceil() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv2d::<f64>::new(1, 3, 3, 2, 1, &mut rng).unwrap();
        assert_eq!(conv.output_shape(&[1, 8, 8]).unwrap(), [3, 4, 4]);
        assert_eq!(conv.output_shape(&[1, 9, 7]).unwrap(), [3, 5, 4]);
    }

    #[test]
    fn conv_matches_direct_convolution() {
        // Compare against an index-by-index cross-correlation.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let conv = Conv2d::<f64>::new(2, 3, 3, 2, 1, &mut rng).unwrap();
        let x = random_tensor(vec![2, 6, 7], &mut rng);
        let (out, _) = conv.forward(&x).unwrap();
        let [co, oh, ow] = conv.output_shape(x.shape()).unwrap();
        for o in 0..co {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = conv.bias().data()[o];
                    for c in 0..2 {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = (oy * 2 + ky) as isize - 1;
                                let ix = (ox * 2 + kx) as isize - 1;
                                if iy < 0 || ix < 0 || iy >= 6 || ix >= 7 {
                                    continue;
                                }
                                let wv =
                                    conv.weight().data()[((o * 2 + c) * 3 + ky) * 3 + kx];
                                acc += wv * x.data()[(c * 6 + iy as usize) * 7 + ix as usize];
                            }
                        }
                    }
                    let got = out.data()[(o * oh + oy) * ow + ox];
                    assert!((got - acc).abs() < 1e-12, "({o},{oy},{ox}): {got} vs {acc}");
                }
            }
        }
    }

    /// Scalar loss = Σ out·proj, so grad_out = proj.
    fn conv_loss(conv: &Conv2d<f64>, x: &Tensor<f64>, proj: &[f64]) -> f64 {
        let (out, _) = conv.forward(x).unwrap();
        out.data().iter().zip(proj).map(|(&o, &p)| o * p).sum()
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conv = Conv2d::<f64>::new(2, 3, 3, 2, 1, &mut rng).unwrap();
        let x = random_tensor(vec![2, 8, 8], &mut rng);
        let [co, oh, ow] = conv.output_shape(x.shape()).unwrap();
        let proj: Vec<f64> = random_tensor(vec![co * oh * ow], &mut rng).into_data();

        let (out, cache) = conv.forward(&x).unwrap();
        let grad_out = Tensor::new(out.shape().to_vec(), proj.clone()).unwrap();
        let grads = conv.backward(&cache, &grad_out).unwrap();

        let fd_w = finite_difference_gradient(
            |w| {
                let mut c = conv.clone();
                c.weight_mut().data_mut().copy_from_slice(w);
                conv_loss(&c, &x, &proj)
            },
            conv.weight().data(),
            1e-3,
        );
        assert!(max_relative_error(grads.weight.data(), &fd_w, 1e-6) < 1e-4);

        let fd_b = finite_difference_gradient(
            |b| {
                let mut c = conv.clone();
                c.bias_mut().data_mut().copy_from_slice(b);
                conv_loss(&c, &x, &proj)
            },
            conv.bias().data(),
            1e-3,
        );
        assert!(max_relative_error(grads.bias.data(), &fd_b, 1e-6) < 1e-4);

        let fd_x = finite_difference_gradient(
            |xd| {
                let xt = Tensor::new(x.shape().to_vec(), xd.to_vec()).unwrap();
                conv_loss(&conv, &xt, &proj)
            },
            x.data(),
            1e-3,
        );
        assert!(max_relative_error(grads.input.data(), &fd_x, 1e-6) < 1e-4);
    }

    #[test]
    fn relu_forward_and_backward() {
        let x = Tensor::<f64>::from_f64s(vec![4], &[-1.0, 0.0, 2.0, -3.0]).unwrap();
        let out = Relu.forward(&x);
        assert_eq!(out.data(), &[0.0, 0.0, 2.0, 0.0]);
        let g = Tensor::from_f64s(vec![4], &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let gx = Relu.backward(&out, &g).unwrap();
        assert_eq!(gx.data(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn pool_averages_and_distributes() {
        let x = Tensor::<f64>::from_f64s(vec![2, 1, 2], &[1.0, 3.0, 10.0, 20.0]).unwrap();
        let (out, shape) = GlobalAvgPool.forward(&x).unwrap();
        assert_eq!(out.data(), &[2.0, 15.0]);
        let g = Tensor::<f64>::from_f64s(vec![2], &[4.0, 8.0]).unwrap();
        let gx = GlobalAvgPool.backward(shape, &g).unwrap();
        assert_eq!(gx.data(), &[2.0, 2.0, 4.0, 4.0]);
    }

    #[test]
    fn dense_zero_weights_yield_bias() {
        let w = Tensor::zeros(vec![3, 4]);
        let b = Tensor::from_f64s(vec![3], &[1.0, 2.0, 3.0]).unwrap();
        let dense = Dense::from_tensors(w, b).unwrap();
        let (out, _) = dense.forward(&Tensor::filled(vec![4], 5.0)).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dense = Dense::<f64>::new(6, 4, &mut rng).unwrap();
        let x = random_tensor(vec![6], &mut rng);
        let proj: Vec<f64> = random_tensor(vec![4], &mut rng).into_data();

        let loss = |d: &Dense<f64>, xv: &Tensor<f64>| -> f64 {
            let (out, _) = d.forward(xv).unwrap();
            out.data().iter().zip(&proj).map(|(&o, &p)| o * p).sum()
        };

        let (_, cache) = dense.forward(&x).unwrap();
        let grad_out = Tensor::new(vec![4], proj.clone()).unwrap();
        let grads = dense.backward(&cache, &grad_out).unwrap();

        let fd_w = finite_difference_gradient(
            |w| {
                let mut d = dense.clone();
                d.weight_mut().data_mut().copy_from_slice(w);
                loss(&d, &x)
            },
            dense.weight().data(),
            1e-3,
        );
        assert!(max_relative_error(grads.weight.data(), &fd_w, 1e-6) < 1e-4);

        let fd_x = finite_difference_gradient(
            |xd| loss(&dense, &Tensor::new(vec![6], xd.to_vec()).unwrap()),
            x.data(),
            1e-3,
        );
        assert!(max_relative_error(grads.input.data(), &fd_x, 1e-6) < 1e-4);
    }

    #[test]
    fn shape_mismatches_are_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let conv = Conv2d::<f64>::new(2, 3, 3, 1, 1, &mut rng).unwrap();
        assert!(matches!(
            conv.forward(&Tensor::zeros(vec![1, 8, 8])),
            Err(NnError::ShapeMismatch { .. })
        ));
        let dense = Dense::<f64>::new(6, 4, &mut rng).unwrap();
        assert!(matches!(
            dense.forward(&Tensor::zeros(vec![5])),
            Err(NnError::ShapeMismatch { .. })
        ));
    }
}
