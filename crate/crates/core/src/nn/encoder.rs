//! Compact CNN image encoder: strided conv blocks with ReLU, global average
//! pooling, and a dense head producing the embedding.

use serde::{Deserialize, Serialize};

use crate::imaging::Image;
use crate::nn::layers::{Conv2d, Conv2dCache, Dense, DenseCache, GlobalAvgPool, Relu};
use crate::nn::{NnError, Real, Tensor};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    /// (out_channels, stride) per block; kernel 3, padding 1 throughout.
    pub blocks: Vec<(usize, usize)>,
    /// Embedding size X.
    pub embedding: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            blocks: vec![(16, 2), (32, 2), (64, 2), (96, 2), (128, 2)],
            embedding: 128,
        }
    }
}

impl EncoderConfig {
    /// A small variant for tests and gradient checks.
    pub fn reduced() -> Self {
        EncoderConfig { blocks: vec![(4, 2), (8, 2)], embedding: 16 }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.blocks.is_empty() {
            return Err(NnError::BadConfig("encoder needs at least one block".into()));
        }
        for &(c, s) in &self.blocks {
            if c == 0 {
                return Err(NnError::BadConfig("block channels must be nonzero".into()));
            }
            if !(s == 1 || s == 2) {
                return Err(NnError::BadConfig(format!("block stride must be 1 or 2, got {s}")));
            }
        }
        if self.embedding < 8 {
            return Err(NnError::BadConfig(format!(
                "embedding size must be >= 8, got {}",
                self.embedding
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Encoder<T> {
    cfg: EncoderConfig,
    convs: Vec<Conv2d<T>>,
    head: Dense<T>,
}

#[derive(Debug)]
pub struct EncoderCache<T> {
    conv_caches: Vec<Conv2dCache<T>>,
    relu_outs: Vec<Tensor<T>>,
    pool_shape: [usize; 3],
    head_cache: DenseCache<T>,
}

impl<T: Real> Encoder<T> {
    pub fn new(cfg: EncoderConfig, rng: &mut impl rand::Rng) -> Result<Self, NnError> {
        cfg.validate()?;
        let mut convs = Vec::with_capacity(cfg.blocks.len());
        let mut c_in = 1;
        for &(c_out, stride) in &cfg.blocks {
            convs.push(Conv2d::new(c_in, c_out, 3, stride, 1, rng)?);
            c_in = c_out;
        }
        let head = Dense::new(c_in, cfg.embedding, rng)?;
        Ok(Encoder { cfg, convs, head })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn embedding_size(&self) -> usize {
        self.cfg.embedding
    }

    /// Image as a `[1, h, w]` tensor.
    pub fn image_tensor(img: &Image) -> Tensor<T> {
        let data = img.data().iter().map(|&v| T::from_f64(v as f64)).collect();
        Tensor::new(vec![1, img.height(), img.width()], data)
            .expect("image buffer length matches its dimensions")
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, EncoderCache<T>), NnError> {
        let mut conv_caches = Vec::with_capacity(self.convs.len());
        let mut relu_outs = Vec::with_capacity(self.convs.len());
        let mut cur = x.clone();
        for conv in &self.convs {
            let (out, cache) = conv.forward(&cur)?;
            conv_caches.push(cache);
            cur = Relu.forward(&out);
            relu_outs.push(cur.clone());
        }
        let (pooled, pool_shape) = GlobalAvgPool.forward(&cur)?;
        let (embedding, head_cache) = self.head.forward(&pooled)?;
        Ok((embedding, EncoderCache { conv_caches, relu_outs, pool_shape, head_cache }))
    }

    /// Inference-only forward pass.
    pub fn encode(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.forward(x).map(|(embedding, _)| embedding)
    }

    /// Returns the gradient w.r.t. the input image and the parameter
    /// gradients in `named_params` order.
    pub fn backward(
        &self,
        cache: &EncoderCache<T>,
        grad_embedding: &Tensor<T>,
    ) -> Result<(Tensor<T>, Vec<Tensor<T>>), NnError> {
        let head_grads = self.head.backward(&cache.head_cache, grad_embedding)?;
        let mut grad = GlobalAvgPool.backward(cache.pool_shape, &head_grads.input)?;
        let mut conv_grads = Vec::with_capacity(self.convs.len());
        for i in (0..self.convs.len()).rev() {
            let grad_pre = Relu.backward(&cache.relu_outs[i], &grad)?;
            let grads = self.convs[i].backward(&cache.conv_caches[i], &grad_pre)?;
            grad = grads.input;
            conv_grads.push((grads.weight, grads.bias));
        }
        conv_grads.reverse();
        let mut params = Vec::with_capacity(2 * self.convs.len() + 2);
        for (w, b) in conv_grads {
            params.push(w);
            params.push(b);
        }
        params.push(head_grads.weight);
        params.push(head_grads.bias);
        Ok((grad, params))
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::with_capacity(2 * self.convs.len() + 2);
        for (i, conv) in self.convs.iter().enumerate() {
            out.push((format!("encoder.block{i}.weight"), conv.weight()));
            out.push((format!("encoder.block{i}.bias"), conv.bias()));
        }
        out.push(("encoder.head.weight".into(), self.head.weight()));
        out.push(("encoder.head.bias".into(), self.head.bias()));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::with_capacity(2 * self.convs.len() + 2);
        for conv in &mut self.convs {
            let (w, b) = conv.weight_bias_mut();
            out.push(w);
            out.push(b);
        }
        let (w, b) = self.head.weight_bias_mut();
        out.push(w);
        out.push(b);
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Convert parameters to another scalar type (checks run models in f64).
    pub fn cast<U: Real>(&self) -> Encoder<U> {
        let convs = self
            .convs
            .iter()
            .map(|c| {
                Conv2d::from_tensors(c.weight().cast(), c.bias().cast(), c.stride(), c.padding())
                    .expect("shape is preserved by casting")
            })
            .collect();
        let head = Dense::from_tensors(self.head.weight().cast(), self.head.bias().cast())
            .expect("shape is preserved by casting");
        Encoder { cfg: self.cfg.clone(), convs, head }
    }
}
