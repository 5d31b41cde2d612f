//! Minimal neural-network engine: tensors, dense/convolution layers with
//! reverse-mode gradients, Adam, a compact image encoder, and a versioned
//! weights container.
//!
//! The engine is generic over the scalar type. Production models run in
//! `f32` (storage, training, inference); gradient checks instantiate the
//! same code in `f64`, where central finite differences at step 1e-3 are
//! meaningful against tolerances of 1e-4 and below — in `f32` the subtraction
//! noise alone is of the same order as the tolerance.
//!
//! Layers follow a forward-with-cache / backward protocol: `forward` returns
//! the output plus a cache holding exactly what the backward pass needs;
//! `backward` consumes the upstream gradient and returns the gradient with
//! respect to the input and to each parameter tensor. Parameter order is the
//! declaration order and is stable across calls — optimizers and the weights
//! container rely on it.

use std::fmt;

use thiserror::Error;

pub mod adam;
pub(crate) mod gemm;
pub mod gradcheck;
pub mod layers;
pub mod tensor;
pub mod weights;

pub mod encoder;

pub use adam::{Adam, AdamConfig};
pub use encoder::{Encoder, EncoderCache, EncoderConfig};
pub use gradcheck::{finite_difference_gradient, max_relative_error};
pub use layers::{Conv2d, Dense, DenseCache, GlobalAvgPool, Relu};
pub use tensor::Tensor;
pub use weights::{load_weights, load_weights_file, save_weights, save_weights_file, WeightsError};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{context}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch { context: &'static str, expected: Vec<usize>, got: Vec<usize> },
    #[error("data length {got} does not match shape {shape:?} ({expected} elements)")]
    DataLength { shape: Vec<usize>, expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

/// Scalar abstraction over `f32`/`f64`.
pub trait Real:
    num_traits::Float
    + num_traits::NumAssignOps
    + std::iter::Sum
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    const DTYPE: &'static str;

    fn from_f64(v: f64) -> Self;

    fn to_f64(self) -> f64;
}

impl Real for f32 {
    const DTYPE: &'static str = "f32";

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const DTYPE: &'static str = "f64";

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(self) -> f64 {
        self
    }
}

/// He-uniform bound for a layer with the given fan-in.
pub(crate) fn he_uniform_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in as f64).sqrt()
}

/// Fill a parameter tensor with He-uniform samples (draw order is the data
/// order, so initialization is a pure function of the RNG stream).
pub(crate) fn init_he_uniform<T: Real>(
    tensor: &mut Tensor<T>,
    fan_in: usize,
    rng: &mut impl rand::Rng,
) {
    let bound = he_uniform_bound(fan_in);
    for v in tensor.data_mut() {
        *v = T::from_f64(rng.random_range(-bound..bound));
    }
}
