//! Row-major n-dimensional tensors.

use crate::nn::{NnError, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(NnError::DataLength { shape, expected, got: data.len() });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor { shape, data: vec![T::zero(); len] }
    }

    pub fn filled(shape: Vec<usize>, value: T) -> Self {
        let len = shape.iter().product();
        Tensor { shape, data: vec![value; len] }
    }

    pub fn from_f64s(shape: Vec<usize>, values: &[f64]) -> Result<Self, NnError> {
        Tensor::new(shape, values.iter().map(|&v| T::from_f64(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Reinterpret with a new shape of the same element count.
    pub fn reshaped(self, shape: Vec<usize>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(NnError::DataLength { shape, expected, got: self.data.len() });
        }
        Ok(Tensor { shape, data: self.data })
    }

    /// Convert the scalar type (used to run f32 models under f64 checks).
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Tensor<T> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Elementwise in-place a += b·scale.
    pub fn add_scaled(&mut self, other: &Tensor<T>, scale: T) -> Result<(), NnError> {
        if self.shape != other.shape {
            return Err(NnError::ShapeMismatch {
                context: "add_scaled",
                expected: self.shape.clone(),
                got: other.shape.clone(),
            });
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b * scale;
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, scale: T) {
        for v in &mut self.data {
            *v *= scale;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
