//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use crate::nn::{NnError, Real, Tensor};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-5, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        // A zero learning rate is allowed: it freezes parameters while the
        // rest of a training loop (loss curves, evaluation) runs unchanged.
        if !(self.learning_rate >= 0.0) {
            return Err(NnError::BadConfig("learning rate must be >= 0".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return Err(NnError::BadConfig(format!("{name} must be in (0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(NnError::BadConfig("eps must be > 0".into()));
        }
        Ok(())
    }
}

/// Optimizer state over an ordered parameter list. The order of the
/// parameter tensors must be identical on every call.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(cfg: AdamConfig, param_shapes: &[&[usize]]) -> Result<Self, NnError> {
        cfg.validate()?;
        let m = param_shapes.iter().map(|s| Tensor::zeros(s.to_vec())).collect();
        let v = param_shapes.iter().map(|s| Tensor::zeros(s.to_vec())).collect();
        Ok(Adam { cfg, step: 0, m, v })
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(
        &mut self,
        params: &mut [&mut Tensor<T>],
        grads: &[Tensor<T>],
    ) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::BadConfig(format!(
                "optimizer built for {} tensors, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let b1 = T::from_f64(self.cfg.beta1);
        let b2 = T::from_f64(self.cfg.beta2);
        let one = T::one();
        let lr = T::from_f64(self.cfg.learning_rate);
        let eps = T::from_f64(self.cfg.eps);
        let corr1 = one - T::from_f64(self.cfg.beta1.powi(self.step as i32));
        let corr2 = one - T::from_f64(self.cfg.beta2.powi(self.step as i32));
        for ((param, grad), (m, v)) in
            params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(&mut self.v))
        {
            if param.shape() != grad.shape() || param.shape() != m.shape() {
                return Err(NnError::ShapeMismatch {
                    context: "adam step",
                    expected: m.shape().to_vec(),
                    got: param.shape().to_vec(),
                });
            }
            for i in 0..grad.len() {
                let g = grad.data()[i];
                let mi = b1 * m.data()[i] + (one - b1) * g;
                let vi = b2 * v.data()[i] + (one - b2) * g * g;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let m_hat = mi / corr1;
                let v_hat = vi / corr2;
                param.data_mut()[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param_adam(lr: f64) -> (Adam<f64>, Tensor<f64>) {
        let cfg = AdamConfig { learning_rate: lr, ..AdamConfig::default() };
        let shapes: [&[usize]; 1] = [&[3]];
        (Adam::new(cfg, &shapes).unwrap(), Tensor::from_f64s(vec![3], &[1.0, -2.0, 0.5]).unwrap())
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let (mut adam, mut p) = single_param_adam(0.1);
        let before = p.clone();
        let g = Tensor::zeros(vec![3]);
        adam.step(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn constant_gradient_approaches_lr_times_sign() {
        // With g constant, m̂ → g and v̂ → g², so the step → lr·sign(g).
        let (mut adam, mut p) = single_param_adam(0.01);
        let g = Tensor::from_f64s(vec![3], &[2.5, -0.3, 1e-4]).unwrap();
        let mut prev = p.clone();
        for step in 0..2000 {
            adam.step(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
            if step >= 1999 {
                break;
            }
            prev = p.clone();
        }
        for i in 0..3 {
            let delta = prev.data()[i] - p.data()[i];
            let expected = 0.01 * g.data()[i].signum();
            assert!(
                (delta - expected).abs() < 1e-4,
                "component {i}: step {delta} vs {expected}"
            );
        }
    }

    #[test]
    fn two_runs_are_bit_identical() {
        let run = || {
            let (mut adam, mut p) = single_param_adam(0.05);
            for k in 1..=50 {
                let g = Tensor::from_f64s(
                    vec![3],
                    &[(k as f64).sin(), (k as f64).cos(), 1.0 / k as f64],
                )
                .unwrap();
                adam.step(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig::default().validate().is_ok());
        // Zero freezes parameters and is valid; negative rates are not.
        assert!(AdamConfig { learning_rate: 0.0, ..Default::default() }.validate().is_ok());
        assert!(AdamConfig { learning_rate: -1e-3, ..Default::default() }.validate().is_err());
        assert!(AdamConfig { beta1: 1.0, ..Default::default() }.validate().is_err());
        assert!(AdamConfig { beta2: -0.1, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn mismatched_tensor_count_is_an_error() {
        let (mut adam, mut p) = single_param_adam(0.1);
        let g = Tensor::zeros(vec![3]);
        let result = adam.step(&mut [&mut p], &[g.clone(), g]);
        assert!(result.is_err());
    }
}
