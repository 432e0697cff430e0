use serde::{Deserialize, Serialize};

use super::LinearLayer;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            config,
        }
    }

    /// One bias-corrected Adam update of `param` in place.
    ///
    /// Nothing is modified if the shapes disagree or `grad` holds a non-finite value.
    pub fn step(&mut self, param: &mut [f64], grad: &[f64]) -> Result<()> {
        if param.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                left: (param.len(), 1),
                right: (grad.len(), 1),
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("adam gradient".into()));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.t += 1;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in param.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// A set of trainable tensors exposed in a fixed order.
///
/// Gradient containers implement the same trait with the same order, which is
/// what lets [`Adam`] pair them up.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }
}

impl Parameters for LinearLayer {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.weight.data(), &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.data_mut(), &mut self.bias]
    }
}

/// Adam over every tensor of a [`Parameters`] set.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub states: Vec<AdamState>,
}

impl Adam {
    pub fn new<P: Parameters + ?Sized>(params: &P, config: AdamConfig) -> Self {
        Adam {
            states: params
                .tensors()
                .iter()
                .map(|t| AdamState::new(t.len(), config))
                .collect(),
        }
    }

    pub fn step<P, G>(&mut self, params: &mut P, grads: &G) -> Result<()>
    where
        P: Parameters + ?Sized,
        G: Parameters + ?Sized,
    {
        let grads = grads.tensors();
        if grads.iter().flat_map(|g| g.iter()).any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("adam gradient".into()));
        }
        let params = params.tensors_mut();
        if params.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(Error::invalid("optimizer/parameter tensor count mismatch"));
        }
        for ((state, p), g) in self.states.iter_mut().zip(params).zip(grads) {
            state.step(p, g)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_matches_hand_evaluation() {
        // t=1: m = 0.1, v = 0.001, m̂ = 1, v̂ = 1, step = 1e-4 · 1 / (1 + 1e-8)
        let mut state = AdamState::new(1, AdamConfig::default());
        let mut theta = [1.0];
        state.step(&mut theta, &[1.0]).unwrap();
        let expected = 1.0 - 1e-4 / (1.0 + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-15);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut state = AdamState::new(3, AdamConfig::default());
        let mut theta = [0.5, -1.0, 2.0];
        state.step(&mut theta, &[0.0; 3]).unwrap();
        assert_eq!(theta, [0.5, -1.0, 2.0]);
    }

    #[test]
    fn two_steps_accumulate_state() {
        let mut state = AdamState::new(2, AdamConfig::default());
        let mut theta = [0.0, 0.0];
        state.step(&mut theta, &[0.3, -0.2]).unwrap();
        state.step(&mut theta, &[0.3, -0.2]).unwrap();
        assert_eq!(state.t, 2);
        assert!(state.v.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn zero_lr_is_bit_identical() {
        let config = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        let mut state = AdamState::new(4, config);
        let before = [0.1, -3.7, 1e-300, 42.0];
        let mut theta = before;
        for _ in 0..5 {
            state.step(&mut theta, &[1.0, -2.0, 0.5, 1e9]).unwrap();
        }
        for (a, b) in theta.iter().zip(&before) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let mut state = AdamState::new(2, AdamConfig::default());
        let mut theta = [1.0, 1.0];
        assert!(state.step(&mut theta, &[f64::NAN, 0.0]).is_err());
        assert_eq!(state.t, 0);
        assert_eq!(theta, [1.0, 1.0]);
    }

    #[test]
    fn flatten_round_trip() {
        let mut rng = crate::nn::Rng::seed_from_u64(4);
        let layer = LinearLayer::init(3, 2, &mut rng);
        let mut other = LinearLayer::zeros(3, 2);
        other.assign_flat(&layer.flatten());
        assert_eq!(other, layer);
        assert_eq!(layer.num_params(), 8);
    }
}
