use crate::error::{Error, Result};
use crate::nn::{
    relu, relu_backward, sigmoid, sigmoid_backward, BatchNormCache, BatchNormGrads, BatchNormLayer,
    LinearLayer, Matrix, Mode, Parameters, Rng,
};

/// Three-layer feedforward generator: two `linear → batch norm → ReLU` blocks
/// followed by `linear → sigmoid` into vocabulary space.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    pub l1: LinearLayer,
    pub bn1: BatchNormLayer,
    pub l2: LinearLayer,
    pub bn2: BatchNormLayer,
    pub l3: LinearLayer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorGrads {
    pub l1: LinearLayer,
    pub bn1: BatchNormGrads,
    pub l2: LinearLayer,
    pub bn2: BatchNormGrads,
    pub l3: LinearLayer,
}

/// Activations kept from a forward pass for [`GeneratorParams::backward`].
#[derive(Clone, Debug)]
pub struct GeneratorCache {
    z: Matrix,
    bn1: BatchNormCache,
    pre1: Matrix,
    h1: Matrix,
    bn2: BatchNormCache,
    pre2: Matrix,
    h2: Matrix,
    out: Matrix,
}

impl GeneratorCache {
    pub fn output(&self) -> &Matrix {
        &self.out
    }
}

impl GeneratorParams {
    /// Initializes `l1`, `l2`, `l3` in that order from `rng`.
    pub fn init(
        noise_dim: usize,
        hidden: usize,
        vocab: usize,
        bn_momentum: f64,
        bn_eps: f64,
        rng: &mut Rng,
    ) -> Self {
        GeneratorParams {
            l1: LinearLayer::init(noise_dim, hidden, rng),
            bn1: BatchNormLayer::new(hidden, bn_momentum, bn_eps),
            l2: LinearLayer::init(hidden, hidden, rng),
            bn2: BatchNormLayer::new(hidden, bn_momentum, bn_eps),
            l3: LinearLayer::init(hidden, vocab, rng),
        }
    }

    pub fn noise_dim(&self) -> usize {
        self.l1.inputs()
    }

    pub fn vocab_size(&self) -> usize {
        self.l3.outputs()
    }

    fn check_input(&self, z: &Matrix, mode: Mode) -> Result<()> {
        if z.cols() != self.noise_dim() {
            return Err(Error::ShapeMismatch {
                op: "generator_forward",
                left: z.shape(),
                right: (z.rows(), self.noise_dim()),
            });
        }
        if mode == Mode::Train && z.rows() < 2 {
            return Err(Error::BatchTooSmall(z.rows()));
        }
        Ok(())
    }

    /// Forward pass; in train mode the batch-norm running statistics are updated.
    pub fn forward(&mut self, z: &Matrix, mode: Mode) -> Result<GeneratorCache> {
        self.check_input(z, mode)?;
        let a1 = self.l1.forward(z)?;
        let (pre1, bn1) = self.bn1.forward(&a1, mode)?;
        let h1 = relu(&pre1);
        let a2 = self.l2.forward(&h1)?;
        let (pre2, bn2) = self.bn2.forward(&a2, mode)?;
        let h2 = relu(&pre2);
        let out = sigmoid(&self.l3.forward(&h2)?);
        Ok(GeneratorCache {
            z: z.clone(),
            bn1,
            pre1,
            h1,
            bn2,
            pre2,
            h2,
            out,
        })
    }

    /// Same as [`forward`](Self::forward) but leaves running statistics untouched.
    pub fn forward_frozen(&self, z: &Matrix, mode: Mode) -> Result<GeneratorCache> {
        self.check_input(z, mode)?;
        let a1 = self.l1.forward(z)?;
        let (pre1, bn1) = self.bn1.normalize(&a1, mode)?;
        let h1 = relu(&pre1);
        let a2 = self.l2.forward(&h1)?;
        let (pre2, bn2) = self.bn2.normalize(&a2, mode)?;
        let h2 = relu(&pre2);
        let out = sigmoid(&self.l3.forward(&h2)?);
        Ok(GeneratorCache {
            z: z.clone(),
            bn1,
            pre1,
            h1,
            bn2,
            pre2,
            h2,
            out,
        })
    }

    pub fn backward(&self, cache: &GeneratorCache, grad_out: &Matrix) -> Result<GeneratorGrads> {
        let d_logits = sigmoid_backward(&cache.out, grad_out)?;
        let (d_h2, l3) = self.l3.backward(&cache.h2, &d_logits)?;
        let d_pre2 = relu_backward(&cache.pre2, &d_h2)?;
        let (d_a2, bn2) = self.bn2.backward(&cache.bn2, &d_pre2)?;
        let (d_h1, l2) = self.l2.backward(&cache.h1, &d_a2)?;
        let d_pre1 = relu_backward(&cache.pre1, &d_h1)?;
        let (d_a1, bn1) = self.bn1.backward(&cache.bn1, &d_pre1)?;
        let (_, l1) = self.l1.backward(&cache.z, &d_a1)?;
        Ok(GeneratorGrads {
            l1,
            bn1,
            l2,
            bn2,
            l3,
        })
    }
}

impl Parameters for GeneratorParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.l1.weight.data(),
            &self.l1.bias,
            &self.bn1.gamma,
            &self.bn1.beta,
            self.l2.weight.data(),
            &self.l2.bias,
            &self.bn2.gamma,
            &self.bn2.beta,
            self.l3.weight.data(),
            &self.l3.bias,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.l1.weight.data_mut(),
            &mut self.l1.bias,
            &mut self.bn1.gamma,
            &mut self.bn1.beta,
            self.l2.weight.data_mut(),
            &mut self.l2.bias,
            &mut self.bn2.gamma,
            &mut self.bn2.beta,
            self.l3.weight.data_mut(),
            &mut self.l3.bias,
        ]
    }
}

impl Parameters for GeneratorGrads {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.l1.weight.data(),
            &self.l1.bias,
            &self.bn1.gamma,
            &self.bn1.beta,
            self.l2.weight.data(),
            &self.l2.bias,
            &self.bn2.gamma,
            &self.bn2.beta,
            self.l3.weight.data(),
            &self.l3.bias,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.l1.weight.data_mut(),
            &mut self.l1.bias,
            &mut self.bn1.gamma,
            &mut self.bn1.beta,
            self.l2.weight.data_mut(),
            &mut self.l2.bias,
            &mut self.bn2.gamma,
            &mut self.bn2.beta,
            self.l3.weight.data_mut(),
            &mut self.l3.bias,
        ]
    }
}
