use serde::{Deserialize, Serialize};

use super::{Matrix, Rng};
use crate::error::{Error, Result};

/// Affine layer `y = x·Wᵀ + b` with `W` stored `(out × in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl LinearLayer {
    /// Weights uniform in `±1/√fan_in`, zero bias. Draws `out × in` uniforms row-major.
    pub fn init(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| (2.0 * rng.uniform() - 1.0) * bound)
            .collect();
        LinearLayer {
            weight: Matrix::from_vec(outputs, inputs, data).expect("length matches shape"),
            bias: vec![0.0; outputs],
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        LinearLayer {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        x.matmul_t(&self.weight)?.add_bias(&self.bias)
    }

    /// Returns `(∂L/∂x, gradients of W and b)` given the layer input and `∂L/∂y`.
    pub fn backward(&self, x: &Matrix, grad_out: &Matrix) -> Result<(Matrix, LinearLayer)> {
        let grad_x = grad_out.matmul(&self.weight)?;
        let grads = LinearLayer {
            weight: grad_out.t_matmul(x)?,
            bias: grad_out.column_sums(),
        };
        Ok((grad_x, grads))
    }
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

pub fn relu_backward(pre: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
    pre.zip_map(grad_out, |p, g| if p > 0.0 { g } else { 0.0 })
}

pub fn leaky_relu(x: &Matrix, slope: f64) -> Matrix {
    x.map(|v| leaky(v, slope))
}

#[inline]
pub fn leaky(v: f64, slope: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        slope * v
    }
}

pub fn leaky_relu_backward(pre: &Matrix, slope: f64, grad_out: &Matrix) -> Result<Matrix> {
    pre.zip_map(grad_out, |p, g| if p >= 0.0 { g } else { slope * g })
}

#[inline]
pub fn logistic(v: f64) -> f64 {
    // split by sign so exp never overflows
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(logistic)
}

/// Takes the sigmoid *output*.
pub fn sigmoid_backward(out: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
    out.zip_map(grad_out, |y, g| g * y * (1.0 - y))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Per-feature batch normalization with learned scale/shift and running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

/// Intermediates needed by [`BatchNormLayer::backward`].
#[derive(Clone, Debug)]
pub struct BatchNormCache {
    mode: Mode,
    x_hat: Matrix,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormGrads {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BatchNormLayer {
    pub fn new(features: usize, momentum: f64, eps: f64) -> Self {
        BatchNormLayer {
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum,
            eps,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes without touching the running statistics.
    ///
    /// Train mode uses the batch mean and biased batch variance, eval mode the
    /// running estimates.
    pub fn normalize(&self, x: &Matrix, mode: Mode) -> Result<(Matrix, BatchNormCache)> {
        let (n, d) = x.shape();
        if d != self.features() {
            return Err(Error::ShapeMismatch {
                op: "batchnorm",
                left: x.shape(),
                right: (1, self.features()),
            });
        }
        let (mean, var) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(Error::BatchTooSmall(n));
                }
                let mean: Vec<f64> = x.column_sums().iter().map(|s| s / n as f64).collect();
                let mut var = vec![0.0; d];
                for row in x.row_iter() {
                    for ((v, &xi), &mu) in var.iter_mut().zip(row).zip(&mean) {
                        *v += (xi - mu) * (xi - mu);
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);
                (mean, var)
            }
            Mode::Eval => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut x_hat = x.clone();
        for r in 0..n {
            for (j, h) in x_hat.row_mut(r).iter_mut().enumerate() {
                *h = (*h - mean[j]) * inv_std[j];
            }
        }
        let mut out = x_hat.clone();
        for r in 0..n {
            for (j, o) in out.row_mut(r).iter_mut().enumerate() {
                *o = self.gamma[j] * *o + self.beta[j];
            }
        }
        let cache = BatchNormCache {
            mode,
            x_hat,
            inv_std,
            batch_mean: mean,
            batch_var: var,
        };
        Ok((out, cache))
    }

    /// Normalizes and, in train mode, folds the batch statistics into the
    /// running estimates: `running = (1 - momentum)·running + momentum·batch`.
    /// The running variance absorbs the biased batch variance.
    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<(Matrix, BatchNormCache)> {
        let (out, cache) = self.normalize(x, mode)?;
        if mode == Mode::Train {
            let m = self.momentum;
            for j in 0..self.features() {
                self.running_mean[j] = (1.0 - m) * self.running_mean[j] + m * cache.batch_mean[j];
                self.running_var[j] = (1.0 - m) * self.running_var[j] + m * cache.batch_var[j];
            }
        }
        Ok((out, cache))
    }

    pub fn backward(
        &self,
        cache: &BatchNormCache,
        grad_out: &Matrix,
    ) -> Result<(Matrix, BatchNormGrads)> {
        let (n, d) = cache.x_hat.shape();
        if grad_out.shape() != (n, d) {
            return Err(Error::ShapeMismatch {
                op: "batchnorm_backward",
                left: grad_out.shape(),
                right: (n, d),
            });
        }
        let mut dgamma = vec![0.0; d];
        let dbeta = grad_out.column_sums();
        for r in 0..n {
            for ((dg, g), h) in dgamma
                .iter_mut()
                .zip(grad_out.row(r))
                .zip(cache.x_hat.row(r))
            {
                *dg += g * h;
            }
        }
        let mut grad_x = Matrix::zeros(n, d);
        match cache.mode {
            Mode::Eval => {
                for r in 0..n {
                    let g = grad_out.row(r);
                    let gx = grad_x.row_mut(r);
                    for j in 0..d {
                        gx[j] = g[j] * self.gamma[j] * cache.inv_std[j];
                    }
                }
            }
            Mode::Train => {
                // dx = γ·inv_std/n · (n·dy − Σdy − x̂·Σ(dy·x̂))
                let nf = n as f64;
                for r in 0..n {
                    let g = grad_out.row(r);
                    let h = cache.x_hat.row(r);
                    let gx = grad_x.row_mut(r);
                    for j in 0..d {
                        gx[j] = self.gamma[j] * cache.inv_std[j] / nf
                            * (nf * g[j] - dbeta[j] - h[j] * dgamma[j]);
                    }
                }
            }
        }
        Ok((
            grad_x,
            BatchNormGrads {
                gamma: dgamma,
                beta: dbeta,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_stats(m: &Matrix, j: usize) -> (f64, f64) {
        let n = m.rows() as f64;
        let mean = (0..m.rows()).map(|r| m.get(r, j)).sum::<f64>() / n;
        let var = (0..m.rows())
            .map(|r| (m.get(r, j) - mean).powi(2))
            .sum::<f64>()
            / n;
        (mean, var)
    }

    #[test]
    fn activation_examples() {
        let x = Matrix::row_vector(&[-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(
            leaky_relu(&Matrix::row_vector(&[-1.0]), 0.02).data(),
            &[-0.02]
        );
        assert_eq!(sigmoid(&Matrix::row_vector(&[0.0])).data(), &[0.5]);
    }

    #[test]
    fn sigmoid_stays_in_open_interval_for_moderate_inputs() {
        let x = Matrix::row_vector(&[-30.0, -5.0, 0.0, 5.0, 30.0]);
        for &v in sigmoid(&x).data() {
            assert!(v > 0.0 && v < 1.0);
        }
        assert!(logistic(-1000.0).is_finite());
    }

    #[test]
    fn leaky_with_zero_slope_is_relu() {
        let x = Matrix::row_vector(&[-3.0, -0.1, 0.0, 0.1, 3.0]);
        assert_eq!(leaky_relu(&x, 0.0), relu(&x));
    }

    #[test]
    fn linear_forward_shapes() {
        let mut rng = Rng::seed_from_u64(0);
        let layer = LinearLayer::init(4, 3, &mut rng);
        let bound = 0.5;
        assert!(layer.weight.data().iter().all(|w| w.abs() <= bound));
        let y = layer.forward(&Matrix::zeros(5, 4)).unwrap();
        assert_eq!(y.shape(), (5, 3));
        assert!(layer.forward(&Matrix::zeros(5, 3)).is_err());
    }

    #[test]
    fn batchnorm_constant_column_maps_to_beta() {
        let mut bn = BatchNormLayer::new(2, 0.1, 1e-5);
        bn.beta = vec![0.7, -0.3];
        let x = Matrix::from_rows(&[[3.0, 1.0], [3.0, 2.0], [3.0, 4.0]]).unwrap();
        let (y, _) = bn.forward(&x, Mode::Train).unwrap();
        for r in 0..3 {
            assert!((y.get(r, 0) - 0.7).abs() < 1e-3);
        }
    }

    #[test]
    fn batchnorm_standardized_column_is_unchanged() {
        let bn = BatchNormLayer::new(1, 0.1, 1e-5);
        let x = Matrix::from_rows(&[[-1.0], [1.0]]).unwrap();
        let (y, _) = bn.normalize(&x, Mode::Train).unwrap();
        for r in 0..2 {
            assert!((y.get(r, 0) - x.get(r, 0)).abs() < 1e-4);
        }
    }

    #[test]
    fn batchnorm_eval_identity_statistics() {
        let bn = BatchNormLayer::new(3, 0.1, 1e-5);
        let x = Matrix::from_rows(&[[0.5, -2.0, 3.0]]).unwrap();
        let (y, _) = bn.normalize(&x, Mode::Eval).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn batchnorm_train_requires_two_rows() {
        let mut bn = BatchNormLayer::new(3, 0.1, 1e-5);
        assert!(matches!(
            bn.forward(&Matrix::zeros(1, 3), Mode::Train),
            Err(Error::BatchTooSmall(1))
        ));
        assert!(bn.forward(&Matrix::zeros(1, 3), Mode::Eval).is_ok());
    }

    #[test]
    fn batchnorm_output_moments() {
        let mut rng = Rng::seed_from_u64(3);
        let x = rng.normal_matrix(64, 4).map(|v| 3.0 * v + 2.0);
        let mut bn = BatchNormLayer::new(4, 0.1, 1e-12);
        bn.gamma = vec![1.5, 0.5, 2.0, 1.0];
        bn.beta = vec![0.1, -1.0, 0.0, 4.0];
        let (y, _) = bn.forward(&x, Mode::Train).unwrap();
        for j in 0..4 {
            let (mean, var) = column_stats(&y, j);
            assert!((mean - bn.beta[j]).abs() < 1e-6);
            assert!((var - bn.gamma[j].powi(2)).abs() < 1e-6);
        }
    }

    #[test]
    fn batchnorm_updates_running_stats() {
        let mut bn = BatchNormLayer::new(1, 0.1, 1e-5);
        let x = Matrix::from_rows(&[[1.0], [3.0]]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        // biased variance of {1, 3} is 1
        assert!((bn.running_var[0] - 1.0).abs() < 1e-15);
        let before = bn.clone();
        bn.forward(&x, Mode::Eval).unwrap();
        assert_eq!(bn, before);
    }
}
