use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{leaky_relu, leaky_relu_backward, LinearLayer, Matrix, Parameters, Rng};

/// How per-document squared reconstruction error is reduced to an energy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyNorm {
    /// `(1/V)·Σᵢ(xᵢ − yᵢ)²`
    Mean,
    /// `Σᵢ(xᵢ − yᵢ)²`
    #[default]
    Sum,
}

impl EnergyNorm {
    fn divisor(self, vocab: usize) -> f64 {
        match self {
            EnergyNorm::Mean => vocab as f64,
            EnergyNorm::Sum => 1.0,
        }
    }
}

/// Masking noise: every input element is zeroed independently with probability `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorruptionSpec {
    p: f64,
}

impl CorruptionSpec {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!(
                "corruption probability {p} outside [0, 1]"
            )));
        }
        Ok(CorruptionSpec { p })
    }

    pub fn none() -> Self {
        CorruptionSpec { p: 0.0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Keep-mask of 0/1 entries, or `None` when `p == 0`.
    ///
    /// Draws one uniform per element, row-major; element is zeroed iff the draw
    /// is `< p`. With `p == 0` nothing is drawn.
    pub fn sample_mask(&self, rows: usize, cols: usize, rng: &mut Rng) -> Option<Matrix> {
        if self.p == 0.0 {
            return None;
        }
        let data = (0..rows * cols)
            .map(|_| if rng.uniform() < self.p { 0.0 } else { 1.0 })
            .collect();
        Some(Matrix::from_vec(rows, cols, data).expect("length matches shape"))
    }
}

/// Applies masking noise to `x`.
pub fn corrupt(x: &Matrix, spec: &CorruptionSpec, rng: &mut Rng) -> Matrix {
    match spec.sample_mask(x.rows(), x.cols(), rng) {
        Some(mask) => x.hadamard(&mask).expect("mask has the input's shape"),
        None => x.clone(),
    }
}

/// Per-row squared reconstruction error, reduced according to `norm`.
pub fn energy(x: &Matrix, y: &Matrix, norm: EnergyNorm) -> Result<Vec<f64>> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch {
            op: "energy",
            left: x.shape(),
            right: y.shape(),
        });
    }
    let div = norm.divisor(x.cols());
    Ok(x.row_iter()
        .zip(y.row_iter())
        .map(|(xr, yr)| {
            xr.iter()
                .zip(yr)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / div
        })
        .collect())
}

/// Single-hidden-layer denoising autoencoder used as the energy function.
///
/// `encoder.weight` is `(h_d × V)`, `decoder.weight` is `(V × h_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DaeParams {
    pub encoder: LinearLayer,
    pub decoder: LinearLayer,
    pub leak: f64,
}

/// One discriminator evaluation with everything its backward pass needs.
#[derive(Clone, Debug)]
pub struct DaePass {
    pub x: Matrix,
    pub mask: Option<Matrix>,
    pub x_c: Matrix,
    pub pre: Matrix,
    pub h: Matrix,
    pub y: Matrix,
    pub energies: Vec<f64>,
}

impl DaeParams {
    /// Initializes encoder then decoder from `rng`.
    pub fn init(vocab: usize, hidden: usize, leak: f64, rng: &mut Rng) -> Self {
        DaeParams {
            encoder: LinearLayer::init(vocab, hidden, rng),
            decoder: LinearLayer::init(hidden, vocab, rng),
            leak,
        }
    }

    pub fn zeros(vocab: usize, hidden: usize, leak: f64) -> Self {
        DaeParams {
            encoder: LinearLayer::zeros(vocab, hidden),
            decoder: LinearLayer::zeros(hidden, vocab),
            leak,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.encoder.inputs()
    }

    pub fn hidden_size(&self) -> usize {
        self.encoder.outputs()
    }

    fn check_vocab(&self, x: &Matrix, op: &'static str) -> Result<()> {
        if x.cols() != self.vocab_size() {
            return Err(Error::ShapeMismatch {
                op,
                left: x.shape(),
                right: (x.rows(), self.vocab_size()),
            });
        }
        Ok(())
    }

    /// `leaky_relu(x_c·Weᵀ + be)`.
    pub fn encode(&self, x_c: &Matrix) -> Result<Matrix> {
        self.check_vocab(x_c, "dae_encode")?;
        Ok(leaky_relu(&self.encoder.forward(x_c)?, self.leak))
    }

    /// `h·Wdᵀ + bd`.
    pub fn decode(&self, h: &Matrix) -> Result<Matrix> {
        self.decoder.forward(h)
    }

    /// Representation of uncorrupted documents. Consumes no randomness.
    pub fn represent(&self, x: &Matrix) -> Result<Matrix> {
        self.encode(x)
    }

    /// Energy of `x` after optionally masking the encoder input with `mask`.
    /// The reconstruction target is always the clean `x`.
    pub fn forward(&self, x: &Matrix, mask: Option<&Matrix>, norm: EnergyNorm) -> Result<DaePass> {
        self.check_vocab(x, "discriminator")?;
        let x_c = match mask {
            Some(m) => x.hadamard(m)?,
            None => x.clone(),
        };
        let pre = self.encoder.forward(&x_c)?;
        let h = leaky_relu(&pre, self.leak);
        let y = self.decode(&h)?;
        let energies = energy(x, &y, norm)?;
        Ok(DaePass {
            x: x.clone(),
            mask: mask.cloned(),
            x_c,
            pre,
            h,
            y,
            energies,
        })
    }

    /// Backpropagates `L = Σ_b row_weights[b]·E_b`. Returns parameter gradients
    /// (as a `DaeParams`) and `∂L/∂x`, which includes both the reconstruction
    /// target path and the masked encoder path.
    pub fn backward(
        &self,
        pass: &DaePass,
        row_weights: &[f64],
        norm: EnergyNorm,
    ) -> Result<(DaeParams, Matrix)> {
        let div = norm.divisor(self.vocab_size());
        // ∂E_b/∂y = 2(y − x)/div
        let d_y = pass
            .y
            .sub(&pass.x)?
            .scale(2.0 / div)
            .scale_rows(row_weights)?;
        let (d_h, decoder) = self.decoder.backward(&pass.h, &d_y)?;
        let d_pre = leaky_relu_backward(&pass.pre, self.leak, &d_h)?;
        let (d_xc, encoder) = self.encoder.backward(&pass.x_c, &d_pre)?;
        let d_x_enc = match &pass.mask {
            Some(m) => d_xc.hadamard(m)?,
            None => d_xc,
        };
        let d_x = d_x_enc.sub(&d_y)?;
        Ok((
            DaeParams {
                encoder,
                decoder,
                leak: self.leak,
            },
            d_x,
        ))
    }
}

impl Parameters for DaeParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.encoder.weight.data(),
            &self.encoder.bias,
            self.decoder.weight.data(),
            &self.decoder.bias,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.encoder.weight.data_mut(),
            &mut self.encoder.bias,
            self.decoder.weight.data_mut(),
            &mut self.decoder.bias,
        ]
    }
}
