//! Dense neural-network building blocks with hand-written backward passes.

mod adam;
mod gradcheck;
mod layers;
mod matrix;
mod rng;

pub use adam::{Adam, AdamConfig, AdamState, Parameters};
pub use gradcheck::{gradient_check, numeric_gradient, relative_error, GradCheck};
pub use layers::{
    leaky, leaky_relu, leaky_relu_backward, logistic, relu, relu_backward, sigmoid,
    sigmoid_backward, BatchNormCache, BatchNormGrads, BatchNormLayer, LinearLayer, Mode,
};
pub(crate) use matrix::dot;
pub use matrix::{mse_mean, mse_mean_backward, Matrix};
pub use rng::{Rng, RngState};
