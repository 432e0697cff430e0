//! Generator, denoising-autoencoder energy function, corruption, and the
//! adversarial objectives built from them.

mod dae;
mod generator;
mod objectives;

pub use dae::{corrupt, energy, CorruptionSpec, DaeParams, DaePass, EnergyNorm};
pub use generator::{GeneratorCache, GeneratorGrads, GeneratorParams};
pub use objectives::{
    discriminator_energy, discriminator_loss, discriminator_objective,
    discriminator_objective_sampled, generator_loss, generator_objective, reconstruction_objective,
    DiscriminatorOutcome, EnergySpec, GeneratorOutcome,
};
