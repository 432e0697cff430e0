//! Adversarial document model.
//!
//! An energy-based GAN whose discriminator is a single-layer denoising
//! autoencoder. The autoencoder's hidden layer is the document representation.
//! Alongside the model this crate carries the corpus format, training loop
//! with validation-based model selection, checkpointing, and the retrieval
//! and topic analyses used to evaluate representations.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod synthetic;
pub mod training;
pub mod verify;

pub use corpus::{BinaryBow, Corpus, LabeledDoc, Vocabulary};
pub use error::{Error, Result};
pub use eval::{EmbeddingSet, PrCurve};
pub use model::{CorruptionSpec, DaeParams, EnergyNorm, EnergySpec, GeneratorParams};
pub use nn::{Matrix, Rng};
pub use training::{Checkpoint, TrainConfig, Variant};
