mod checkpoint;
mod config;
mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{TrainConfig, Variant};
pub use trainer::{
    train, train_dae_baseline, train_with_callback, train_with_validation, EpochMetrics,
    StepMetrics, TrainOutcome, TrainState,
};
