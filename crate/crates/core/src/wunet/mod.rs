//! The weather-removal UNet: configuration, model, checkpoints and training.

mod checkpoint;
mod config;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{TrainConfig, WUNetConfig};
pub use model::{build_model, ConvSpec, WUNet};
pub use train::{load_samples, train, write_train_log, EpochLog, Sample, TrainOutcome};
