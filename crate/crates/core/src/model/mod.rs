//! Single-convolution softmax pixel classifier, its schedule, checkpoints
//! and training loop.

pub mod checkpoint;
pub mod conv;
pub mod schedule;
pub mod train;

pub use checkpoint::{decode as decode_checkpoint, encode as encode_checkpoint, read_checkpoint, write_checkpoint};
pub use conv::{forward, predict, softmax, ModelParams};
pub use schedule::{poly_lr, TrainConfig};
pub use train::{load_samples, train, train_on_samples, TrainLog, TrainRecord, TrainSetup};
