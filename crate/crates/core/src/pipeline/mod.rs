//! End-to-end orchestration: dataset synthesis, training, checkpoints and
//! image-to-parameter inversion.

mod binio;
mod checkpoint;
mod dataset;
mod invert;
mod train;

pub use binio::fnv1a;
pub use checkpoint::{Checkpoint, DIPC_MAGIC, DIPC_VERSION};
pub use dataset::{build_dataset, build_dataset_with, Dataset, DatasetItem, DatasetSpec, DIPD_MAGIC, DIPD_VERSION};
pub use invert::{invert, invert_with, Candidate, InvertOptions};
pub use train::{resume, train, train_on, LossRow, TrainConfig, TrainResult};
