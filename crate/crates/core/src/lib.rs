//! Time-domain speech enhancement with a dilated DenseNet front end and a
//! many-to-one GRU back end (DCCRN).

pub mod config;
pub mod data;
pub mod dsp;
pub mod enhance;
pub mod error;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod training;

pub use config::ExperimentConfig;
pub use dsp::{AudioClip, FramePlan};
pub use error::{Error, Result};
pub use model::{DccrnParams, ForwardOptions, ModelConfig};
pub use training::{Checkpoint, Stage, TrainConfig};
