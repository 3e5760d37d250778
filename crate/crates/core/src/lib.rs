//! Multimodal pedestrian trajectory prediction by modality clustering,
//! classification and synthesis.
//!
//! Training runs in four stages: encoder pretraining, K-means over deep
//! history/future features, classifier training against neighbor-derived
//! pseudo-distributions, and joint synthesizer/decoder training. Inference is a
//! pure function of the observation and the trained [`ModelBundle`].

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod metrics;
pub mod modality;
pub mod nn;
pub mod pipeline;
pub mod predictor;
pub mod representation;
pub mod synthetic;

mod binio;
mod train_util;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use metrics::{ade, constant_velocity_baseline, evaluate, fde, min_ade_k, min_fde_k, MetricsReport};
pub use pipeline::{train_full, ModelBundle, TrainConfig, TrainingLog};
pub use predictor::{Prediction, PredictionSet};

/// A 2-D position or displacement in meters.
pub type Point = [f64; 2];

/// Observed frames per window.
pub const OBS_LEN: usize = 8;
/// Predicted frames per window.
pub const PRED_LEN: usize = 12;
pub const WINDOW_LEN: usize = OBS_LEN + PRED_LEN;
/// Seconds between annotated frames.
pub const SAMPLE_PERIOD: f64 = 0.4;
/// Width of `R_H` and `R_F`.
pub const REP_DIM: usize = 48;
pub const DECODER_HIDDEN: usize = 2 * REP_DIM;
