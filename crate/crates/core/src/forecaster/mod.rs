//! Gradient-trained next-week forecaster: recurrent encoder, season-similarity
//! attention, linear decoder.

mod checkpoint;
mod model;
mod network;
mod predictor;
mod train;

pub use checkpoint::{from_checkpoint_str, load_model, save_model, to_checkpoint_string, CHECKPOINT_HEADER};
pub use model::{init_model, Arch, ForecastModel, Layout, N_STATS};
pub use network::{forward, predict_history, season_stats, HistoricalPool, Prediction};
pub use train::{fit, grad, task_loss, train_step, FitResult, Objective, TaskLoss, TrainConfig};

pub(crate) use predictor::Predictor;
pub(crate) use train::{clipped_step, sign};
