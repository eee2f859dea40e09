//! The 2D-to-3D pose-lifting network: model, training, and file format.

mod grad;
mod io;
mod model;
mod train;

pub use grad::{loss_and_gradient, mse_loss, Gradients};
pub use io::{from_bytes, load_model, save_model, to_bytes, MODEL_MAGIC, MODEL_VERSION};
pub use model::{Layer, LifterInput, LifterModel, PoseLifter};
pub use train::{train_lifter, LifterTrainConfig, TrainReport, TrainedLifter};
