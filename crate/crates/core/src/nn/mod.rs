//! A small CPU neural-network engine.
//!
//! Networks are plain layer lists evaluated one sample at a time; batches
//! are loops over samples with gradients summed in `f64` in sample order, so
//! results do not depend on batch composition or thread scheduling.
//! Everything is generic over [`Real`]: training runs in `f32`, gradient
//! checks in `f64`.

mod adam;
mod checkpoint;
mod layers;
mod loss;
mod network;
mod tensor;
mod train;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use layers::{Conv2d, Dense, Layer, ResidualBlock};
pub(crate) use layers::sigmoid;
pub use loss::{bce_with_logits, mse_loss, Loss};
pub use network::{ForwardCache, Gradients, Network};
pub use tensor::{Real, Tensor};
pub use train::{train, EpochStats, Target, TrainConfig, TrainData, TrainOutcome, VecData};
