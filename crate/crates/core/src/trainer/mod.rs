//! RMSprop training with padded, length-bucketed mini-batches and
//! best-epoch retention on validation AUROC.

mod batch;
mod config;
mod optimizer;
mod run;

pub use batch::{batch_gradients, make_batches, prepare_examples, Batch, Example};
pub use config::TrainingConfig;
pub use optimizer::{rmsprop_step, rmsprop_update, OptimizerState};
pub use run::{evaluate_validation, train, EpochLog, TrainOutcome, ValidationScore};
