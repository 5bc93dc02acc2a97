//! Training, inference and persistence around the model.

pub mod checkpoint;
pub mod latents;
mod loss;
mod loss_csv;
mod rtf;
mod synth;
mod synthetic;
mod train;

pub use checkpoint::{
    decode_tensors, encode_checkpoint, load_checkpoint, load_checkpoint_as, restore, save_checkpoint,
    snapshot_config, write_atomic, CheckpointError,
};
pub use latents::{read_latents, write_latents, LatentTrajectory, LatentsError};
pub use loss::{shifted_previous, stop_loss, total_loss, total_loss_with, LossComponents, LossDraws};
pub use loss_csv::{loss_csv, write_loss_csv, LOSS_CSV_HEADER};
pub use rtf::{measure_rtf, real_time_factor, RtfReport};
pub use synth::{
    stop_accuracy, synthesize, SynthesisOptions, DEFAULT_CFG_SCALE, DEFAULT_SAMPLING_STEPS,
};
pub use synthetic::{SyntheticSpec, TrainingExample};
pub use train::{
    batch_gradients, example_gradients, mean_total, train, training_batch, Adam, LossRecord,
    TrainConfig,
};
