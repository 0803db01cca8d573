//! Training runs, model selection, artifacts and multi-run comparisons.

mod checkpoint;
mod compare;
mod train;

pub use checkpoint::{
    decode_checkpoint, hex, read_checkpoint, Checkpoint, CheckpointFile, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use compare::{
    apply_family, compare_trainers, mean_std, noise_sweep, Cell, ComparisonRow, ComparisonTable,
    FAMILIES, FLIPPED_HEADER, SUMMARY_HEADER,
};
pub use train::{
    accuracy, flipped_under_perturbation, model_from_checkpoint, model_spec, prepare_data, train,
    train_prepared, PreparedData, RunRecord, TrainOutcome, METRICS_HEADER, PRNG_NAME,
};
