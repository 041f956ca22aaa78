//! Datasets, training with early stopping, evaluation, window/step sweeps
//! and synthetic task generators.

pub mod config;
pub mod dataset;
pub mod sweep;
pub mod synth;
pub mod train;

pub use config::RunConfig;
pub use dataset::{
    load_config_split, load_dataset, load_run_data, split_from_pairs, DatasetPaths, DatasetSplit, Example, LabelSet,
    LabeledPair, RunData,
};
pub use sweep::{sweep, SweepGrid, SweepRow};
pub use synth::{generate_synthetic, write_synthetic, SyntheticData, Task};
pub use train::{dump_trace, evaluate, load_model, train, Evaluation, RunReport, Splits, TrainOutcome};
