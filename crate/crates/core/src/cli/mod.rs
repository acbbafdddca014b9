//! Batch command-line surface: lane detection, training, evaluation,
//! gradient checking, preprocessing and synthetic data.

mod commands;
pub mod config;
pub mod tasks;

pub use commands::{list_frames, main_with_args, run, Cli, Command, Outcome, MANIFEST, SEED_ENV};
pub use config::{Config, DataConfig, TrainConfig};
pub use tasks::{augment_samples, evaluate_task, load_task_data, score, select, split_indices, train_task, Split, Task};
