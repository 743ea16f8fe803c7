//! Run configuration, experiment protocols and their CSV/JSON outputs.

pub mod checkpoint;
pub mod config;
pub mod csvio;
pub mod experiments;
pub mod setup;
pub mod stats;

pub use checkpoint::{checkpoint_path, Checkpoint, EsnCheckpoint, CHECKPOINT_FORMAT};
pub use config::{EvalReadout, ReservoirSettings, RlsSettings, RunConfig};
pub use csvio::{parse_sweep_long, LongRow, SCHEMA_VERSION};
pub use experiments::{
    bench, default_checkpoint_dir, evaluate, load_checkpoints, run_bench, run_sweep,
    run_switch_demo, run_train, summarize_long, sweep_checkpoints, switch_demo_checkpoints,
    train_seed, BenchReport, CurvePoint, SummaryRow, SweepSummary, TrainedSeed,
};
pub use setup::{build_components, Components};
