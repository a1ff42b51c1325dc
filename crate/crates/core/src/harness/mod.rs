//! Batch simulation: configuration, per-trial runs, CSV output and
//! aggregation.

pub mod aggregate;
pub mod config;
pub mod output;
pub mod presets;
pub mod trial;

pub use aggregate::{aggregate, quantile_sorted, trial_summaries, AggregateRow, Metric, TrialSummary};
pub use config::RunConfig;
pub use output::{emit, read_aggregate_csv, read_raw_csv, raw_rows, OutputPaths, RawRow, RunManifest};
pub use presets::{preset, NamedConfig, PRESET_NAMES};
pub use trial::{run_trial, run_trials, stream_rng, trial_truth, CheckpointRow, StreamRole, TrialLog};
