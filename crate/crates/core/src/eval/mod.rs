//! Metrics, repeated trials, the size-matched MLP baseline, and ablation grids.

mod ablation;
mod baseline;
mod metrics;
mod trials;

pub use ablation::{natural_two_groups, run_ablation, suite_cells, AblationResult, Suite};
pub use baseline::{baseline_hidden_sizes, build_mlp_baseline, predict_mlp, train_mlp};
pub use metrics::{metrics, Metrics};
pub use trials::{
    run_trial, run_trials, summarize, Cell, CellResult, ExperimentData, Grouping, MetricSummary, ModelFamily,
    TrialFailure, TrialReport, TrialSettings,
};
