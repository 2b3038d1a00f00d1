//! Baselines, metrics and the benchmark runner.

mod baselines;
mod benchmark;
mod manifest;
mod metrics;

pub use crate::similarity::edit_distance;
pub use baselines::{jaccard_join, join_match, levenshtein_join, BaselineError};
pub use benchmark::{
    aggregate, run_benchmark, BenchmarkConfig, BenchmarkError, ItemResult, Labels, Report,
    ReportSettings, System, TaskMetrics,
};
pub use manifest::{
    load_manifest, parse_manifest, Gold, LabeledExample, Manifest, ManifestError, Payload,
};
pub use metrics::{
    pair_metrics, per_class_stats, per_class_stats_opt, weighted_metrics, ClassCounts,
    ConfusionStats, MetricsError, WeightedMetrics,
};
