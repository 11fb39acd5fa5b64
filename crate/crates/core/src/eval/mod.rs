//! Ranking metrics, baselines, diagnostics and reports.

pub mod baselines;
pub mod diagnostics;
pub mod metrics;
pub mod published;
pub mod report;

pub use baselines::{CosineItemItem, Popularity};
pub use diagnostics::{rec_count_curve, tail_share, weight_histogram, RecCount, WeightHistogram};
pub use metrics::{ndcg_at_k, recall_at_k, Metric, MetricSpec};
pub use report::{evaluate, evaluate_split, EvalOptions, MetricReport, Report};
