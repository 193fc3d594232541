//! Utility metrics, group fairness criteria and the FATE trade-off score.

mod fate;
mod metrics;

pub use fate::{fate, Criterion, FateConfig, FateReport};
pub use metrics::{
    accuracy_gap, confusion, fairness_criteria, utility_metrics, Counts, EoddAggregation, FairnessCriteria,
    GroupConfusion, MetricsReport, Utility,
};
