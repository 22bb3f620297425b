//! Stratified cross-validation folds, confusion matrices, per-family
//! metrics and CPU-time accounting.

mod confusion;
mod folds;
mod metrics;
mod timing;

pub use confusion::{confusion, ConfusionMatrix};
pub use folds::{fold_assignments, stratified_folds};
pub use metrics::{family_metrics, weighted_report, EvalReport, FamilyMetrics, WeightedMetrics};
pub use timing::{measure_mpe, process_cpu_time, Mpe, StageTimer, StageTimes};
