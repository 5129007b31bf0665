//! Classification metrics, ROC analysis and report export.

pub mod confusion;
pub mod report;
pub mod roc;

pub use confusion::{confusion, metrics, ConfusionCounts, MetricsReport};
pub use report::{mean_std, write_report, write_roc, TrialResult};
pub use roc::{eer, roc, vertical_average, AveragedRoc, RocCurve};
