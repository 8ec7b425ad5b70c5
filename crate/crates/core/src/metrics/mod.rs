//! Figures of merit: pixel-wise image-quality metrics and ROC analysis.

pub mod iq;
pub mod roc;

pub use iq::{dynamic_range, iq_metrics, iq_report, paired_difference, IqMetrics, IqReport, PairedDifference};
pub use roc::{auc, auc_compare, delong_ci, roc_curve, AucComparison, RocResult, DEFAULT_LEVEL};
