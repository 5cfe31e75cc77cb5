//! Evaluation: detection matching, COCO-style AP, correlation, ΔIoU histograms and reports.

mod ap;
mod correlation;
mod histogram;
mod report;

pub use ap::{ap_summary, average_precision, coco_thresholds, match_detections, ApSummary, EvalConfig, SceneEval};
pub use correlation::{correlation_study, pearson, ClsScore, ConfidenceSource, Correlation, ModelConfidence};
pub use histogram::{delta_iou_histogram, Histogram};
pub use report::{assemble_report, sig6, Check, EpochHistogram, EvalReport, ReportRow, RowStatus};
