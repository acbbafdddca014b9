mod confusion;
mod regression;
mod report;
mod roc;

pub use confusion::{classification_scores, macro_scores, ClassScores, ConfusionMatrix};
pub use regression::{mean_iou, rmse};
pub use report::{parse_report_csv, render_report, write_report, ReportFormat, ReportRow, REPORT_COLUMNS};
pub use roc::{roc_auc, RocCurve};
