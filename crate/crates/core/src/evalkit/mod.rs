//! Answer parsing, metrics and report files.

pub mod metrics;
pub mod parse;
pub mod pipeline;
pub mod report;

pub use metrics::{
    classification_metrics, counting_metrics, regression_metrics, ClassScore, ClassificationReport, CountingReport,
    RegressionReport,
};
pub use parse::{parse_class_answer, parse_numeric_answer, parse_yes_no, ParsedAnswer};
pub use pipeline::{
    ablate_tokens, agb_contexts, agb_report, evaluate, generate_task, predict_agb, prepare_scenes, score_task, AgbPrediction,
    Evaluation, Prediction, PreparedScenes,
};
pub use report::{emit_report, read_json_reports, render_report, AblationRow, Report, ReportFormat, CSV_HEADER};

use crate::synthdata::AGB_MAX;

/// Maps a normalized regression output back to Mg/ha, clamped to the valid range.
pub fn denormalize_agb(normalized: f64) -> f64 {
    (normalized * AGB_MAX).clamp(0.0, AGB_MAX)
}
