//! Evaluation harness: dataset normalizers, Hit@1 and answer-type metrics,
//! and the pool-source × score ablation grid.

mod ablation;
mod dataset;
mod metrics;

use serde::Serialize;

pub use ablation::{ablation_columns, render_ablation_table, run_ablation, AblationCell, AblationConfig};
pub use dataset::{load_dataset, normalize_dataset, parse_dataset, Dataset, DatasetFormat, EvalRecord};
pub use metrics::{gold_missing_count, hit_at_1, type_accuracy, EvalReport, QuestionResult, TypeAccuracy};

use crate::pipeline::RunStats;

/// The JSON report written by `act evaluate` / `act ablate`.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub type_eval: Option<TypeAccuracy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_stats: Option<RunStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation: Option<Vec<AblationCell>>,
}
