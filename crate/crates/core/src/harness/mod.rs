//! Experiment orchestration: configuration, per-seed training runs,
//! FATE comparison and report files.

mod config;
mod gradcheck;
mod report;
mod run;

pub use config::{suggest_keys, DataSourceKind, ExperimentConfig, Method, ReportFormat, KEYS, OUTPUT_ROOT_ENV};
pub use gradcheck::{gradcheck_suite, GradCheckCase};
pub use report::{
    emit_report, evaluate_predictions, load_long_form, read_predictions, summary_table, write_long_form,
    write_predictions, LongRecord, ReportFiles,
};
pub use run::{
    build_models, compare_and_fate, load_dataset, predict, run_method, run_method_on, run_seed, run_sweep,
    scatter_point, train_model, Curves, ModelRun, Predictions, RunResult, SeedResult, RESULT_FIELDS,
};
