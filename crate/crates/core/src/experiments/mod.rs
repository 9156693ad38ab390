//! Reversal-anomaly experiments: test items, activation records, the model
//! and item analyses, the prior sweep and the report files.

pub mod analysis;
pub mod items;
pub mod pipeline;
pub mod records;
pub mod report;

pub use analysis::{
    item_analysis, model_analysis, one_sample_pattern, paired_sign_pattern, paired_significance, prior_sweep,
    AnalysisKind, AnalysisRow, AnalysisTable, WordClass, ALPHA_ONE_SAMPLE, ALPHA_PAIRED,
};
pub use items::{build_items, headline, load_items, parse_items, tracked_units, ItemSpec, TestItem, UnitClass, DEFAULT_ITEMS};
pub use pipeline::{
    evaluate_model, experiment_corpus, run_conditions, run_model, ExperimentConfig, ExperimentOutput, RunOutput,
    RunSummary, ScaleSummary,
};
pub use records::{
    collect_records, read_records, records_from_csv, records_to_csv, write_records, ActivationRecord, Condition,
    PROBES,
};
pub use report::{
    emit_reports, item_figure, one_sample_csv, paired_csv, statistics_csv, sweep_csv, sweep_summary_csv,
    write_atomic, ReportManifest,
};
