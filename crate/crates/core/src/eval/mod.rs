//! Metrics, feature tables and the evaluation settings.

mod experiment;
mod metrics;
mod table;

pub use experiment::{
    load_features, load_models, run_experiment, ExperimentConfig, ExperimentOutcome, Report, ReportRow,
    Setting, BASELINE_F1, BASELINE_NAMES, PREDICTIONS_FILE, REPORT_TSV, REPORT_TXT,
    SIGNIFICANCE_TSV,
};
pub use metrics::{
    f1_fake, pearson_correlation, permutation_test, random_baseline, top_features_report, MIN_PERMUTATIONS,
};
pub use table::{
    extract_corpus_features, read_feature_table, write_feature_table, write_predictions, FeatureRow,
    PredictionRow,
};
