//! Time-series experiment protocol: labeling, online runs, ridge selection,
//! metrics, synthetic data and report files.

mod data;
mod experiment;
mod online;
mod report;
mod synth;

pub use data::{
    label_stream, median_epsilon, normalize_series, read_series, read_series_file, split_index,
    split_train_test, LabeledStream, Normalization, StreamMeta, DOWN, TUBE, UP,
};
pub use experiment::{
    build_forecaster, default_grid, grid_search_ridge, prepare_stream, run_experiment, AlgorithmKind,
    AlgorithmResult, EpsilonChoice, ExperimentConfig, ExperimentReport, RidgeChoice,
};
pub use online::{mse_amse, run_online, simple_baseline, SimpleBaseline, BASELINE_WINDOW};
pub use report::{
    emit_report, parse_report, read_results_csv, render_table, write_results_csv, ReportPaths,
    REPORT_COLUMNS,
};
pub use synth::{adversarial_stream, random_stream, synth_series, SynthKind};
