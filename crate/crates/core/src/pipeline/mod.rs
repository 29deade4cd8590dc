//! Experiment driver: configuration, end-to-end runs, scaling sweeps and
//! reports.

mod config;
mod run;
pub mod selftest;
mod sweep;

pub use config::{random_stable_plant, AlphaChoice, EpsMode, ExperimentConfig, OutputPaths, PlantSource, SynthesisSpec, SCHEMA_VERSION};
pub use run::{
    auto_window, choose_alpha, identify, IdentifyReport, run_end_to_end, run_end_to_end_threads, run_records, theoretical_eps, BaselineSummary, RecordArtifacts, RunRecord, RunReport,
    SynthesisSummary, CSV_HEADER,
};
pub use sweep::{loglog_fit, median, sweep_scaling, sweep_scaling_threads, LogLogFit, ScalingRow, ScalingSummary};
