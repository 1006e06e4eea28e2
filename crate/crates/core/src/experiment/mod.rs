//! The experiment grid: configuration, runs, tables, plots and the files
//! a run leaves behind.

pub mod config;
pub mod grid;
pub mod output;
pub mod plot;
pub mod tables;

pub use config::{ExperimentConfig, DATA_ROOT_ENV};
pub use grid::{
    derive_seed, load_task, run_direct_baseline, run_grid, run_grid_with, silent, BaselineResult, FileDigest,
    NamedLog, Progress, Provenance, ResultsBundle, TaskData,
};
pub use output::{load_raw_metrics, write_baselines, write_bundle, write_plots, write_tables, AGGREGATED, PROVENANCE, RAW_METRICS};
pub use plot::render_accuracy_svg;
pub use tables::{render_csv, render_markdown, GridSpec, Metric};
