//! Test-set metrics and their aggregation across seeds.

pub mod aggregate;
pub mod metrics;

pub use aggregate::{
    aggregate_runs, format_cell, format_value, read_raw_csv, write_aggregated_csv, write_raw_csv, AggregatedCell,
    MeanStd, RunMetrics, Variant,
};
pub use metrics::{
    concept_counts, explanation_coverage, explanation_f1, explanation_f1_macro, target_accuracy, ConceptCounts,
};
