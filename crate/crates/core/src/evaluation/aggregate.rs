use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::Task;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Standard,
    Sidecar,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Standard, Variant::Sidecar];

    pub fn id(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::Sidecar => "sidecar",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "standard" => Ok(Variant::Standard),
            "sidecar" => Ok(Variant::Sidecar),
            other => Err(Error::Config(format!("unknown variant '{other}' (standard or sidecar)"))),
        }
    }
}

/// Test metrics of one (dataset, p, variant, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub dataset: Task,
    pub p_missing: f64,
    pub variant: Variant,
    pub seed: u64,
    pub target_accuracy: f64,
    /// NaN when no test point was explained.
    pub explanation_f1: f64,
    pub explanation_coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation; NaN for no values.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }

    pub fn display(&self) -> String {
        format_cell(self.mean, self.std)
    }
}

/// Runs of one (dataset, p, variant) cell summarized across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedCell {
    pub dataset: Task,
    pub p_missing: f64,
    pub variant: Variant,
    pub n_runs: usize,
    pub target_accuracy: MeanStd,
    pub explanation_f1: MeanStd,
    pub explanation_coverage: MeanStd,
    /// Runs left out of the F1 summary because they explained nothing.
    pub f1_undefined: usize,
}

pub fn aggregate_runs(metrics: &[RunMetrics]) -> Result<AggregatedCell> {
    let first = metrics
        .first()
        .ok_or_else(|| Error::Validation("cannot aggregate zero runs".into()))?;
    if let Some(m) = metrics
        .iter()
        .find(|m| m.dataset != first.dataset || m.p_missing != first.p_missing || m.variant != first.variant)
    {
        return Err(Error::Validation(format!(
            "mixed cells: ({}, {}, {}) and ({}, {}, {})",
            first.dataset, first.p_missing, first.variant, m.dataset, m.p_missing, m.variant
        )));
    }
    let pick = |f: fn(&RunMetrics) -> f64| metrics.iter().map(f).collect::<Vec<_>>();
    let f1: Vec<f64> = pick(|m| m.explanation_f1).into_iter().filter(|v| !v.is_nan()).collect();
    Ok(AggregatedCell {
        dataset: first.dataset,
        p_missing: first.p_missing,
        variant: first.variant,
        n_runs: metrics.len(),
        target_accuracy: MeanStd::of(&pick(|m| m.target_accuracy)),
        explanation_f1: MeanStd::of(&f1),
        explanation_coverage: MeanStd::of(&pick(|m| m.explanation_coverage)),
        f1_undefined: metrics.len() - f1.len(),
    })
}

/// Rounds to 3 decimals and drops trailing zeros, keeping at least one.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        return "—".into();
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0');
    let s = if s.ends_with('.') { format!("{s}0") } else { s.to_string() };
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

/// `"mean ± std"`, or a dash when the mean is undefined.
pub fn format_cell(mean: f64, std: f64) -> String {
    if mean.is_nan() {
        return "—".into();
    }
    format!("{} ± {}", format_value(mean), format_value(std))
}

/// Columns: dataset, p_missing, variant, seed, target_accuracy,
/// explanation_f1, explanation_coverage.
pub fn write_raw_csv<W: Write>(out: W, rows: &[RunMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset",
        "p_missing",
        "variant",
        "seed",
        "target_accuracy",
        "explanation_f1",
        "explanation_coverage",
    ])?;
    for r in rows {
        w.write_record([
            r.dataset.id().to_string(),
            r.p_missing.to_string(),
            r.variant.id().to_string(),
            r.seed.to_string(),
            r.target_accuracy.to_string(),
            r.explanation_f1.to_string(),
            r.explanation_coverage.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<raw metrics>", e))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct RawRow {
    dataset: String,
    p_missing: f64,
    variant: String,
    seed: u64,
    target_accuracy: f64,
    explanation_f1: f64,
    explanation_coverage: f64,
}

pub fn read_raw_csv<R: std::io::Read>(input: R) -> Result<Vec<RunMetrics>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<RawRow>()
        .map(|row| {
            let row = row?;
            Ok(RunMetrics {
                dataset: row.dataset.parse()?,
                p_missing: row.p_missing,
                variant: row.variant.parse()?,
                seed: row.seed,
                target_accuracy: row.target_accuracy,
                explanation_f1: row.explanation_f1,
                explanation_coverage: row.explanation_coverage,
            })
        })
        .collect()
}

/// One row per cell with `_mean`/`_std` columns per metric.
pub fn write_aggregated_csv<W: Write>(out: W, cells: &[AggregatedCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset",
        "p_missing",
        "variant",
        "n_runs",
        "target_accuracy_mean",
        "target_accuracy_std",
        "explanation_f1_mean",
        "explanation_f1_std",
        "explanation_coverage_mean",
        "explanation_coverage_std",
        "f1_undefined_runs",
    ])?;
    for c in cells {
        w.write_record([
            c.dataset.id().to_string(),
            c.p_missing.to_string(),
            c.variant.id().to_string(),
            c.n_runs.to_string(),
            c.target_accuracy.mean.to_string(),
            c.target_accuracy.std.to_string(),
            c.explanation_f1.mean.to_string(),
            c.explanation_f1.std.to_string(),
            c.explanation_coverage.mean.to_string(),
            c.explanation_coverage.std.to_string(),
            c.f1_undefined.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<aggregated metrics>", e))?;
    Ok(())
}
