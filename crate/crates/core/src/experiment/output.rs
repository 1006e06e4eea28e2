use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::grid::{BaselineResult, Provenance, ResultsBundle};
use super::plot::render_accuracy_svg;
use super::tables::{render_csv, render_markdown, GridSpec, Metric};
use crate::error::{Error, Result};
use crate::evaluation::{aggregate_runs, read_raw_csv, write_aggregated_csv, write_raw_csv, AggregatedCell, RunMetrics};

pub const RAW_METRICS: &str = "raw_metrics.csv";
pub const AGGREGATED: &str = "aggregated.csv";
pub const PROVENANCE: &str = "provenance.json";

impl GridSpec {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            datasets: cfg.datasets.clone(),
            p_grid: cfg.p_grid.clone(),
            variants: cfg.variants.clone(),
        }
    }

    /// The grid spanned by raw rows, in first-seen order (p sorted).
    pub fn from_raw(raw: &[RunMetrics]) -> Self {
        let mut spec = Self {
            datasets: Vec::new(),
            p_grid: Vec::new(),
            variants: Vec::new(),
        };
        for r in raw {
            if !spec.datasets.contains(&r.dataset) {
                spec.datasets.push(r.dataset);
            }
            if !spec.p_grid.contains(&r.p_missing) {
                spec.p_grid.push(r.p_missing);
            }
            if !spec.variants.contains(&r.variant) {
                spec.variants.push(r.variant);
            }
        }
        spec.p_grid.sort_by(f64::total_cmp);
        spec.variants.sort();
        spec
    }

    /// One cell per grid point that has runs, in grid order.
    pub fn aggregate(&self, raw: &[RunMetrics]) -> Result<Vec<AggregatedCell>> {
        let mut cells = Vec::new();
        for &t in &self.datasets {
            for &p in &self.p_grid {
                for &v in &self.variants {
                    let runs: Vec<RunMetrics> = raw
                        .iter()
                        .filter(|r| r.dataset == t && r.p_missing == p && r.variant == v)
                        .cloned()
                        .collect();
                    if !runs.is_empty() {
                        cells.push(aggregate_runs(&runs)?);
                    }
                }
            }
        }
        Ok(cells)
    }
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Markdown and CSV renderings of every metric table.
pub fn write_tables(dir: &Path, spec: &GridSpec, cells: &[AggregatedCell]) -> Result<Vec<PathBuf>> {
    spec.require_complete(cells)?;
    let mut written = Vec::new();
    for metric in Metric::ALL {
        let stem = metric.file_stem();
        written.push(write_text(&dir.join(format!("{stem}.md")), &render_markdown(spec, cells, metric)?)?);
        written.push(write_text(&dir.join(format!("{stem}.csv")), &render_csv(spec, cells, metric)?)?);
    }
    Ok(written)
}

pub fn write_plots(dir: &Path, spec: &GridSpec, cells: &[AggregatedCell]) -> Result<Vec<PathBuf>> {
    spec.require_complete(cells)?;
    spec.datasets
        .iter()
        .map(|&t| write_text(&dir.join(format!("plot_{}.svg", t.id())), &render_accuracy_svg(spec, cells, t)?))
        .collect()
}

pub fn write_baselines(dir: &Path, baselines: &[BaselineResult]) -> Result<Vec<PathBuf>> {
    let csv_path = dir.join("baseline.csv");
    let mut w = csv::Writer::from_writer(create(&csv_path)?);
    w.write_record(["dataset", "seed", "target_accuracy"])?;
    let mut md = String::from("Direct target-label baseline\n\n| Dataset | Target accuracy |\n| --- | --- |\n");
    for b in baselines {
        for (s, a) in b.seeds.iter().zip(&b.accuracies) {
            w.write_record([b.dataset.id().to_string(), s.to_string(), a.to_string()])?;
        }
        md += &format!("| {} | {} |\n", b.dataset.display_name(), b.summary.display());
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok(vec![csv_path, write_text(&dir.join("baseline.md"), &md)?])
}

#[derive(Serialize)]
struct ProvenanceFile<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    config: &'a ExperimentConfig,
}

/// Writes every artifact of a finished run into `dir`.
pub fn write_bundle(bundle: &ResultsBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let spec = GridSpec::from_config(&bundle.config);
    spec.require_complete(&bundle.cells)?;
    let mut written = Vec::new();

    let raw_path = dir.join(RAW_METRICS);
    write_raw_csv(create(&raw_path)?, &bundle.raw)?;
    written.push(raw_path);
    let agg_path = dir.join(AGGREGATED);
    write_aggregated_csv(create(&agg_path)?, &bundle.cells)?;
    written.push(agg_path);

    written.extend(write_tables(dir, &spec, &bundle.cells)?);
    written.extend(write_plots(dir, &spec, &bundle.cells)?);
    if !bundle.baselines.is_empty() {
        written.extend(write_baselines(dir, &bundle.baselines)?);
    }

    let logs_dir = dir.join("logs");
    std::fs::create_dir_all(&logs_dir).map_err(|e| Error::io(&logs_dir, e))?;
    for l in &bundle.logs {
        let path = logs_dir.join(format!("{}.csv", l.name));
        l.log.write_csv(create(&path)?)?;
        written.push(path);
    }

    let prov = ProvenanceFile {
        provenance: &bundle.provenance,
        config: &bundle.config,
    };
    let json = serde_json::to_string_pretty(&prov).map_err(|e| Error::Format(e.to_string()))?;
    written.push(write_text(&dir.join(PROVENANCE), &(json + "\n"))?);
    Ok(written)
}

/// Reads `raw_metrics.csv` from a run directory.
pub fn load_raw_metrics(dir: &Path) -> Result<Vec<RunMetrics>> {
    let path = dir.join(RAW_METRICS);
    read_raw_csv(std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?)
}
