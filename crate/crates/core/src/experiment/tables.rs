use crate::datasets::Task;
use crate::error::{Error, Result};
use crate::evaluation::{AggregatedCell, MeanStd, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TargetAccuracy,
    ExplanationF1,
    Coverage,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::TargetAccuracy, Metric::ExplanationF1, Metric::Coverage];

    /// Stem of the table file names.
    pub fn file_stem(self) -> &'static str {
        match self {
            Metric::TargetAccuracy => "table_target_acc",
            Metric::ExplanationF1 => "table_expl_f1",
            Metric::Coverage => "table_coverage",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::TargetAccuracy => "Target accuracy",
            Metric::ExplanationF1 => "Explanation F1 on explained test points",
            Metric::Coverage => "Explanation coverage",
        }
    }

    pub fn of(self, cell: &AggregatedCell) -> MeanStd {
        match self {
            Metric::TargetAccuracy => cell.target_accuracy,
            Metric::ExplanationF1 => cell.explanation_f1,
            Metric::Coverage => cell.explanation_coverage,
        }
    }
}

/// The cells a complete result set must contain.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub datasets: Vec<Task>,
    pub p_grid: Vec<f64>,
    pub variants: Vec<Variant>,
}

impl GridSpec {
    pub fn find<'a>(&self, cells: &'a [AggregatedCell], task: Task, p: f64, v: Variant) -> Option<&'a AggregatedCell> {
        cells.iter().find(|c| c.dataset == task && c.p_missing == p && c.variant == v)
    }

    pub fn missing_cells(&self, cells: &[AggregatedCell]) -> Vec<String> {
        let mut missing = Vec::new();
        for &t in &self.datasets {
            for &p in &self.p_grid {
                for &v in &self.variants {
                    if self.find(cells, t, p, v).is_none() {
                        missing.push(format!("{} p={p} {v}", t.id()));
                    }
                }
            }
        }
        missing
    }

    pub fn require_complete(&self, cells: &[AggregatedCell]) -> Result<()> {
        let missing = self.missing_cells(cells);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompleteGrid(missing))
        }
    }

    fn rows(&self) -> impl Iterator<Item = (Task, Variant)> + '_ {
        self.datasets
            .iter()
            .flat_map(move |&t| self.variants.iter().map(move |&v| (t, v)))
    }
}

fn sidecar_flag(v: Variant) -> &'static str {
    match v {
        Variant::Standard => "False",
        Variant::Sidecar => "True",
    }
}

pub fn p_header(p: f64) -> String {
    format!("{p:.2}")
}

fn body(spec: &GridSpec, cells: &[AggregatedCell], metric: Metric) -> Result<Vec<Vec<String>>> {
    spec.require_complete(cells)?;
    Ok(spec
        .rows()
        .map(|(t, v)| {
            let mut row = vec![t.display_name().to_string(), sidecar_flag(v).to_string()];
            for &p in &spec.p_grid {
                let cell = spec.find(cells, t, p, v).expect("checked complete");
                row.push(metric.of(cell).display());
            }
            row
        })
        .collect())
}

fn header(spec: &GridSpec) -> Vec<String> {
    let mut h = vec!["Dataset".to_string(), "Sidecar".to_string()];
    h.extend(spec.p_grid.iter().map(|&p| p_header(p)));
    h
}

/// Rows are dataset x {standard, sidecar}; columns the missingness grid.
pub fn render_markdown(spec: &GridSpec, cells: &[AggregatedCell], metric: Metric) -> Result<String> {
    let rows = body(spec, cells, metric)?;
    let h = header(spec);
    let mut out = format!("{} (mean ± std over seeds)\n\n", metric.title());
    out += &format!("| {} |\n", h.join(" | "));
    out += &format!("|{}\n", " --- |".repeat(h.len()));
    for r in &rows {
        out += &format!("| {} |\n", r.join(" | "));
    }
    if metric == Metric::ExplanationF1 {
        let notes: Vec<String> = cells
            .iter()
            .filter(|c| c.f1_undefined > 0)
            .map(|c| {
                format!(
                    "- {} p={} {}: {} of {} runs explained no test point and are left out",
                    c.dataset.display_name(),
                    p_header(c.p_missing),
                    c.variant,
                    c.f1_undefined,
                    c.n_runs
                )
            })
            .collect();
        if !notes.is_empty() {
            out += "\n— marks cells where no run explained any test point.\n\n";
            out += &notes.join("\n");
            out += "\n";
        }
    }
    Ok(out)
}

pub fn render_csv(spec: &GridSpec, cells: &[AggregatedCell], metric: Metric) -> Result<String> {
    let rows = body(spec, cells, metric)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(spec))?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}
