//! Classification metrics and the two comparison artifacts: a raw table of
//! metrics plus hardware quantities per model, and a ratio table dividing
//! every baseline's hardware quantities by ours.
//!
//! Ratio rows are computed column-wise from display-scale values (params in
//! millions, flash in MB, RAM in KB, …) because published comparison tables
//! derive their flash/RAM ratios from the printed (rounded) per-model rows,
//! not from raw byte counts.

use std::fmt;

use thiserror::Error;

use crate::cost::{CostReport, Ratios};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: u32, num_classes: usize },
    #[error("ours row index {index} out of range for {rows} rows")]
    BadOursIndex { index: usize, rows: usize },
    #[error("ours row has zero {0}, ratios are undefined")]
    DivByZero(&'static str),
}

/// Row = true class, column = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub num_classes: usize,
}

/// Tallies prediction pairs into a confusion matrix.
pub fn confusion(
    truth: &[u32],
    predicted: &[u32],
    num_classes: usize,
) -> Result<ConfusionMatrix, ReportError> {
    if truth.len() != predicted.len() {
        return Err(ReportError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        for label in [t, p] {
            if label as usize >= num_classes {
                return Err(ReportError::LabelOutOfRange { label, num_classes });
            }
        }
        counts[t as usize][p as usize] += 1;
    }
    Ok(ConfusionMatrix { counts, num_classes })
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|i| self.counts[i][i]).sum()
    }

    fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    Weighted,
    Macro,
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Averaging::Weighted => "weighted",
            Averaging::Macro => "macro",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub averaging: Averaging,
}

/// Per-class precision/recall/F1 and their aggregate under `averaging`.
/// Classes with a zero denominator get 0 (with a warning); macro averaging
/// divides by the full class count, weighted averaging weights by support.
///
/// # Panics
/// If the matrix is empty (zero total).
pub fn metrics(cm: &ConfusionMatrix, averaging: Averaging) -> MetricsReport {
    let total = cm.total();
    assert!(total > 0, "metrics need at least one evaluated sample");
    let mut per_class = Vec::with_capacity(cm.num_classes);
    for c in 0..cm.num_classes {
        let diag = cm.counts[c][c] as f64;
        let col = cm.col_sum(c);
        let row = cm.row_sum(c);
        if col == 0 {
            log::warn!("class {c}: never predicted, precision defined as 0");
        }
        if row == 0 {
            log::warn!("class {c}: no true samples, recall defined as 0");
        }
        let precision = if col == 0 { 0.0 } else { diag / col as f64 };
        let recall = if row == 0 { 0.0 } else { diag / row as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics { precision, recall, f1, support: row });
    }
    let agg = |pick: fn(&ClassMetrics) -> f64| -> f64 {
        match averaging {
            Averaging::Macro => {
                per_class.iter().map(pick).sum::<f64>() / cm.num_classes as f64
            }
            Averaging::Weighted => {
                per_class
                    .iter()
                    .map(|m| pick(m) * m.support as f64)
                    .sum::<f64>()
                    / total as f64
            }
        }
    };
    MetricsReport {
        accuracy: cm.trace() as f64 / total as f64,
        precision: agg(|m| m.precision),
        recall: agg(|m| m.recall),
        f1: agg(|m| m.f1),
        per_class,
        averaging,
    }
}

impl MetricsReport {
    /// Plain-text summary: aggregate percentages plus a per-class table.
    pub fn text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("accuracy  {:6.2}%\n", self.accuracy * 100.0));
        out.push_str(&format!(
            "precision {:6.2}%  ({} average)\n",
            self.precision * 100.0,
            self.averaging
        ));
        out.push_str(&format!("recall    {:6.2}%\n", self.recall * 100.0));
        out.push_str(&format!("f1        {:6.2}%\n", self.f1 * 100.0));
        out.push_str("class  support  precision%  recall%  f1%\n");
        for (c, m) in self.per_class.iter().enumerate() {
            out.push_str(&format!(
                "{c:<5}  {:>7}  {:>10.2}  {:>7.2}  {:>6.2}\n",
                m.support,
                m.precision * 100.0,
                m.recall * 100.0,
                m.f1 * 100.0
            ));
        }
        out
    }
}

/// Hardware quantities at the scale the comparison tables print: parameters
/// and FLOPs in millions, flash in MB, RAM in KB, tensor in raw elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HwRow {
    pub params_m: f64,
    pub max_tensor: f64,
    pub flops_m: f64,
    pub flash_mb: f64,
    pub ram_kb: f64,
}

impl From<&CostReport> for HwRow {
    fn from(c: &CostReport) -> Self {
        HwRow {
            params_m: c.params_m(),
            max_tensor: c.max_tensor as f64,
            flops_m: c.flops_m(),
            flash_mb: c.flash_mb(),
            ram_kb: c.ram_kb(),
        }
    }
}

/// The four aggregate metric cells of a comparison row; `None` renders "-".
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricCells {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl MetricCells {
    pub fn absent() -> Self {
        MetricCells::default()
    }
}

impl From<&MetricsReport> for MetricCells {
    fn from(m: &MetricsReport) -> Self {
        MetricCells {
            accuracy: Some(m.accuracy),
            precision: Some(m.precision),
            recall: Some(m.recall),
            f1: Some(m.f1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub metrics: MetricCells,
    pub hw: HwRow,
}

/// The rendered comparison: input rows plus one ratio row per model
/// (`baseline / ours` per column; the ours row is all 1.0).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub ours_index: usize,
    pub ratios: Vec<Ratios>,
}

/// Divides every row's hardware quantities by the `ours_index` row's.
pub fn comparison_report(
    rows: Vec<ComparisonRow>,
    ours_index: usize,
) -> Result<ComparisonReport, ReportError> {
    if ours_index >= rows.len() {
        return Err(ReportError::BadOursIndex { index: ours_index, rows: rows.len() });
    }
    let ours = rows[ours_index].hw;
    let denominators: [(&'static str, f64); 5] = [
        ("params", ours.params_m),
        ("max tensor", ours.max_tensor),
        ("FLOPs", ours.flops_m),
        ("flash", ours.flash_mb),
        ("RAM", ours.ram_kb),
    ];
    for (name, d) in denominators {
        if d <= 0.0 {
            return Err(ReportError::DivByZero(name));
        }
    }
    let ratios = rows
        .iter()
        .map(|r| Ratios {
            params: r.hw.params_m / ours.params_m,
            max_tensor: r.hw.max_tensor / ours.max_tensor,
            flops: r.hw.flops_m / ours.flops_m,
            flash: r.hw.flash_mb / ours.flash_mb,
            ram: r.hw.ram_kb / ours.ram_kb,
        })
        .collect();
    Ok(ComparisonReport { rows, ours_index, ratios })
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:.2}", x * 100.0),
        None => "-".into(),
    }
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut widths = vec![0usize; cols];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i == 0 {
                // name column, left-aligned
                out.push_str(&format!("{cell:<width$}", width = widths[i]));
            } else {
                out.push_str(&format!("{cell:>width$}", width = widths[i]));
            }
        }
        // trim the padding of the final column
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    }
    out
}

fn delimit(rows: &[Vec<String>], sep: char) -> String {
    rows.iter()
        .map(|r| r.join(&sep.to_string()))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

impl ComparisonReport {
    const RAW_HEADER: [&'static str; 10] = [
        "model",
        "acc%",
        "prec%",
        "rec%",
        "f1%",
        "params(M)",
        "tensor",
        "flops(M)",
        "flash(MB)",
        "ram(KB)",
    ];
    const RATIO_HEADER: [&'static str; 6] =
        ["model", "params", "tensor", "flops", "flash", "ram"];

    fn raw_cells(&self) -> Vec<Vec<String>> {
        let mut out = vec![Self::RAW_HEADER.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            out.push(vec![
                r.name.clone(),
                pct(r.metrics.accuracy),
                pct(r.metrics.precision),
                pct(r.metrics.recall),
                pct(r.metrics.f1),
                format!("{:.4}", r.hw.params_m),
                format!("{:.0}", r.hw.max_tensor),
                format!("{:.4}", r.hw.flops_m),
                format!("{:.3}", r.hw.flash_mb),
                format!("{:.3}", r.hw.ram_kb),
            ]);
        }
        out
    }

    fn ratio_cells(&self) -> Vec<Vec<String>> {
        let mut out = vec![Self::RATIO_HEADER.iter().map(|s| s.to_string()).collect()];
        for (r, q) in self.rows.iter().zip(&self.ratios) {
            out.push(vec![
                r.name.clone(),
                format!("{:.2}", q.params),
                format!("{:.2}", q.max_tensor),
                format!("{:.2}", q.flops),
                format!("{:.2}", q.flash),
                format!("{:.2}", q.ram),
            ]);
        }
        out
    }

    pub fn raw_text(&self) -> String {
        align(&self.raw_cells())
    }

    pub fn ratio_text(&self) -> String {
        align(&self.ratio_cells())
    }

    pub fn raw_delimited(&self, sep: char) -> String {
        delimit(&self.raw_cells(), sep)
    }

    pub fn ratio_delimited(&self, sep: char) -> String {
        delimit(&self.ratio_cells(), sep)
    }
}
