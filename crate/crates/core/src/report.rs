//! Aggregate metric reports and grounding-usage tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::UsageRecord;
use crate::metrics::{MetricRow, METRIC_NAMES};

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len();
        if n == 0 {
            return MeanStd { mean: 0.0, std: 0.0, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        MeanStd {
            mean,
            std: var.sqrt(),
            n,
        }
    }
}

fn aggregate(rows: &[&MetricRow]) -> BTreeMap<String, MeanStd> {
    METRIC_NAMES
        .iter()
        .map(|&m| {
            let values: Vec<f64> = rows.iter().filter_map(|r| r.value(m)).collect();
            (m.to_string(), MeanStd::of(&values))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    pub rows: Vec<MetricRow>,
    /// Pooled over all rows.
    pub aggregates: BTreeMap<String, MeanStd>,
    /// Per sub-corpus, for rows that carry a subset label.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_subset: BTreeMap<String, BTreeMap<String, MeanStd>>,
    /// Unweighted mean of the per-subset means.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub macro_average: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<BTreeMap<String, MeanStd>>,
}

impl MetricReport {
    pub fn from_rows(label: impl Into<String>, rows: Vec<MetricRow>) -> Self {
        let all: Vec<&MetricRow> = rows.iter().collect();
        let aggregates = aggregate(&all);

        let mut groups: BTreeMap<&str, Vec<&MetricRow>> = BTreeMap::new();
        for r in &rows {
            if let Some(s) = &r.subset {
                groups.entry(s).or_default().push(r);
            }
        }
        let by_subset: BTreeMap<String, BTreeMap<String, MeanStd>> =
            groups.iter().map(|(s, rs)| (s.to_string(), aggregate(rs))).collect();
        let macro_average = if by_subset.is_empty() {
            BTreeMap::new()
        } else {
            METRIC_NAMES
                .iter()
                .map(|&m| {
                    let means: Vec<f64> = by_subset.values().map(|a| a[m].mean).collect();
                    (m.to_string(), MeanStd::of(&means).mean)
                })
                .collect()
        };
        MetricReport {
            label: label.into(),
            rows,
            aggregates,
            by_subset,
            macro_average,
            usage: None,
        }
    }
}

/// Per-source count of included passages for each document, then mean and
/// standard deviation across documents (documents without any passage from
/// a source count as zero).
pub fn usage_statistics(records: &[UsageRecord]) -> BTreeMap<String, MeanStd> {
    let mut per_source: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        for p in &r.passages_used {
            per_source.entry(&p.source).or_default();
        }
    }
    for (source, counts) in per_source.iter_mut() {
        *counts = records
            .iter()
            .map(|r| r.passages_used.iter().filter(|p| p.source == *source).count() as f64)
            .collect();
    }
    per_source
        .into_iter()
        .map(|(s, counts)| (s.to_string(), MeanStd::of(&counts)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub configuration: String,
    pub dcrs: f64,
    pub fkgl: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
}

impl TableRow {
    fn from_means(configuration: String, get: impl Fn(&str) -> f64) -> Self {
        TableRow {
            configuration,
            dcrs: get("dcrs"),
            fkgl: get("fkgl"),
            rouge1: get("rouge1"),
            rouge2: get("rouge2"),
            rouge_l: get("rougeL"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTables {
    pub metrics: Vec<TableRow>,
    pub usage: BTreeMap<String, MeanStd>,
    pub documents: usize,
}

impl ReportTables {
    /// One row per report; reports with sub-corpora add one row per subset
    /// and a macro-averaged row after the pooled one.
    pub fn build(reports: &[MetricReport], usage_records: &[UsageRecord]) -> Self {
        let mut metrics = Vec::new();
        for r in reports {
            metrics.push(TableRow::from_means(r.label.clone(), |m| r.aggregates[m].mean));
            for (subset, agg) in &r.by_subset {
                metrics.push(TableRow::from_means(format!("{} [{subset}]", r.label), |m| agg[m].mean));
            }
            if !r.macro_average.is_empty() {
                metrics.push(TableRow::from_means(format!("{} [macro]", r.label), |m| {
                    r.macro_average[m]
                }));
            }
        }
        ReportTables {
            metrics,
            usage: usage_statistics(usage_records),
            documents: usage_records.len(),
        }
    }

    /// Aligned plain text. ROUGE is shown on a 0-100 scale.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        if !self.metrics.is_empty() {
            let width = self
                .metrics
                .iter()
                .map(|r| r.configuration.chars().count())
                .max()
                .unwrap_or(0)
                .max("configuration".len());
            let _ = writeln!(
                out,
                "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}",
                "configuration", "DCRS", "FKGL", "rouge1", "rouge2", "rougeL"
            );
            for r in &self.metrics {
                let _ = writeln!(
                    out,
                    "{:<width$}  {:>7.2}  {:>7.2}  {:>7.2}  {:>7.2}  {:>7.2}",
                    r.configuration,
                    r.dcrs,
                    r.fkgl,
                    100.0 * r.rouge1,
                    100.0 * r.rouge2,
                    100.0 * r.rouge_l
                );
            }
        }
        if !self.usage.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            let width = self
                .usage
                .keys()
                .map(|k| k.chars().count())
                .max()
                .unwrap_or(0)
                .max("source".len());
            let _ = writeln!(out, "{:<width$}  {:>7}  {:>7}", "source", "Mean", "STD");
            for (source, s) in &self.usage {
                let _ = writeln!(out, "{:<width$}  {:>7.2}  {:>7.2}", source, s.mean, s.std);
            }
        }
        out
    }
}
