//! Report emission: every table in CSV plus aligned text, metric values at
//! 4 decimals, gains as signed 2-decimal percentages. Emission is a pure
//! function of the computed results, so an unchanged store re-emits
//! byte-identical files.

use std::collections::BTreeMap;

use crate::ensemble::{EvalSubset, GainReport, TieRule};
use crate::metrics::{AggregateStats, Metric, MetricSet};

pub const SINGLE_MODELS: &str = "single_models";
pub const ENSEMBLE_HETEROGENEOUS: &str = "ensemble_heterogeneous";
pub const ENSEMBLE_HOMOGENEOUS: &str = "ensemble_homogeneous";
pub const ENSEMBLE_TOPK_ALL: &str = "ensemble_topk_all_instances";
pub const SUBSET_PREFIX: &str = "subset_metrics";

/// Mean metric values of one model on the train/validation/test subsets.
#[derive(Debug, Clone)]
pub struct SubsetMeans {
    pub model: String,
    pub by_subset: BTreeMap<EvalSubset, MetricSet>,
}

/// Everything the report files are rendered from.
#[derive(Debug, Clone, Default)]
pub struct ReportData {
    /// Per-model aggregate over the five single instances, ranking order.
    pub singles: Vec<(String, AggregateStats)>,
    /// Per-model per-subset means over the five instances.
    pub subsets: Vec<SubsetMeans>,
    /// Heterogeneous configurations: (row label, aggregate over 5 ensembles).
    pub heterogeneous: Vec<(String, AggregateStats)>,
    /// Homogeneous 5-instance ensembles with gains, ranking order.
    pub homogeneous: Vec<(String, MetricSet, GainReport)>,
    /// Top-k all-instances ensembles with gains vs the heterogeneous rows.
    pub topk_all: Vec<(String, MetricSet, GainReport)>,
    pub tie_rule: TieRule,
}

pub fn format_value(v: f64) -> String {
    format!("{v:.4}")
}

/// Signed percentage at two decimals; "-0.00" collapses to "0.00".
pub fn format_gain(gain_percent: Option<f64>) -> String {
    match gain_percent {
        None => "n/a".to_string(),
        Some(g) => {
            let s = format!("{g:.2}");
            let s = if s == "-0.00" { "0.00".to_string() } else { s };
            format!("{s}%")
        }
    }
}

fn tie_rule_line(rule: TieRule) -> String {
    format!("# decision tie rule: {}\n", rule.as_str())
}

fn csv_table(rule: TieRule, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = tie_rule_line(rule);
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn aligned_table(rule: TieRule, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let render = |cells: Vec<String>| -> String {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if i == 0 {
                line.push_str(&format!("{cell:<width$}", width = widths[i]));
            } else {
                line.push_str(&format!("{cell:>width$}", width = widths[i]));
            }
        }
        line.trim_end().to_string()
    };
    let mut out = tie_rule_line(rule);
    out.push_str(&render(header.iter().map(|h| h.to_string()).collect()));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&render(row.clone()));
        out.push('\n');
    }
    out
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

const STAT_HEADER: [&str; 9] = [
    "model", "acc_mean", "acc_sd", "tpr_mean", "tpr_sd", "ppv_mean", "ppv_sd", "f1_mean", "f1_sd",
];

fn stat_rows(entries: &[(String, AggregateStats)], average_label: Option<&str>) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = entries
        .iter()
        .map(|(name, stats)| {
            let mut row = vec![name.clone()];
            for metric in Metric::ALL {
                row.push(format_value(stats.get(metric).mean));
                row.push(format_value(stats.get(metric).sd));
            }
            row
        })
        .collect();
    if let (Some(label), true) = (average_label, !entries.is_empty()) {
        let mut row = vec![label.to_string()];
        for metric in Metric::ALL {
            let means: Vec<f64> = entries.iter().map(|(_, s)| s.get(metric).mean).collect();
            let sds: Vec<f64> = entries.iter().map(|(_, s)| s.get(metric).sd).collect();
            row.push(format_value(mean_of(&means)));
            row.push(format_value(mean_of(&sds)));
        }
        rows.push(row);
    }
    rows
}

/// Per-model mean/SD table over the five single instances.
pub fn render_single_models(data: &ReportData) -> (String, String) {
    let rows = stat_rows(&data.singles, Some("Average"));
    (
        csv_table(data.tie_rule, &STAT_HEADER, &rows),
        aligned_table(data.tie_rule, &STAT_HEADER, &rows),
    )
}

/// Heterogeneous ensemble table (one row per configuration).
pub fn render_heterogeneous(data: &ReportData) -> (String, String) {
    let mut header = STAT_HEADER;
    header[0] = "models";
    let rows = stat_rows(&data.heterogeneous, None);
    (
        csv_table(data.tie_rule, &header, &rows),
        aligned_table(data.tie_rule, &header, &rows),
    )
}

const GAIN_HEADER: [&str; 9] = [
    "model", "acc", "acc_gain", "tpr", "tpr_gain", "ppv", "ppv_gain", "f1", "f1_gain",
];

fn gain_rows(entries: &[(String, MetricSet, GainReport)]) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = entries
        .iter()
        .map(|(name, set, gains)| {
            let mut row = vec![name.clone()];
            for metric in Metric::ALL {
                row.push(format_value(set.get(metric)));
                row.push(format_gain(gains.get(metric).gain_percent));
            }
            row
        })
        .collect();
    if !entries.is_empty() {
        let mut row = vec!["Average".to_string()];
        for metric in Metric::ALL {
            let values: Vec<f64> = entries.iter().map(|(_, s, _)| s.get(metric)).collect();
            row.push(format_value(mean_of(&values)));
            let gains: Vec<f64> = entries
                .iter()
                .filter_map(|(_, _, g)| g.get(metric).gain_percent)
                .collect();
            row.push(if gains.is_empty() {
                "n/a".to_string()
            } else {
                format_gain(Some(mean_of(&gains)))
            });
        }
        rows.push(row);
    }
    rows
}

/// Homogeneous 5-instance ensembles with gains over single-instance means.
pub fn render_homogeneous(data: &ReportData) -> (String, String) {
    let rows = gain_rows(&data.homogeneous);
    (
        csv_table(data.tie_rule, &GAIN_HEADER, &rows),
        aligned_table(data.tie_rule, &GAIN_HEADER, &rows),
    )
}

/// Top-k all-instances ensembles with gains over the heterogeneous rows.
pub fn render_topk_all(data: &ReportData) -> (String, String) {
    let mut header = GAIN_HEADER;
    header[0] = "models";
    let rows = gain_rows(&data.topk_all);
    (
        csv_table(data.tie_rule, &header, &rows),
        aligned_table(data.tie_rule, &header, &rows),
    )
}

const SUBSET_HEADER: [&str; 4] = ["model", "train", "validation", "test"];

/// One per-subset table per metric, rows sorted by the test column.
pub fn render_subsets(data: &ReportData, metric: Metric) -> (String, String) {
    let mut entries: Vec<(&SubsetMeans, f64)> = data
        .subsets
        .iter()
        .map(|s| (s, s.by_subset.get(&EvalSubset::Test).map_or(0.0, |m| m.get(metric))))
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.model.cmp(&b.0.model)));
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|(s, _)| {
            let mut row = vec![s.model.clone()];
            for subset in EvalSubset::ALL {
                row.push(format_value(s.by_subset.get(&subset).map_or(0.0, |m| m.get(metric))));
            }
            row
        })
        .collect();
    (
        csv_table(data.tie_rule, &SUBSET_HEADER, &rows),
        aligned_table(data.tie_rule, &SUBSET_HEADER, &rows),
    )
}

/// All report files as (file name, content) pairs.
pub fn render_all(data: &ReportData) -> Vec<(String, String)> {
    let mut files = Vec::new();
    let mut push = |name: &str, (csv, txt): (String, String)| {
        files.push((format!("{name}.csv"), csv));
        files.push((format!("{name}.txt"), txt));
    };
    push(SINGLE_MODELS, render_single_models(data));
    for metric in Metric::ALL {
        push(
            &format!("{SUBSET_PREFIX}_{}", metric.as_str().to_ascii_lowercase()),
            render_subsets(data, metric),
        );
    }
    push(ENSEMBLE_HETEROGENEOUS, render_heterogeneous(data));
    push(ENSEMBLE_HOMOGENEOUS, render_homogeneous(data));
    push(ENSEMBLE_TOPK_ALL, render_topk_all(data));
    files
}
