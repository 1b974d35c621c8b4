use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io_util;

use super::grouped::{MetricReport, MetricRow};

const NULL: &str = "null";

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| NULL.to_string(), |x| x.to_string())
}

fn config_echo(report: &MetricReport) -> Vec<String> {
    let c = &report.config;
    let mut lines = vec![
        format!("# model: {}", report.model),
        format!("# grouping: {}", report.grouping),
        format!("# heat_scale: {}", c.heat_scale),
        format!("# moisture_scale: {}", c.moisture_scale),
        format!("# crps_samples: {}", c.crps_samples),
        format!("# crps_seed: {}", c.crps_seed),
        format!("# r2_mode: {}", c.r2_mode),
        format!("# n_members: {}", report.n_members),
    ];
    if let Some(w) = c.daily_window {
        lines.push(format!("# daily_window: {w}"));
    }
    if !report.crps_members.is_empty() {
        let idx: Vec<String> = report.crps_members.iter().map(usize::to_string).collect();
        lines.push(format!("# crps_members: {}", idx.join(" ")));
    }
    lines
}

fn write_table(path: &Path, comments: &[String], header: Vec<String>, rows: Vec<Vec<String>>) -> Result<()> {
    let mut out = String::new();
    for line in comments {
        out.push_str(line);
        out.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    io_util::write(path, out.as_bytes())
}

fn key_cells(row: &MetricRow) -> Vec<String> {
    let mut cells: Vec<String> = row.group_values.iter().map(f64::to_string).collect();
    cells.push(row.variable.clone());
    cells.push(num(row.level_hpa));
    cells
}

fn key_header(report: &MetricReport) -> Vec<String> {
    let mut h = report.group_axes.clone();
    h.push("variable".into());
    h.push("level_hpa".into());
    h
}

/// Wide table, one line per group and variable, preceded by `#` lines
/// echoing the metric configuration. R² follows the report's mode.
pub fn write_report_csv(report: &MetricReport, path: &Path) -> Result<()> {
    let mut header = key_header(report);
    header.extend(["scale", "count", "mae", "r2", "crps", "sigma_mean"].map(String::from));
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let mut cells = key_cells(r);
            cells.extend([
                r.scale.to_string(),
                r.count.to_string(),
                r.mae.to_string(),
                num(report.display_r2(r)),
                r.crps.to_string(),
                r.sigma_mean.to_string(),
            ]);
            cells
        })
        .collect();
    write_table(path, &config_echo(report), header, rows)
}

/// Structured copy of the report. R² is always raw here.
pub fn write_report_json(report: &MetricReport, path: &Path) -> Result<()> {
    io_util::write_json(path, report)
}

pub fn read_report_json(path: &Path) -> Result<MetricReport> {
    io_util::read_json(path)
}

const JOINED_METRICS: [&str; 4] = ["mae", "r2", "crps", "sigma_mean"];

fn metric(report: &MetricReport, row: &MetricRow, name: &str) -> Option<f64> {
    match name {
        "mae" => Some(row.mae),
        "r2" => report.display_r2(row),
        "crps" => Some(row.crps),
        _ => Some(row.sigma_mean),
    }
}

/// Outer join of several reports on (group, variable), one column per
/// metric and model in the order given. Absent cells are written as `null`.
pub fn write_comparison_csv(reports: &[MetricReport], path: &Path) -> Result<()> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidConfig("no reports to join".into()))?;
    if let Some(r) = reports.iter().find(|r| r.grouping != first.grouping) {
        return Err(Error::InvalidConfig(format!(
            "cannot join a {} report ({}) with a {} report ({})",
            r.grouping, r.model, first.grouping, first.model
        )));
    }
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut cells: BTreeMap<Vec<String>, Vec<Option<f64>>> = BTreeMap::new();
    let width = reports.len() * JOINED_METRICS.len();
    for (m, report) in reports.iter().enumerate() {
        for row in &report.rows {
            let key = key_cells(row);
            let slot = cells.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                vec![None; width]
            });
            for (k, name) in JOINED_METRICS.iter().enumerate() {
                slot[k * reports.len() + m] = metric(report, row, name);
            }
        }
    }
    let mut header = key_header(first);
    for name in JOINED_METRICS {
        header.extend(reports.iter().map(|r| format!("{name}:{}", r.model)));
    }
    let rows = order
        .into_iter()
        .map(|key| {
            let vals = &cells[&key];
            let mut line = key;
            line.extend(vals.iter().map(|v| num(*v)));
            line
        })
        .collect();
    let mut comments = vec![format!("# grouping: {}", first.grouping)];
    for r in reports {
        comments.push(format!(
            "# model {}: r2_mode {}, crps_samples {}, crps_seed {}",
            r.model, r.config.r2_mode, r.config.crps_samples, r.config.crps_seed
        ));
    }
    write_table(path, &comments, header, rows)
}
