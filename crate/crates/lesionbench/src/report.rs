//! Report emission: per-case CSV, summary JSON, subgroup CSV and the
//! two-panel SVG bar charts (case counts on the left, mean Dice on the
//! right).

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use lesionbench_core::evaluation::{round2, CaseResult, SummaryRow};

use crate::error::IoError;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Volumes are resampled first, then z-scored; recorded in every summary.
pub const PREPROCESSING_ORDER: &str = "resample_then_zscore";

#[derive(Debug, Serialize)]
pub struct SummaryRowJson {
    pub group: String,
    pub n: usize,
    pub mean_dice_pct: Option<f64>,
    pub mean_nsd_pct: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SummaryJson {
    pub toolkit_version: String,
    pub preprocessing_order: String,
    pub policy: String,
    pub tolerance_mm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision_mode: Option<String>,
    pub rows: Vec<SummaryRowJson>,
}

impl SummaryJson {
    pub fn new(policy: &str, tolerance_mm: f64, rows: &[SummaryRow]) -> Self {
        SummaryJson {
            toolkit_version: TOOLKIT_VERSION.to_string(),
            preprocessing_order: PREPROCESSING_ORDER.to_string(),
            policy: policy.to_string(),
            tolerance_mm,
            precision_mode: None,
            rows: rows
                .iter()
                .map(|r| SummaryRowJson {
                    group: r.group.clone(),
                    n: r.n_included,
                    mean_dice_pct: r.mean_dice_pct.map(round2),
                    mean_nsd_pct: r.mean_nsd_pct.map(round2),
                })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let json = serde_json::to_string_pretty(self).expect("summary serializes");
        std::fs::write(path, json).map_err(|e| IoError::io(path, e))
    }
}

fn metric_cell(v: lesionbench_core::MetricValue) -> String {
    match v.value() {
        Some(x) => format!("{x:.6}"),
        None => String::new(),
    }
}

/// Per-case results CSV: `case_id,dice,nsd,gt_empty,pred_empty`,
/// undefined metrics as empty cells, rows sorted by case_id.
pub fn write_case_csv(results: &[CaseResult], path: &Path) -> Result<(), IoError> {
    let mut sorted: Vec<&CaseResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    let mut out = String::from("case_id,dice,nsd,gt_empty,pred_empty\n");
    for r in sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.case_id,
            metric_cell(r.dice),
            metric_cell(r.nsd),
            r.gt_empty,
            r.pred_empty
        );
    }
    std::fs::write(path, out).map_err(|e| IoError::io(path, e))
}

/// Subgroup CSV: `group,n,mean_dice_pct,mean_nsd_pct`.
pub fn write_subgroup_csv(rows: &[SummaryRow], path: &Path) -> Result<(), IoError> {
    let mut out = String::from("group,n,mean_dice_pct,mean_nsd_pct\n");
    for r in rows {
        let fmt = |v: Option<f64>| v.map(|x| format!("{:.2}", round2(x))).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.group, r.n_included, fmt(r.mean_dice_pct), fmt(r.mean_nsd_pct));
    }
    std::fs::write(path, out).map_err(|e| IoError::io(path, e))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bar_panel(
    svg: &mut String,
    x0: f64,
    title: &str,
    labels: &[String],
    values: &[f64],
    value_fmt: &dyn Fn(f64) -> String,
) {
    const PANEL_W: f64 = 420.0;
    const PANEL_H: f64 = 260.0;
    const PLOT_TOP: f64 = 40.0;
    const PLOT_BOTTOM: f64 = 220.0;
    let max = values.iter().cloned().fold(0.0_f64, f64::max).max(1e-9);
    let n = labels.len().max(1);
    let slot = (PANEL_W - 60.0) / n as f64;
    let bar_w = (slot * 0.7).min(60.0);

    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" font-size="14" font-family="sans-serif" text-anchor="middle">{}</text>"#,
        x0 + PANEL_W / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{:.1}" y1="{PLOT_BOTTOM}" x2="{:.1}" y2="{PLOT_BOTTOM}" stroke="black"/>"#,
        x0 + 40.0,
        x0 + PANEL_W - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{:.1}" y1="{PLOT_TOP}" x2="{:.1}" y2="{PLOT_BOTTOM}" stroke="black"/>"#,
        x0 + 40.0,
        x0 + 40.0
    );
    for (i, (label, &v)) in labels.iter().zip(values.iter()).enumerate() {
        let h = (v / max) * (PLOT_BOTTOM - PLOT_TOP);
        let bx = x0 + 40.0 + slot * i as f64 + (slot - bar_w) / 2.0;
        let by = PLOT_BOTTOM - h;
        let _ = writeln!(
            svg,
            r##"<rect x="{bx:.1}" y="{by:.1}" width="{bar_w:.1}" height="{h:.1}" fill="#4878a8"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" font-family="sans-serif" text-anchor="middle">{}</text>"#,
            bx + bar_w / 2.0,
            by - 4.0,
            value_fmt(v)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" font-family="sans-serif" text-anchor="middle" transform="rotate(30 {:.1} {:.1})">{}</text>"#,
            bx + bar_w / 2.0,
            PLOT_BOTTOM + 14.0,
            bx + bar_w / 2.0,
            PLOT_BOTTOM + 14.0,
            xml_escape(label)
        );
    }
    let _ = PANEL_H;
}

/// Two-panel bar chart for one subgroup axis: number of included cases
/// per group and mean Dice per group.
pub fn write_subgroup_svg(axis: &str, rows: &[SummaryRow], path: &Path) -> Result<(), IoError> {
    let labels: Vec<String> = rows.iter().map(|r| r.group.clone()).collect();
    let counts: Vec<f64> = rows.iter().map(|r| r.n_included as f64).collect();
    let dices: Vec<f64> = rows.iter().map(|r| r.mean_dice_pct.unwrap_or(0.0)).collect();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="860" height="260" viewBox="0 0 860 260">"#
    );
    bar_panel(
        &mut svg,
        0.0,
        &format!("cases per {axis} group"),
        &labels,
        &counts,
        &|v| format!("{}", v as usize),
    );
    bar_panel(
        &mut svg,
        430.0,
        &format!("mean Dice by {axis} group"),
        &labels,
        &dices,
        &|v| format!("{:.2}", round2(v)),
    );
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|e| IoError::io(path, e))
}
