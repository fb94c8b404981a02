//! Plain-text report tables with aligned columns.
//!
//! Label column left-aligned, numeric columns right-aligned, two-space
//! gutters. The metrics table reports depth/volume/disjoint/ratio per row
//! with ratio in percent; the verdict table closes with an aggregate
//! success-rate line.

use crate::eval::GraspVerdict;
use crate::metrics::QualityMetrics;
use crate::pipeline::FilterStats;

struct TextTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl TextTable {
    fn new(headers: &[&str]) -> Self {
        TextTable {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.headers.len());
        self.rows.push(cells);
    }

    fn render(&self) -> String {
        let mut width: Vec<usize> = self.headers.iter().map(String::len).collect();
        for row in &self.rows {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        emit(&self.headers, &width, &mut out);
        for row in &self.rows {
            emit(row, &width, &mut out);
        }
        out
    }
}

fn emit(cells: &[String], width: &[usize], out: &mut String) {
    let mut line = String::new();
    for (i, (cell, &w)) in cells.iter().zip(width).enumerate() {
        if i == 0 {
            line.push_str(&format!("{cell:<w$}"));
        } else {
            line.push_str(&format!("  {cell:>w$}"));
        }
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

/// One labeled row per metrics report: depth, volume, disjoint distance,
/// and contact ratio (in percent).
pub fn render_metrics_table(rows: &[(&str, &QualityMetrics)]) -> String {
    let mut table =
        TextTable::new(&["dataset", "depth [cm]", "volume [cm^3]", "disjoint [cm]", "ratio [%]"]);
    for (label, m) in rows {
        table.row(vec![
            label.to_string(),
            format!("{:.2}", m.penetration_depth_cm),
            format!("{:.2}", m.penetration_volume_cm3),
            format!("{:.2}", m.disjoint_mean_cm),
            format!("{:.2}", 100.0 * m.contact_ratio),
        ]);
    }
    table.render()
}

/// One labeled row per filtering run: gate-by-gate rejection counts and the
/// retained share.
pub fn render_filter_table(rows: &[(&str, &FilterStats)]) -> String {
    let mut table = TextTable::new(&[
        "dataset",
        "input",
        "size",
        "shape",
        "penetration",
        "retained",
        "retained [%]",
    ]);
    for (label, s) in rows {
        table.row(vec![
            label.to_string(),
            s.input.to_string(),
            s.rejected_size.to_string(),
            s.rejected_shape.to_string(),
            s.rejected_penetration.to_string(),
            s.retained.to_string(),
            format!("{:.1}", 100.0 * s.retained_fraction),
        ]);
    }
    table.render()
}

/// One labeled row per evaluated grasp, closed by an aggregate success-rate
/// line.
pub fn render_verdict_table(rows: &[(&str, &GraspVerdict)]) -> String {
    let mut table = TextTable::new(&["grasp", "success", "epsilon", "contacts", "depth [cm]"]);
    for (label, v) in rows {
        table.row(vec![
            label.to_string(),
            if v.success { "yes" } else { "no" }.to_string(),
            format!("{:.4}", v.epsilon),
            v.contacts.to_string(),
            format!("{:.2}", v.penetration_depth_cm),
        ]);
    }
    let successes = rows.iter().filter(|(_, v)| v.success).count();
    let rate = if rows.is_empty() { 0.0 } else { 100.0 * successes as f64 / rows.len() as f64 };
    format!(
        "{}success rate: {successes}/{} ({rate:.1}%)\n",
        table.render(),
        rows.len()
    )
}
