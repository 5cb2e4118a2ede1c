//! Rounding reports and their csv / aligned-text renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::schedules::{Menu, PartLabel};
use crate::walk::{Lambda, Preset};

pub const CSV_COLUMNS: [&str; 11] = [
    "constraint_id",
    "part",
    "b",
    "lambda",
    "violation",
    "bound_sqrt_j",
    "bound_nlog",
    "bound_Lb",
    "bound_delta",
    "bound_min",
    "ratio",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub constraint_id: usize,
    pub part: PartLabel,
    pub b: f64,
    /// Multiplier used in the first iteration that touched the row.
    pub lambda: Lambda,
    pub violation: f64,
    pub menu: Menu,
}

impl ReportRow {
    pub fn bound_min(&self) -> f64 {
        self.menu.min()
    }

    pub fn ratio(&self) -> f64 {
        let m = self.bound_min();
        if m > 0.0 {
            self.violation / m
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub driver: String,
    pub seed: u64,
    pub preset: Preset,
    pub restarts: u32,
    pub attempts: usize,
    pub iterations: usize,
    pub truncations: usize,
    pub lambda_inflations: usize,
    /// Excluded from every rendering so that reports stay reproducible.
    pub wall_time_ms: Option<f64>,
    /// Driver specific key/value lines, in insertion order.
    pub extra: Vec<(String, String)>,
}

impl RunMeta {
    pub fn new(driver: &str, seed: u64, preset: Preset, restarts: u32) -> Self {
        Self {
            driver: driver.to_string(),
            seed,
            preset,
            restarts,
            attempts: 0,
            iterations: 0,
            truncations: 0,
            lambda_inflations: 0,
            wall_time_ms: None,
            extra: Vec::new(),
        }
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.extra.push((key.to_string(), value.to_string()));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingReport {
    pub rows: Vec<ReportRow>,
    pub meta: RunMeta,
    pub solution: Vec<f64>,
}

impl RoundingReport {
    pub fn max_violation(&self) -> f64 {
        self.rows.iter().map(|r| r.violation).fold(0.0, f64::max)
    }

    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Table,
    Csv,
}

fn num(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn lambda_text(l: Lambda) -> String {
    match l {
        Lambda::Finite(v) => num(v),
        Lambda::Unbounded => "inf".into(),
    }
}

fn cells(r: &ReportRow) -> [String; 11] {
    [
        r.constraint_id.to_string(),
        r.part.to_string(),
        num(r.b),
        lambda_text(r.lambda),
        num(r.violation),
        num(r.menu.sqrt_j),
        num(r.menu.nlog),
        num(r.menu.lb),
        num(r.menu.delta),
        num(r.bound_min()),
        num(r.ratio()),
    ]
}

pub fn emit_report(report: &RoundingReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => emit_csv(report),
        ReportFormat::Table => emit_table(report),
    }
}

fn emit_csv(report: &RoundingReport) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in &report.rows {
        out.push_str(&cells(r).join(","));
        out.push('\n');
    }
    out
}

fn emit_table(report: &RoundingReport) -> String {
    let m = &report.meta;
    let mut out = String::new();
    let _ = writeln!(out, "# driver: {}", m.driver);
    let _ = writeln!(out, "# seed: {}", m.seed);
    let _ = writeln!(out, "# preset: {}", serde_json::to_value(m.preset).unwrap().as_str().unwrap_or("?"));
    let _ = writeln!(out, "# restarts: {}", m.restarts);
    let _ = writeln!(out, "# attempts: {}", m.attempts);
    let _ = writeln!(out, "# iterations: {}", m.iterations);
    let _ = writeln!(out, "# truncations: {}", m.truncations);
    let _ = writeln!(out, "# lambda_inflations: {}", m.lambda_inflations);
    for (k, v) in &m.extra {
        let _ = writeln!(out, "# {k}: {v}");
    }
    let sol: Vec<String> = report.solution.iter().map(|v| format!("{}", v)).collect();
    let _ = writeln!(out, "# solution: {}", sol.join(" "));

    let body: Vec<[String; 11]> = report.rows.iter().map(cells).collect();
    let mut widths: Vec<usize> = CSV_COLUMNS.iter().map(|c| c.len()).collect();
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cols: Vec<&str>| -> String {
        cols.iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 1 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    out.push_str(&line(CSV_COLUMNS.to_vec()));
    out.push('\n');
    for row in &body {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> RunMeta {
        RunMeta::new("round", 1, Preset::Practical, 5)
    }

    fn row() -> ReportRow {
        ReportRow {
            constraint_id: 0,
            part: PartLabel::M1,
            b: 5.0,
            lambda: Lambda::Finite(0.0),
            violation: 1.0,
            menu: Menu { sqrt_j: 1.0, nlog: 3.3, lb: 20.0, delta: 2.3 },
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let r = RoundingReport { rows: vec![], meta: meta(), solution: vec![] };
        let csv = emit_report(&r, ReportFormat::Csv);
        assert_eq!(csv, format!("{}\n", CSV_COLUMNS.join(",")));
    }

    #[test]
    fn single_row_csv() {
        let r = RoundingReport { rows: vec![row()], meta: meta(), solution: vec![1.0] };
        let csv = emit_report(&r, ReportFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[1],
            "0,M1,5.000000,0.000000,1.000000,1.000000,3.300000,20.000000,2.300000,1.000000,1.000000"
        );
    }

    #[test]
    fn table_is_reproducible_and_hides_wall_time() {
        let mut m = meta();
        m.wall_time_ms = Some(12.5);
        let r = RoundingReport { rows: vec![row(), row()], meta: m, solution: vec![0.0, 1.0] };
        let a = emit_report(&r, ReportFormat::Table);
        let mut r2 = r.clone();
        r2.meta.wall_time_ms = Some(99.0);
        assert_eq!(a, emit_report(&r2, ReportFormat::Table));
        assert!(!a.contains("12.5"));
        let widths: Vec<usize> = a.lines().filter(|l| !l.starts_with('#')).map(str::len).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]));
    }
}
