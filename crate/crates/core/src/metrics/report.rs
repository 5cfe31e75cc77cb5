use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, MetricsError, Result};

use super::{Correlation, Histogram};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "state", content = "reason")]
pub enum RowStatus {
    Ok,
    Failed(String),
}

/// One method in one ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub table: String,
    pub label: String,
    pub ap: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    pub status: RowStatus,
}

impl ReportRow {
    pub fn ok(table: &str, label: &str, ap: f64, ap50: f64, ap75: f64) -> Self {
        Self {
            table: table.to_owned(),
            label: label.to_owned(),
            ap: Some(ap),
            ap50: Some(ap50),
            ap75: Some(ap75),
            status: RowStatus::Ok,
        }
    }

    pub fn failed(table: &str, label: &str, reason: impl Into<String>) -> Self {
        Self {
            table: table.to_owned(),
            label: label.to_owned(),
            ap: None,
            ap50: None,
            ap75: None,
            status: RowStatus::Failed(reason.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochHistogram {
    pub epoch: usize,
    pub histogram: Histogram,
}

/// A named pass/fail assertion evaluated on the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub correlations: Vec<Correlation>,
    pub histograms: Vec<EpochHistogram>,
    pub checks: Vec<Check>,
}

/// Validates rows and wraps them in a report.
///
/// Successful rows must carry every metric, and every metric must lie in [0, 1]. Failed rows
/// may leave cells empty.
pub fn assemble_report(rows: Vec<ReportRow>) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyReport.into());
    }
    for row in rows.iter().filter(|r| r.is_ok()) {
        for (cell, v) in [("ap", row.ap), ("ap50", row.ap50), ("ap75", row.ap75)] {
            match v {
                None => {
                    return Err(MetricsError::MissingCell {
                        row: format!("{}/{}", row.table, row.label),
                        cell: cell.into(),
                    }
                    .into())
                }
                Some(v) if !(0.0..=1.0).contains(&v) => {
                    return Err(Error::Format(format!("{}/{} {cell} = {v} outside [0, 1]", row.table, row.label)))
                }
                _ => {}
            }
        }
    }
    Ok(EvalReport {
        rows,
        correlations: Vec::new(),
        histograms: Vec::new(),
        checks: Vec::new(),
    })
}

impl EvalReport {
    pub fn with_correlations(mut self, c: Vec<Correlation>) -> Self {
        self.correlations = c;
        self
    }

    pub fn with_histograms(mut self, h: Vec<EpochHistogram>) -> Self {
        self.histograms = h;
        self
    }

    pub fn with_checks(mut self, c: Vec<Check>) -> Self {
        self.checks = c;
        self
    }

    pub fn row(&self, table: &str, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.table == table && r.label == label)
    }

    /// First row: the single evaluated configuration, or the baseline of an ablation.
    pub fn headline(&self) -> &ReportRow {
        &self.rows[0]
    }

    pub fn ap_mean(&self) -> Option<f64> {
        self.headline().ap
    }

    pub fn ap50(&self) -> Option<f64> {
        self.headline().ap50
    }

    pub fn ap75(&self) -> Option<f64> {
        self.headline().ap75
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(|r| !r.is_ok())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    /// Ablation rows as CSV.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("table,label,ap,ap50,ap75,status\n");
        for r in &self.rows {
            let status = match &r.status {
                RowStatus::Ok => "ok".to_owned(),
                RowStatus::Failed(why) => format!("failed: {why}"),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&r.table),
                csv_field(&r.label),
                opt(r.ap),
                opt(r.ap50),
                opt(r.ap75),
                csv_field(&status)
            );
        }
        out
    }

    pub fn correlations_csv(&self) -> String {
        let mut out = String::from("label,pearson,samples\n");
        for c in &self.correlations {
            let _ = writeln!(out, "{},{},{}", csv_field(&c.label), sig6(c.pearson), c.samples);
        }
        out
    }

    /// Long format: one line per (epoch, bin).
    pub fn histograms_csv(&self) -> String {
        let mut out = String::from("epoch,bin_lower,mass,mean\n");
        for h in &self.histograms {
            for (k, m) in h.histogram.mass.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    h.epoch,
                    sig6(h.histogram.bin_lower(k)),
                    sig6(*m),
                    sig6(h.histogram.mean)
                );
            }
        }
        out
    }

    pub fn checks_csv(&self) -> String {
        let mut out = String::from("check,passed,detail\n");
        for c in &self.checks {
            let _ = writeln!(out, "{},{},{}", csv_field(&c.name), c.passed, csv_field(&c.detail));
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// `%.6g`: six significant digits, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // round first so 9.999996 is classified by the exponent it prints with
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formats() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(0.123456789), "0.123457");
        assert_eq!(sig6(-0.5), "-0.5");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e+06");
        assert_eq!(sig6(0.00001234), "1.234e-05");
        assert_eq!(sig6(0.9999996), "1");
        assert_eq!(sig6(0.0001), "0.0001");
    }

    #[test]
    fn empty_rows_fail() {
        assert!(matches!(
            assemble_report(vec![]),
            Err(Error::Metrics(MetricsError::EmptyReport))
        ));
    }

    #[test]
    fn missing_cell_is_named() {
        let mut row = ReportRow::ok("t3", "dir", 0.4, 0.7, 0.4);
        row.ap75 = None;
        let err = assemble_report(vec![row]).unwrap_err();
        assert_eq!(err.to_string(), "report row `t3/dir` is missing `ap75`");
        // failed rows are allowed to be empty
        assert!(assemble_report(vec![ReportRow::failed("t3", "dir", "diverged")]).is_ok());
    }

    #[test]
    fn single_row_round_trip() {
        let report = assemble_report(vec![ReportRow::ok("baseline", "cls-only", 0.41, 0.8, 0.37)]).unwrap();
        let json = report.to_json().unwrap();
        assert_eq!(EvalReport::from_json(&json).unwrap(), report);
        assert_eq!(report.to_json().unwrap(), json);
        assert_eq!(
            report.rows_csv(),
            "table,label,ap,ap50,ap75,status\nbaseline,cls-only,0.41,0.8,0.37,ok\n"
        );
    }

    #[test]
    fn six_row_schema() {
        let labels = ["baseline", "foresight", "hindsight", "decoupled", "3x-lr", "crossed"];
        let rows = labels.iter().map(|l| ReportRow::ok("t3", l, 0.3, 0.6, 0.3)).collect();
        let report = assemble_report(rows).unwrap();
        let csv = report.rows_csv();
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        for col in ["ap", "ap50", "ap75"] {
            assert!(header.contains(&col));
        }
        assert_eq!(lines.count(), 6);
        assert!(lines_have_all_cells(&csv));
    }

    fn lines_have_all_cells(csv: &str) -> bool {
        csv.lines().skip(1).all(|l| l.split(',').all(|c| !c.is_empty()))
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(assemble_report(vec![ReportRow::ok("t", "x", 1.5, 0.5, 0.5)]).is_err());
    }
}
