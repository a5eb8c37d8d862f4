use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TokenStrategy;

use super::metrics::{ClassificationReport, CountingReport, RegressionReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub strategy: TokenStrategy,
    pub report: RegressionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Report {
    Classification { task: String, report: ClassificationReport },
    Counting { task: String, report: CountingReport },
    Regression { task: String, report: RegressionReport },
    Ablation { rows: Vec<AblationRow> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }

    /// From a file extension, defaulting to json.
    pub fn for_path(path: &Path) -> ReportFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => ReportFormat::Csv,
            Some("md") | Some("markdown") => ReportFormat::Markdown,
            _ => ReportFormat::Json,
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

/// Long-format csv: one metric per line. `row` holds the strategy label for
/// ablation lines and is empty otherwise; undefined metrics have an empty value.
pub const CSV_HEADER: &str = "section,row,metric,value";

fn metric_rows(report: &Report) -> Vec<(String, String, Vec<(&'static str, Option<f64>)>)> {
    match report {
        Report::Classification { task, report: r } => vec![(
            task.clone(),
            String::new(),
            vec![
                ("OA", r.oa),
                ("MA_Pre", r.ma_pre),
                ("MA_Recl", r.ma_recl),
                ("MA_F1", r.ma_f1),
                ("answered_rate", Some(r.answered_rate)),
            ],
        )],
        Report::Counting { task, report: r } => vec![(
            task.clone(),
            String::new(),
            vec![
                ("RMSE", r.rmse),
                ("MAE", r.mae),
                ("R2", r.r2),
                ("OA", r.oa),
                ("answered_rate", Some(r.answered_rate)),
            ],
        )],
        Report::Regression { task, report: r } => {
            vec![(task.clone(), String::new(), vec![("RMSE", r.rmse), ("MAE", r.mae), ("R2", r.r2)])]
        }
        Report::Ablation { rows } => ordered(rows)
            .into_iter()
            .map(|row| {
                (
                    "ablation".to_string(),
                    row.strategy.label().to_string(),
                    vec![("RMSE", row.report.rmse), ("MAE", row.report.mae), ("R2", row.report.r2)],
                )
            })
            .collect(),
    }
}

fn ordered(rows: &[AblationRow]) -> Vec<&AblationRow> {
    let mut v: Vec<&AblationRow> = rows.iter().collect();
    v.sort_by_key(|r| r.strategy);
    v
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or("n/a".to_string(), |v| format!("{v:.2}"))
}

fn markdown(reports: &[Report]) -> String {
    let mut out = String::new();
    for report in reports {
        match report {
            Report::Classification { task, report: r } => {
                let _ = writeln!(out, "### {task}\n\n| OA | MA_Pre | MA_Recl | MA_F1 | Answered |\n|---|---|---|---|---|");
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {:.1}% |\n",
                    cell(r.oa),
                    cell(r.ma_pre),
                    cell(r.ma_recl),
                    cell(r.ma_f1),
                    100.0 * r.answered_rate
                );
            }
            Report::Counting { task, report: r } => {
                let _ = writeln!(out, "### {task}\n\n| RMSE↓ | MAE↓ | R-squared↑ | OA | Answered |\n|---|---|---|---|---|");
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {:.1}% |\n",
                    cell(r.rmse),
                    cell(r.mae),
                    cell(r.r2),
                    cell(r.oa),
                    100.0 * r.answered_rate
                );
            }
            Report::Regression { task, report: r } => {
                let _ = writeln!(out, "### {task}\n\n| RMSE↓ | MAE↓ | R-squared↑ |\n|---|---|---|");
                let _ = writeln!(out, "| {} | {} | {} |\n", cell(r.rmse), cell(r.mae), cell(r.r2));
            }
            Report::Ablation { rows } => {
                let _ = writeln!(out, "### token selection\n\n| Strategy | RMSE↓ | MAE↓ | R-squared↑ |\n|---|---|---|---|");
                for row in ordered(rows) {
                    let r = &row.report;
                    let _ = writeln!(out, "| {} | {} | {} | {} |", row.strategy.label(), cell(r.rmse), cell(r.mae), cell(r.r2));
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn render_report(reports: &[Report], format: ReportFormat) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Precondition("no reports to emit".into()));
    }
    Ok(match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(reports).map_err(|e| Error::Internal(e.to_string()))?;
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = format!("{CSV_HEADER}\n");
            for r in reports {
                for (section, row, metrics) in metric_rows(r) {
                    for (name, value) in metrics {
                        let value = value.map(|v| v.to_string()).unwrap_or_default();
                        let _ = writeln!(s, "{},{},{name},{value}", csv_field(&section), csv_field(&row));
                    }
                }
            }
            s
        }
        ReportFormat::Markdown => markdown(reports),
    })
}

pub fn emit_report(reports: &[Report], format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(reports, format)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json_reports(path: &Path) -> Result<Vec<Report>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::metrics::regression_metrics;

    fn ablation() -> Report {
        let rows = TokenStrategy::ALL
            .iter()
            .rev()
            .enumerate()
            .map(|(i, &s)| AblationRow {
                strategy: s,
                report: regression_metrics(&[(0.0, i as f64), (10.0, 9.0), (20.0, 21.5)]),
            })
            .collect();
        Report::Ablation { rows }
    }

    #[test]
    fn json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let reports = vec![
            ablation(),
            Report::Regression { task: "agb".into(), report: regression_metrics(&[(1.0, 2.0), (3.0, 1.0)]) },
        ];
        emit_report(&reports, ReportFormat::Json, &path).unwrap();
        assert_eq!(read_json_reports(&path).unwrap(), reports);
    }

    #[test]
    fn csv_header_is_fixed() {
        let text = render_report(&[ablation()], ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "section,row,metric,value");
        assert_eq!(lines.len(), 1 + 4 * 3);
        assert!(lines[1].starts_with("ablation,Last layer,RMSE,"));
        assert!(lines[10].starts_with("ablation,All layer,RMSE,"));
    }

    #[test]
    fn ablation_markdown_shape() {
        let text = render_report(&[ablation()], ReportFormat::Markdown).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| Strategy")).collect();
        assert_eq!(rows.len(), 4);
        for (row, s) in rows.iter().zip(TokenStrategy::ALL) {
            assert!(row.starts_with(&format!("| {} |", s.label())));
            assert_eq!(row.matches('|').count(), 5);
        }
        assert!(text.contains("| Strategy | RMSE↓ | MAE↓ | R-squared↑ |"));
    }

    #[test]
    fn negative_r2_is_not_clamped() {
        let r = regression_metrics(&[(0.0, 50.0), (1.0, -50.0), (2.0, 40.0)]);
        assert!(r.r2.unwrap() < -100.0);
        let text = render_report(&[Report::Counting {
            task: "counting".into(),
            report: crate::evalkit::metrics::CountingReport {
                rmse: r.rmse,
                mae: r.mae,
                r2: r.r2,
                oa: Some(0.0),
                answered: 3,
                total: 3,
                answered_rate: 1.0,
            },
        }], ReportFormat::Csv)
        .unwrap();
        assert!(text.contains(&format!("counting,,R2,{}", r.r2.unwrap())));
        assert!(empty_fails());
    }

    fn empty_fails() -> bool {
        render_report(&[], ReportFormat::Json).is_err()
    }
}
