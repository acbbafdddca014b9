use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Fixed column order; the first six follow the usual
/// accuracy / recall / precision / F1 / AUC summary table.
pub const REPORT_COLUMNS: [&str; 9] = [
    "model",
    "accuracy",
    "recall",
    "precision",
    "f1",
    "auc",
    "rmse",
    "mean_iou",
    "degenerate",
];

const ABSENT: &str = "na";

/// One report line. Metrics that do not apply to a task are `None` and
/// print as `na`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportRow {
    pub model: String,
    pub accuracy: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub rmse: Option<f64>,
    pub mean_iou: Option<f64>,
    pub degenerate: bool,
}

impl ReportRow {
    fn cells(&self) -> Vec<String> {
        let num = |v: Option<f64>| v.map_or_else(|| ABSENT.to_string(), |v| format!("{v:.6}"));
        vec![
            self.model.clone(),
            num(self.accuracy),
            num(self.recall),
            num(self.precision),
            num(self.f1),
            num(self.auc),
            num(self.rmse),
            num(self.mean_iou),
            (self.degenerate as u8).to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::param(format!("unknown report format `{s}` (text|csv)"))),
        }
    }
}

pub fn render_report(rows: &[ReportRow], format: ReportFormat) -> Result<String> {
    if let Some(r) = rows.iter().find(|r| r.model.contains([',', '\n']) || r.model.trim().is_empty()) {
        return Err(Error::param(format!("model name {:?} is empty or contains a separator", r.model)));
    }
    let cells: Vec<Vec<String>> = rows.iter().map(ReportRow::cells).collect();
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&REPORT_COLUMNS.join(","));
            out.push('\n');
            for row in &cells {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        ReportFormat::Text => {
            let widths: Vec<usize> = (0..REPORT_COLUMNS.len())
                .map(|c| cells.iter().map(|r| r[c].chars().count()).chain([REPORT_COLUMNS[c].len()]).max().unwrap_or(0))
                .collect();
            let line = |out: &mut String, row: &[&str]| {
                let parts: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                    .collect();
                let _ = writeln!(out, "{}", parts.join("  ").trim_end());
            };
            line(&mut out, &REPORT_COLUMNS);
            for row in &cells {
                line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
            }
        }
    }
    Ok(out)
}

pub fn write_report(rows: &[ReportRow], path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = render_report(rows, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing report {}", path.display()), e))
}

/// Inverse of the CSV form of [`render_report`].
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == REPORT_COLUMNS.join(",") => {}
        _ => {
            return Err(Error::Row {
                line: 1,
                message: "missing or unexpected report header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let row_err = |message: String| Error::Row { line: i + 1, message };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != REPORT_COLUMNS.len() {
                return Err(row_err(format!("expected {} fields, got {}", REPORT_COLUMNS.len(), f.len())));
            }
            let num = |s: &str| -> Result<Option<f64>> {
                if s == ABSENT {
                    return Ok(None);
                }
                s.parse().map(Some).map_err(|_| row_err(format!("bad number `{s}`")))
            };
            Ok(ReportRow {
                model: f[0].to_string(),
                accuracy: num(f[1])?,
                recall: num(f[2])?,
                precision: num(f[3])?,
                f1: num(f[4])?,
                auc: num(f[5])?,
                rmse: num(f[6])?,
                mean_iou: num(f[7])?,
                degenerate: match f[8] {
                    "0" => false,
                    "1" => true,
                    other => return Err(row_err(format!("bad flag `{other}`"))),
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ReportRow {
        ReportRow {
            model: "custom_cnn".into(),
            accuracy: Some(0.9955),
            recall: Some(0.5),
            precision: Some(1.0 / 3.0),
            f1: Some(0.4),
            auc: Some(0.875),
            ..Default::default()
        }
    }

    #[test]
    fn empty_list_writes_the_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_report(&[], &p, ReportFormat::Csv).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "model,accuracy,recall,precision,f1,auc,rmse,mean_iou,degenerate\n"
        );
        let t = render_report(&[], ReportFormat::Text).unwrap();
        assert_eq!(t.lines().count(), 1);
    }

    #[test]
    fn csv_round_trip_at_six_decimals() {
        let text = render_report(&[row()], ReportFormat::Csv).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "custom_cnn,0.995500,0.500000,0.333333,0.400000,0.875000,na,na,0"
        );
        let back = parse_report_csv(&text).unwrap();
        let expected = ReportRow {
            precision: Some(0.333333),
            ..row()
        };
        assert_eq!(back, vec![expected]);
    }

    #[test]
    fn text_table_is_aligned() {
        let t = render_report(&[row(), ReportRow { model: "m".into(), rmse: Some(0.1), ..Default::default() }], ReportFormat::Text)
            .unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("model"));
        let pos = |l: &str| l.find("accuracy").or_else(|| l.find("0.995500")).or_else(|| l.find("na"));
        assert!(pos(lines[0]).is_some() && pos(lines[1]).is_some());
    }

    #[test]
    fn rejects_separator_in_model_name() {
        let r = ReportRow {
            model: "a,b".into(),
            ..Default::default()
        };
        assert!(render_report(&[r], ReportFormat::Csv).is_err());
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
