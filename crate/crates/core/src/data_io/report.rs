use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backtest::{BacktestReport, BacktestRun, CostModel};
use crate::decomposition::MasterDecomposition;
use crate::error::{Result, SptError};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPeriod {
    pub first: String,
    pub last: String,
    pub days: usize,
}

/// Top-level JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<ReportPeriod>,
    #[serde(default)]
    pub universe: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<CostModel>,
    pub strategies: Vec<BacktestReport>,
}

impl ReportDocument {
    pub fn new(strategies: Vec<BacktestReport>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            period: None,
            universe: Vec::new(),
            costs: None,
            strategies,
        }
    }
}

/// Pretty JSON with keys sorted at every level.
pub fn report_json_string(doc: &ReportDocument) -> Result<String> {
    // serde_json's default map is ordered, so a round trip through Value sorts keys.
    let value = serde_json::to_value(doc)?;
    let mut s = serde_json::to_string_pretty(&value)?;
    s.push('\n');
    Ok(s)
}

pub fn read_report_json(path: impl AsRef<Path>) -> Result<ReportDocument> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SptError::io(path, e))?;
    let doc: ReportDocument = serde_json::from_str(&text)?;
    if doc.schema_version != REPORT_SCHEMA_VERSION {
        return Err(SptError::Data(format!(
            "{}: schema version {} (expected {REPORT_SCHEMA_VERSION})",
            path.display(),
            doc.schema_version
        )));
    }
    Ok(doc)
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

/// Plain-text performance table and, when available, the three-factor table.
pub fn render_tables(doc: &ReportDocument) -> String {
    let mut out = String::new();
    if let Some(p) = &doc.period {
        let _ = writeln!(out, "period {} .. {} ({} days)", p.first, p.last, p.days);
    }
    if let Some(c) = &doc.costs {
        let _ = writeln!(out, "costs eps1={} eps2={}", c.eps1, c.eps2);
    }
    let _ = writeln!(
        out,
        "{:<18}{:>10}{:>9}{:>9}{:>11}{:>10}{:>10}{:>8}{:>8}{:>11}",
        "strategy", "ann_ret", "sharpe", "info", "terminal", "turnover", "alpha%", "beta", "R2", "mean_short"
    );
    for r in &doc.strategies {
        let _ = writeln!(
            out,
            "{:<18}{:>10}{:>9}{:>9}{:>11.3}{:>10.3}{:>10.3}{:>8.3}{:>8}{:>11.4}",
            r.strategy,
            pct(r.ann_return),
            opt(r.sharpe, 3),
            opt(r.info_ratio, 3),
            r.terminal_value,
            r.ann_turnover,
            r.ann_alpha_pct,
            r.beta,
            opt(r.r_squared, 3),
            r.mean_short
        );
    }
    if doc.strategies.iter().any(|r| r.ff3.is_some()) {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<18}{:>10}{:>8}{:>8}{:>8}{:>8}",
            "strategy", "alpha%", "beta", "smb", "hml", "R2"
        );
        for r in &doc.strategies {
            if let Some(f) = &r.ff3 {
                let _ = writeln!(
                    out,
                    "{:<18}{:>10.3}{:>8.3}{:>8.3}{:>8.3}{:>8}",
                    r.strategy,
                    f.alpha_pct,
                    f.beta,
                    f.smb_loading,
                    f.hml_loading,
                    opt(f.r_squared, 3)
                );
            }
        }
    }
    out
}

/// Long-format wealth curves `date,strategy,value`.
pub fn write_wealth_csv<W: Write>(writer: W, dates: &[String], runs: &[BacktestRun]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "strategy", "value"])?;
    for run in runs {
        if run.wealth.len() > dates.len() {
            return Err(SptError::dims("wealth curve dates", run.wealth.len(), dates.len()));
        }
        for (d, v) in dates.iter().zip(&run.wealth) {
            w.write_record([d.as_str(), run.name.as_str(), &v.to_string()])?;
        }
    }
    w.flush().map_err(|e| SptError::io("wealth csv", e))?;
    Ok(())
}

pub fn write_decomposition_csv(path: impl AsRef<Path>, dec: &MasterDecomposition) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| SptError::io(path, e))?;
    dec.write_csv(BufWriter::new(f))
}

/// Files produced by [`write_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub json: PathBuf,
    pub tables: PathBuf,
    pub wealth: PathBuf,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| SptError::io(path, e))
}

/// Writes `report.json`, `tables.txt` and `wealth.csv` into `dir`.
pub fn write_report(doc: &ReportDocument, runs: &[BacktestRun], dates: &[String], dir: impl AsRef<Path>) -> Result<ReportPaths> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| SptError::io(dir, e))?;
    let paths = ReportPaths {
        json: dir.join("report.json"),
        tables: dir.join("tables.txt"),
        wealth: dir.join("wealth.csv"),
    };
    write_file(&paths.json, report_json_string(doc)?.as_bytes())?;
    write_file(&paths.tables, render_tables(doc).as_bytes())?;
    let mut buf = Vec::new();
    write_wealth_csv(&mut buf, dates, runs)?;
    write_file(&paths.wealth, &buf)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::Ff3Report;

    fn sample() -> ReportDocument {
        let mut doc = ReportDocument::new(vec![
            BacktestReport {
                strategy: "market".into(),
                ann_return: 0.1030,
                sharpe: Some(0.596),
                info_ratio: None,
                terminal_value: 4.3,
                ann_turnover: 0.07,
                ann_alpha_pct: 0.0,
                beta: 1.0,
                r_squared: Some(1.0),
                mean_short: 0.0,
                ff3: None,
            },
            BacktestReport {
                strategy: "beta".into(),
                ann_return: 0.1433,
                sharpe: Some(0.787),
                info_ratio: Some(0.612),
                terminal_value: 7.442,
                ann_turnover: 0.813,
                ann_alpha_pct: 4.124,
                beta: 0.941,
                r_squared: Some(0.915),
                mean_short: 0.0,
                ff3: Some(Ff3Report {
                    alpha_pct: 4.072,
                    beta: 0.914,
                    smb_loading: -0.204,
                    hml_loading: -0.088,
                    r_squared: Some(0.87),
                }),
            },
        ]);
        doc.costs = Some(CostModel::default());
        doc.universe = vec!["AAA".into(), "BBB".into()];
        doc
    }

    #[test]
    fn json_round_trip_and_sorted_keys() {
        let doc = sample();
        let s = report_json_string(&doc).unwrap();
        let back: ReportDocument = serde_json::from_str(&s).unwrap();
        assert_eq!(back, doc);
        let keys: Vec<usize> = ["\"costs\"", "\"schema_version\"", "\"strategies\"", "\"universe\""]
            .iter()
            .map(|k| s.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(s.contains("\"info_ratio\": null"));
    }

    #[test]
    fn empty_report_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let doc = ReportDocument::new(vec![]);
        let paths = write_report(&doc, &[], &[], dir.path()).unwrap();
        let back = read_report_json(&paths.json).unwrap();
        assert_eq!(back.schema_version, REPORT_SCHEMA_VERSION);
        assert!(back.strategies.is_empty());
        assert_eq!(fs::read_to_string(&paths.wealth).unwrap(), "date,strategy,value\n");
    }

    #[test]
    fn tables_flag_undefined_ratios() {
        let t = render_tables(&sample());
        assert!(t.contains("n/a"));
        assert!(t.contains("smb"));
        assert!(t.lines().any(|l| l.starts_with("beta") && l.contains("14.33%")));
    }

    #[test]
    fn unwritable_destination() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(matches!(
            write_report(&sample(), &[], &[], blocker.join("sub")),
            Err(SptError::Io { .. })
        ));
    }
}
