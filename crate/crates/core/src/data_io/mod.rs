//! Panel ingestion (prices, shares outstanding, ROA, factor returns) and
//! report artifacts.
//!
//! Prices are taken to be total-return adjusted. Shares and ROA are sparse
//! reports carried forward to every trading day; a value on day `d` only
//! ever uses reports dated on or before `d`.

mod report;
mod synthetic;

pub use report::{
    read_report_json, render_tables, report_json_string, write_decomposition_csv, write_report, write_wealth_csv,
    ReportDocument, ReportPaths, ReportPeriod, REPORT_SCHEMA_VERSION,
};
pub use synthetic::{synthetic_panel, write_panel, SyntheticPanelSpec};

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::{FactorSeries, StrategyInputs};
use crate::error::{Result, SptError};
use crate::matrix::SeriesMatrix;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Default multiplier applied to raw ROA values.
pub const DEFAULT_ROA_SCALE: f64 = 10.0;

/// Locations of the four panel files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelFiles {
    pub prices: PathBuf,
    pub shares: PathBuf,
    pub roa: PathBuf,
    pub factors: PathBuf,
}

impl PanelFiles {
    /// `prices.csv`, `shares.csv`, `roa.csv` and `factors.csv` inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        Self {
            prices: d.join("prices.csv"),
            shares: d.join("shares.csv"),
            roa: d.join("roa.csv"),
            factors: d.join("factors.csv"),
        }
    }

    /// Resolves relative paths against `base`.
    pub fn relative_to(&self, base: impl AsRef<Path>) -> Self {
        let b = base.as_ref();
        let fix = |p: &PathBuf| if p.is_absolute() { p.clone() } else { b.join(p) };
        Self {
            prices: fix(&self.prices),
            shares: fix(&self.shares),
            roa: fix(&self.roa),
            factors: fix(&self.factors),
        }
    }
}

/// Daily factor returns in decimals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FactorTable {
    pub mkt_rf: Vec<f64>,
    pub smb: Vec<f64>,
    pub hml: Vec<f64>,
    pub rf: Vec<f64>,
}

/// Aligned panel; every matrix is `tickers.len() × dates.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub prices: SeriesMatrix,
    pub shares: SeriesMatrix,
    /// Already multiplied by the ROA scale.
    pub roa: SeriesMatrix,
    pub factors: FactorTable,
}

impl Panel {
    pub fn n(&self) -> usize {
        self.tickers.len()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn caps(&self) -> SeriesMatrix {
        let data = self
            .prices
            .as_slice()
            .iter()
            .zip(self.shares.as_slice())
            .map(|(p, s)| p * s)
            .collect();
        SeriesMatrix::from_raw(self.n(), self.len(), data).expect("aligned panel")
    }

    pub fn strategy_inputs(&self) -> StrategyInputs {
        StrategyInputs {
            caps: self.caps(),
            roa: Some(self.roa.clone()),
        }
    }

    /// Factor returns over the holding periods `(t−1, t]`, `t = 1..T`.
    pub fn holding_period_factors(&self) -> FactorSeries {
        FactorSeries {
            smb: self.factors.smb[1..].to_vec(),
            hml: self.factors.hml[1..].to_vec(),
            rf: self.factors.rf[1..].to_vec(),
        }
    }

    pub fn date_strings(&self) -> Vec<String> {
        self.dates.iter().map(|d| d.format(DATE_FORMAT).to_string()).collect()
    }
}

#[derive(Debug, Deserialize)]
struct LongRow {
    date: String,
    ticker: String,
    value: f64,
}

#[derive(Debug, Deserialize)]
struct FactorRow {
    date: String,
    mkt_rf: f64,
    smb: f64,
    hml: f64,
    rf: f64,
}

fn parse_date(s: &str, file: &Path) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT)
        .map_err(|e| SptError::Data(format!("{}: bad date `{s}`: {e}", file.display())))
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| SptError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f))
}

type LongTable = BTreeMap<String, BTreeMap<NaiveDate, f64>>;

fn read_long(path: &Path) -> Result<LongTable> {
    let mut out = LongTable::new();
    for row in open(path)?.deserialize() {
        let row: LongRow = row.map_err(|e| SptError::Data(format!("{}: {e}", path.display())))?;
        let date = parse_date(&row.date, path)?;
        if !row.value.is_finite() {
            return Err(SptError::Data(format!(
                "{}: non-finite value for {} on {}",
                path.display(),
                row.ticker,
                row.date
            )));
        }
        if out.entry(row.ticker.clone()).or_default().insert(date, row.value).is_some() {
            return Err(SptError::Data(format!(
                "{}: duplicate entry for {} on {}",
                path.display(),
                row.ticker,
                row.date
            )));
        }
    }
    Ok(out)
}

fn read_factors(path: &Path) -> Result<BTreeMap<NaiveDate, [f64; 4]>> {
    let mut out = BTreeMap::new();
    for row in open(path)?.deserialize() {
        let row: FactorRow = row.map_err(|e| SptError::Data(format!("{}: {e}", path.display())))?;
        let date = parse_date(&row.date, path)?;
        let vals = [row.mkt_rf, row.smb, row.hml, row.rf];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(SptError::Data(format!("{}: non-finite factor on {}", path.display(), row.date)));
        }
        if out.insert(date, vals).is_some() {
            return Err(SptError::Data(format!("{}: duplicate date {}", path.display(), row.date)));
        }
    }
    Ok(out)
}

/// Last report dated on or before each panel date.
fn carry_forward(reports: &BTreeMap<NaiveDate, f64>, dates: &[NaiveDate], ticker: &str, what: &str) -> Result<Vec<f64>> {
    dates
        .iter()
        .map(|d| {
            reports.range(..=*d).next_back().map(|(_, v)| *v).ok_or_else(|| {
                SptError::Data(format!(
                    "{what} for ticker {ticker} has no report on or before {}; cannot carry forward",
                    d.format(DATE_FORMAT)
                ))
            })
        })
        .collect()
}

/// Loads and aligns the four files. Panel dates are the days on which every
/// ticker has a price and a factor row exists.
pub fn load_panel(files: &PanelFiles, roa_scale: f64) -> Result<Panel> {
    if !(roa_scale.is_finite() && roa_scale > 0.0) {
        return Err(SptError::param("roa_scale", format!("{roa_scale} must be positive")));
    }
    let prices = read_long(&files.prices)?;
    let shares = read_long(&files.shares)?;
    let roa = read_long(&files.roa)?;
    let factors = read_factors(&files.factors)?;

    let tickers: Vec<String> = prices.keys().cloned().collect();
    if tickers.len() < 2 {
        return Err(SptError::Data(format!(
            "{}: need at least 2 tickers, found {}",
            files.prices.display(),
            tickers.len()
        )));
    }
    for (what, table, file) in [("shares", &shares, &files.shares), ("ROA", &roa, &files.roa)] {
        if let Some(t) = tickers.iter().find(|t| !table.contains_key(*t)) {
            return Err(SptError::Data(format!("{}: missing {what} for ticker {t}", file.display())));
        }
    }

    let mut common: BTreeSet<NaiveDate> = factors.keys().copied().collect();
    for series in prices.values() {
        common.retain(|d| series.contains_key(d));
    }
    let dates: Vec<NaiveDate> = common.into_iter().collect();
    if dates.len() < 2 {
        return Err(SptError::Data(format!(
            "price and factor files share {} common dates; need at least 2",
            dates.len()
        )));
    }

    let n = tickers.len();
    let len = dates.len();
    let mut price_m = SeriesMatrix::zeros(n, len);
    let mut share_m = SeriesMatrix::zeros(n, len);
    let mut roa_m = SeriesMatrix::zeros(n, len);
    for (i, t) in tickers.iter().enumerate() {
        for (j, d) in dates.iter().enumerate() {
            let p = prices[t][d];
            if p <= 0.0 {
                return Err(SptError::Data(format!(
                    "non-positive price {p} for {t} on {}",
                    d.format(DATE_FORMAT)
                )));
            }
            price_m.set(i, j, p);
        }
        for (j, v) in carry_forward(&shares[t], &dates, t, "shares")?.into_iter().enumerate() {
            if v <= 0.0 {
                return Err(SptError::Data(format!(
                    "non-positive shares {v} for {t} on {}",
                    dates[j].format(DATE_FORMAT)
                )));
            }
            share_m.set(i, j, v);
        }
        for (j, v) in carry_forward(&roa[t], &dates, t, "ROA")?.into_iter().enumerate() {
            roa_m.set(i, j, v * roa_scale);
        }
    }
    let mut ft = FactorTable::default();
    for d in &dates {
        let [m, s, h, r] = factors[d];
        ft.mkt_rf.push(m);
        ft.smb.push(s);
        ft.hml.push(h);
        ft.rf.push(r);
    }
    Ok(Panel {
        dates,
        tickers,
        prices: price_m,
        shares: share_m,
        roa: roa_m,
        factors: ft,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    struct Files {
        dir: tempfile::TempDir,
    }

    impl Files {
        fn new(prices: &str, shares: &str, roa: &str, factors: &str) -> Self {
            let dir = tempfile::tempdir().unwrap();
            fs::write(dir.path().join("prices.csv"), prices).unwrap();
            fs::write(dir.path().join("shares.csv"), shares).unwrap();
            fs::write(dir.path().join("roa.csv"), roa).unwrap();
            fs::write(dir.path().join("factors.csv"), factors).unwrap();
            Self { dir }
        }

        fn load(&self) -> Result<Panel> {
            load_panel(&PanelFiles::in_dir(self.dir.path()), DEFAULT_ROA_SCALE)
        }
    }

    const FACTORS: &str = "date,mkt_rf,smb,hml,rf\n\
        2020-01-02,0.01,0.001,-0.001,0.0001\n\
        2020-01-03,-0.02,0.002,0.000,0.0001\n\
        2020-01-06,0.005,-0.001,0.003,0.0001\n";

    const PRICES: &str = "date,ticker,value\n\
        2020-01-02,AAA,10\n2020-01-02,BBB,20\n\
        2020-01-03,AAA,11\n2020-01-03,BBB,19\n\
        2020-01-06,AAA,12\n2020-01-06,BBB,21\n";

    #[test]
    fn carries_sparse_reports_forward() {
        let f = Files::new(
            PRICES,
            "date,ticker,value\n2020-01-02,AAA,100\n2020-01-02,BBB,50\n",
            "date,ticker,value\n2019-12-31,AAA,0.05\n2019-12-31,BBB,0.02\n2020-01-03,AAA,0.07\n2020-01-07,BBB,0.9\n",
            FACTORS,
        );
        let p = f.load().unwrap();
        assert_eq!(p.tickers, vec!["AAA", "BBB"]);
        assert_eq!(p.len(), 3);
        assert_eq!(p.shares.row(0), vec![100.0; 3]);
        assert_eq!(p.shares.row(1), vec![50.0; 3]);
        // 2020-01-07 lies after the panel: never used.
        assert_eq!(p.roa.row(1), vec![0.2; 3]);
        let r = p.roa.row(0);
        assert!((r[0] - 0.5).abs() < 1e-15 && (r[1] - 0.7).abs() < 1e-15 && (r[2] - 0.7).abs() < 1e-15);
        assert_eq!(p.caps().column(1), &[1100.0, 950.0]);
        assert_eq!(p.factors.rf.len(), 3);
        assert_eq!(p.holding_period_factors().smb, vec![0.002, -0.001]);
        assert_eq!(f.load().unwrap(), p);
    }

    #[test]
    fn single_ticker_rejected() {
        let f = Files::new(
            "date,ticker,value\n2020-01-02,AAA,1\n2020-01-03,AAA,1\n2020-01-06,AAA,1\n",
            "date,ticker,value\n2020-01-02,AAA,1\n",
            "date,ticker,value\n2020-01-02,AAA,0.1\n",
            FACTORS,
        );
        assert!(matches!(f.load(), Err(SptError::Data(m)) if m.contains("at least 2 tickers")));
    }

    #[test]
    fn disjoint_ranges_leave_no_dates() {
        let f = Files::new(
            "date,ticker,value\n2020-01-02,AAA,1\n2020-01-03,AAA,1\n2020-01-06,BBB,1\n",
            "date,ticker,value\n2020-01-01,AAA,1\n2020-01-01,BBB,1\n",
            "date,ticker,value\n2020-01-01,AAA,0.1\n2020-01-01,BBB,0.1\n",
            FACTORS,
        );
        assert!(matches!(f.load(), Err(SptError::Data(m)) if m.contains("common dates")));
    }

    #[test]
    fn late_first_report_names_the_ticker() {
        let f = Files::new(
            PRICES,
            "date,ticker,value\n2020-01-02,AAA,100\n2020-01-03,BBB,50\n",
            "date,ticker,value\n2020-01-02,AAA,0.05\n2020-01-02,BBB,0.02\n",
            FACTORS,
        );
        assert!(matches!(f.load(), Err(SptError::Data(m)) if m.contains("BBB") && m.contains("2020-01-02")));
    }

    #[test]
    fn input_errors() {
        let missing = Files::new(
            PRICES,
            "date,ticker,value\n2020-01-02,AAA,100\n",
            "date,ticker,value\n2020-01-02,AAA,0.05\n2020-01-02,BBB,0.02\n",
            FACTORS,
        );
        assert!(matches!(missing.load(), Err(SptError::Data(m)) if m.contains("missing shares for ticker BBB")));

        let negative = Files::new(
            &PRICES.replace("2020-01-03,BBB,19", "2020-01-03,BBB,-19"),
            "date,ticker,value\n2020-01-02,AAA,100\n2020-01-02,BBB,5\n",
            "date,ticker,value\n2020-01-02,AAA,0.05\n2020-01-02,BBB,0.02\n",
            FACTORS,
        );
        assert!(matches!(negative.load(), Err(SptError::Data(m)) if m.contains("non-positive price")));

        let bad_header = Files::new(
            "day,ticker,value\n2020-01-02,AAA,1\n",
            "date,ticker,value\n",
            "date,ticker,value\n",
            FACTORS,
        );
        assert!(bad_header.load().is_err());

        let dup = Files::new(
            &format!("{PRICES}2020-01-06,BBB,22\n"),
            "date,ticker,value\n2020-01-02,AAA,100\n2020-01-02,BBB,5\n",
            "date,ticker,value\n2020-01-02,AAA,0.05\n2020-01-02,BBB,0.02\n",
            FACTORS,
        );
        assert!(matches!(dup.load(), Err(SptError::Data(m)) if m.contains("duplicate")));
        assert!(load_panel(&PanelFiles::in_dir("/nonexistent/dir"), 10.0).is_err());
    }

    #[test]
    fn dates_missing_for_one_ticker_are_dropped() {
        let f = Files::new(
            &PRICES.replace("2020-01-03,BBB,19\n", ""),
            "date,ticker,value\n2020-01-02,AAA,100\n2020-01-02,BBB,5\n",
            "date,ticker,value\n2020-01-02,AAA,0.05\n2020-01-02,BBB,0.02\n",
            FACTORS,
        );
        let p = f.load().unwrap();
        assert_eq!(p.date_strings(), vec!["2020-01-02", "2020-01-06"]);
    }
}
