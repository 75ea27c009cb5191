use std::fs;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{FactorTable, Panel, PanelFiles, DATE_FORMAT};
use crate::characteristics::{synthetic_roa, RoaSpec};
use crate::error::{Result, SptError};
use crate::market_sim::{simulate_path, MarketModel, MarketSpec, SimGrid};
use crate::matrix::SeriesMatrix;
use crate::rng::{path_rng, StreamDomain};

/// Subtracted from the bounded model ROA.
const ROA_SHIFT: f64 = 1.0;

/// Recipe for the bundled synthetic panel: capitalizations follow a
/// one-factor log-normal market on a daily grid, ROA comes from the bounded
/// ROA diffusion, and shares and ROA are reported quarterly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPanelSpec {
    pub n: usize,
    /// Trading days including the first.
    pub days: usize,
    pub seed: u64,
    pub start: String,
    /// Annual volatility of the common factor.
    pub market_vol: f64,
    /// Annual idiosyncratic volatility.
    pub idio_vol: f64,
    /// Annual log drift.
    pub drift: f64,
    pub report_every: usize,
    pub risk_free: f64,
    /// Stored ROA is the simulated value divided by this.
    pub roa_scale: f64,
}

impl Default for SyntheticPanelSpec {
    fn default() -> Self {
        Self {
            n: 10,
            days: 756,
            seed: 20060103,
            start: "2010-01-04".into(),
            market_vol: 0.16,
            idio_vol: 0.22,
            drift: 0.06,
            report_every: 63,
            risk_free: 0.02,
            roa_scale: super::DEFAULT_ROA_SCALE,
        }
    }
}

impl SyntheticPanelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.days < 3 {
            return Err(SptError::param("n/days", "need n >= 2 and days >= 3"));
        }
        if self.report_every == 0 {
            return Err(SptError::param("report_every", "must be positive"));
        }
        for (name, v) in [
            ("market_vol", self.market_vol),
            ("idio_vol", self.idio_vol),
            ("roa_scale", self.roa_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SptError::param(name, format!("{v} must be >= 0")));
            }
        }
        if self.roa_scale == 0.0 {
            return Err(SptError::param("roa_scale", "must be positive"));
        }
        NaiveDate::parse_from_str(&self.start, DATE_FORMAT)
            .map_err(|e| SptError::param("start", format!("`{}`: {e}", self.start)))?;
        Ok(())
    }
}

fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// Mean of `r` over the lower half of `key` minus the mean over the upper half.
fn long_short(r: &[f64], mut key: Vec<(f64, usize)>) -> f64 {
    key.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let half = key.len() / 2;
    let avg = |s: &[(f64, usize)]| s.iter().map(|(_, i)| r[*i]).sum::<f64>() / s.len() as f64;
    avg(&key[..half]) - avg(&key[key.len() - half..])
}

/// Deterministic panel in the loader's aligned form (ROA already scaled up).
pub fn synthetic_panel(spec: &SyntheticPanelSpec) -> Result<Panel> {
    spec.validate()?;
    let n = spec.n;
    let steps = spec.days - 1;
    let dt = 1.0 / crate::backtest::TRADING_DAYS;
    let grid = SimGrid::with_steps(steps as f64 * dt, steps, spec.seed)?;

    // Common factor = normalized sum of the n Brownian coordinates.
    let root_n = (n as f64).sqrt();
    let xi: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let load = 0.7 + 0.6 * i as f64 / (n - 1) as f64;
            (0..n)
                .map(|j| load * spec.market_vol / root_n + if i == j { spec.idio_vol } else { 0.0 })
                .collect()
        })
        .collect();
    let market = MarketSpec {
        n,
        model: MarketModel::ConstantLogDiffusion {
            gamma: (0..n).map(|i| spec.drift + 0.01 * (i % 3) as f64).collect(),
            xi,
        },
        initial_prices: (0..n).map(|i| 400.0 * (-0.35 * i as f64).exp()).collect(),
    };
    let caps_path = simulate_path(&market, &grid, 0, false)?;
    let caps = caps_path.prices();

    let delta = 0.5 / n as f64;
    let eta = 0.5;
    // Wide, and shifted below so loss makers appear (as in observed panels);
    // that is what pushes the overlay short on the weakest names.
    let varsigma = 3.0;
    let roa_spec = RoaSpec {
        varsigma,
        eta,
        delta,
        a_shift: 0.0,
        epsilon: 0.25 * delta * (-varsigma).exp() * eta,
        ..RoaSpec::default()
    };
    let roa_path = synthetic_roa(&roa_spec, &grid, n, 0)?;

    let mut rng = path_rng(spec.seed, StreamDomain::Characteristics, 1);
    let mut shares_now: Vec<f64> = (0..n).map(|i| caps.get(i, 0) / (20.0 + 15.0 * i as f64)).collect();
    let mut roa_now: Vec<f64> = roa_path.column(0).iter().map(|r| r - ROA_SHIFT).collect();
    let mut prices = SeriesMatrix::with_capacity(n, spec.days);
    let mut shares = SeriesMatrix::with_capacity(n, spec.days);
    let mut roa = SeriesMatrix::with_capacity(n, spec.days);
    for t in 0..spec.days {
        if t > 0 && t % spec.report_every == 0 {
            for s in shares_now.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *s *= (0.01 * z).exp();
            }
            roa_now.copy_from_slice(roa_path.column(t));
            roa_now.iter_mut().for_each(|r| *r -= ROA_SHIFT);
        }
        let p: Vec<f64> = (0..n).map(|i| caps.get(i, t) / shares_now[i]).collect();
        prices.push_column(&p)?;
        shares.push_column(&shares_now)?;
        roa.push_column(&roa_now)?;
    }

    let rf_daily = spec.risk_free / crate::backtest::TRADING_DAYS;
    let mut factors = FactorTable {
        mkt_rf: vec![0.0],
        smb: vec![0.0],
        hml: vec![0.0],
        rf: vec![rf_daily],
    };
    for t in 1..spec.days {
        let r: Vec<f64> = (0..n).map(|i| prices.get(i, t) / prices.get(i, t - 1) - 1.0).collect();
        let cap_prev: Vec<f64> = (0..n).map(|i| prices.get(i, t - 1) * shares.get(i, t - 1)).collect();
        let total: f64 = cap_prev.iter().sum();
        let mkt: f64 = (0..n).map(|i| cap_prev[i] / total * r[i]).sum();
        factors.mkt_rf.push(mkt - rf_daily);
        factors.smb.push(long_short(&r, cap_prev.iter().copied().zip(0..n).collect()));
        // Value proxy: low-ROA names minus high-ROA names.
        factors.hml.push(long_short(&r, roa.column(t - 1).iter().copied().zip(0..n).collect()));
        factors.rf.push(rf_daily);
    }

    let start = NaiveDate::parse_from_str(&spec.start, DATE_FORMAT).expect("validated");
    Ok(Panel {
        dates: business_days(start, spec.days),
        tickers: (1..=n).map(|i| format!("S{i:02}")).collect(),
        prices,
        shares,
        roa,
        factors,
    })
}

fn write_long(path: &Path, panel: &Panel, m: &SeriesMatrix, scale: f64, sparse: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "ticker", "value"])?;
    let dates = panel.date_strings();
    for (t, d) in dates.iter().enumerate() {
        for (i, tk) in panel.tickers.iter().enumerate() {
            let v = m.get(i, t);
            if sparse && t > 0 && v == m.get(i, t - 1) {
                continue;
            }
            w.write_record([d.as_str(), tk.as_str(), &(v / scale).to_string()])?;
        }
    }
    w.flush().map_err(|e| SptError::io(path, e))?;
    Ok(())
}

/// Writes the panel as the four loader CSVs; shares and ROA only on days
/// where they change. ROA is divided by `roa_scale` on the way out.
pub fn write_panel(dir: impl AsRef<Path>, panel: &Panel, roa_scale: f64) -> Result<PanelFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| SptError::io(dir, e))?;
    let files = PanelFiles::in_dir(dir);
    write_long(&files.prices, panel, &panel.prices, 1.0, false)?;
    write_long(&files.shares, panel, &panel.shares, 1.0, true)?;
    write_long(&files.roa, panel, &panel.roa, roa_scale, true)?;
    let mut w = csv::Writer::from_path(&files.factors)?;
    w.write_record(["date", "mkt_rf", "smb", "hml", "rf"])?;
    let f = &panel.factors;
    for (t, d) in panel.date_strings().iter().enumerate() {
        w.write_record([
            d.clone(),
            f.mkt_rf[t].to_string(),
            f.smb[t].to_string(),
            f.hml[t].to_string(),
            f.rf[t].to_string(),
        ])?;
    }
    w.flush().map_err(|e| SptError::io(&files.factors, e))?;
    Ok(files)
}
