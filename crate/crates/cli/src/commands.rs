use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use spt_core::backtest::{ff3_stats, performance_stats, run_backtest, BacktestRun, GeneratedRule};
use spt_core::data_io::{
    load_panel, read_report_json, render_tables, synthetic_panel, write_decomposition_csv,
    write_panel, write_report, PanelFiles, ReportDocument, ReportPaths, ReportPeriod,
};
use spt_core::generating_functions::GenConfig;
use spt_core::market_sim::{
    market_weights_path, realized_excess_growth, simulate_path, write_path_csv, MarketSpec, SimGrid,
};
use spt_core::SptError;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::suite::{run_verification, sample_decomposition, VerificationReport};

type Result<T> = std::result::Result<T, CliError>;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SptError::io(dir, e).into())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    // Through Value so map keys come out sorted.
    let mut s = serde_json::to_string_pretty(&serde_json::to_value(value).map_err(SptError::from)?).map_err(SptError::from)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| SptError::io(path, e).into())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub index: u64,
    /// Time average of the realized market excess growth rate.
    pub mean_excess_growth: f64,
    pub min_weight: f64,
    pub clamp_events: usize,
    pub refined_steps: usize,
    pub terminal_total_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub spec: MarketSpec,
    pub grid: SimGrid,
    pub mean_excess_growth: f64,
    pub min_weight: f64,
    pub clamp_events: usize,
    pub refined_steps: usize,
    pub paths: Vec<PathSummary>,
}

/// Simulates `grid.paths` paths, writing `paths/path_XXXX.csv` and
/// `summary.json` under `out`.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<SimulationSummary> {
    let spec = cfg.market.spec();
    let grid = SimGrid::new(cfg.grid.horizon, cfg.grid.dt, cfg.seed)?;
    let paths = (0..cfg.grid.paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_path(&spec, &grid, i, false)?;
            let mu = market_weights_path(&path);
            let gamma = realized_excess_growth(&path, &mu)?;
            let total = path.total_value();
            let summary = PathSummary {
                index: i,
                mean_excess_growth: gamma.iter().sum::<f64>() / gamma.len() as f64,
                min_weight: mu.matrix().as_slice().iter().copied().fold(f64::INFINITY, f64::min),
                clamp_events: path.clamp_events(),
                refined_steps: path.refined_steps(),
                terminal_total_value: total[total.len() - 1],
            };
            Ok((path, summary))
        })
        .collect::<spt_core::Result<Vec<_>>>()?;

    let dir = out.join("paths");
    create_dir(&dir)?;
    let mut summaries = Vec::with_capacity(paths.len());
    for (path, summary) in paths {
        let file = dir.join(format!("path_{:04}.csv", summary.index));
        let f = File::create(&file).map_err(|e| SptError::io(&file, e))?;
        write_path_csv(&path, BufWriter::new(f))?;
        summaries.push(summary);
    }
    let count = summaries.len() as f64;
    let summary = SimulationSummary {
        seed: cfg.seed,
        spec,
        grid,
        mean_excess_growth: summaries.iter().map(|s| s.mean_excess_growth).sum::<f64>() / count,
        min_weight: summaries.iter().map(|s| s.min_weight).fold(f64::INFINITY, f64::min),
        clamp_events: summaries.iter().map(|s| s.clamp_events).sum(),
        refined_steps: summaries.iter().map(|s| s.refined_steps).sum(),
        paths: summaries,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Runs the property suite; writes `verify.json` and one path's
/// `decomposition.csv`.
pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<VerificationReport> {
    let report = run_verification(&cfg.verify, cfg.seed)?;
    create_dir(out)?;
    write_json(&out.join("verify.json"), &report)?;
    let v = &cfg.verify;
    let dec = sample_decomposition(
        &v.vsm(1, v.dt, cfg.seed),
        v.refinement_horizon,
        1.0,
        v.entropy_floor * (v.n as f64).ln(),
    )?;
    write_decomposition_csv(out.join("decomposition.csv"), &dec)?;
    Ok(report)
}

/// Unique report names: repeated labels get a numeric suffix.
fn strategy_names(strategies: &[GenConfig]) -> Vec<String> {
    let mut names: Vec<String> = Vec::with_capacity(strategies.len());
    for s in strategies {
        let base = s.label();
        let mut name = base.clone();
        let mut k = 2;
        while names.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        names.push(name);
    }
    names
}

/// Backtests every configured strategy on the panel and writes
/// `report.json`, `tables.txt` and `wealth.csv`. The market portfolio is
/// always run since every statistic is relative to it.
pub fn cmd_backtest(cfg: &RunConfig, out: &Path) -> Result<(ReportDocument, ReportPaths)> {
    let panel = load_panel(&cfg.data.files(), cfg.data.roa_scale)?;
    let inputs = panel.strategy_inputs();
    let mut strategies = cfg.strategies.clone();
    if !strategies.contains(&GenConfig::Market) {
        strategies.insert(0, GenConfig::Market);
    }
    let names = strategy_names(&strategies);
    let runs: Vec<BacktestRun> = strategies
        .par_iter()
        .zip(&names)
        .map(|(s, name)| {
            let mut rule = GeneratedRule::new(s, &inputs)?.with_name(name.clone());
            run_backtest(&panel.prices, &mut rule, cfg.costs)
        })
        .collect::<spt_core::Result<_>>()?;
    let market = &runs[strategies.iter().position(|s| *s == GenConfig::Market).expect("inserted above")];

    let factors = panel.holding_period_factors();
    let reports = runs
        .iter()
        .map(|run| {
            let mut r = performance_stats(run, market, &factors.rf)?;
            r.ff3 = match ff3_stats(run, market, &factors) {
                Ok(f) => Some(f),
                // e.g. a factor column that never moves
                Err(SptError::SingularDesign { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(r)
        })
        .collect::<spt_core::Result<Vec<_>>>()?;

    let dates = panel.date_strings();
    let mut doc = ReportDocument::new(reports);
    doc.period = Some(ReportPeriod {
        first: dates[0].clone(),
        last: dates[dates.len() - 1].clone(),
        days: dates.len(),
    });
    doc.universe = panel.tickers.clone();
    doc.costs = Some(cfg.costs);
    let paths = write_report(&doc, &runs, &dates, out)?;
    Ok((doc, paths))
}

/// Re-renders the tables of an existing `report.json`.
pub fn cmd_report(report: &Path) -> Result<String> {
    let doc = read_report_json(report)?;
    Ok(render_tables(&doc))
}

/// Writes the bundled synthetic panel.
pub fn cmd_generate_panel(cfg: &RunConfig, out: &Path) -> Result<PanelFiles> {
    let panel = synthetic_panel(&cfg.synthetic)?;
    Ok(write_panel(out, &panel, cfg.synthetic.roa_scale)?)
}

/// Report file inside a run directory.
pub fn report_path(dir: &Path) -> PathBuf {
    dir.join("report.json")
}

/// One line per check.
pub fn print_checks(report: &VerificationReport, mut w: impl Write) -> std::io::Result<()> {
    for c in &report.checks {
        writeln!(w, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.detail)?;
    }
    Ok(())
}
