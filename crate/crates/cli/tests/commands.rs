use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use spt_cli::commands::{cmd_backtest, cmd_generate_panel, cmd_report, cmd_simulate, cmd_verify};
use spt_cli::config::{RunConfig, VerifyConfig};
use spt_core::backtest::CostModel;
use spt_core::generating_functions::GenConfig;
use spt_core::market_sim::MarketModel;

fn spt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spt"))
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_smoke_run_is_fast_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();
    let start = Instant::now();
    let summary = cmd_simulate(&cfg, &dir.path().join("a")).unwrap();
    assert!(start.elapsed().as_secs_f64() < 10.0, "took {:?}", start.elapsed());
    assert_eq!(summary.paths.len(), 100);
    assert_eq!(summary.grid.n_steps, 1000);
    // VSM excess growth is (n-1)/2 = 2 for every path.
    assert!((summary.mean_excess_growth - 2.0).abs() < 0.05, "{}", summary.mean_excess_growth);
    assert!(summary.min_weight > 0.0);

    cmd_simulate(&cfg, &dir.path().join("b")).unwrap();
    let a = read_tree(&dir.path().join("a"));
    assert_eq!(a.len(), 101);
    assert_eq!(a, read_tree(&dir.path().join("b")));

    let mut other = cfg.clone();
    other.seed += 1;
    cmd_simulate(&other, &dir.path().join("c")).unwrap();
    assert_ne!(a, read_tree(&dir.path().join("c")));
}

#[test]
fn zero_noise_paths_are_constant() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.market.n = 3;
    cfg.market.model = MarketModel::ConstantLogDiffusion {
        gamma: vec![0.0; 3],
        xi: vec![vec![0.0; 3]; 3],
    };
    cfg.market.initial_prices = Some(vec![1.0, 2.0, 3.0]);
    cfg.grid.paths = 2;
    cfg.grid.dt = 0.01;
    let s = cmd_simulate(&cfg, dir.path()).unwrap();
    assert_eq!(s.mean_excess_growth, 0.0);
    let csv = fs::read_to_string(dir.path().join("paths/path_0001.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 101);
    for r in &rows {
        let prices: Vec<&str> = r.split(',').skip(1).collect();
        assert_eq!(prices, vec!["1", "2", "3"], "{r}");
    }
}

/// Three stocks, eight days, shares fixed.
fn write_small_panel(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    let days = [
        "2020-01-02", "2020-01-03", "2020-01-06", "2020-01-07", "2020-01-08", "2020-01-09", "2020-01-10", "2020-01-13",
    ];
    let px = [
        [10.0, 20.0, 5.0],
        [10.5, 19.0, 5.2],
        [10.2, 19.5, 5.5],
        [11.0, 19.9, 5.1],
        [10.7, 20.4, 5.3],
        [10.9, 20.1, 5.6],
        [11.4, 20.8, 5.2],
        [11.3, 21.0, 5.0],
    ];
    let mut prices = String::from("date,ticker,value\n");
    for (d, row) in days.iter().zip(&px) {
        for (t, p) in ["AAA", "BBB", "CCC"].iter().zip(row) {
            prices.push_str(&format!("{d},{t},{p}\n"));
        }
    }
    fs::write(dir.join("prices.csv"), prices).unwrap();
    fs::write(dir.join("shares.csv"), "date,ticker,value\n2020-01-02,AAA,100\n2020-01-02,BBB,30\n2020-01-02,CCC,400\n").unwrap();
    fs::write(dir.join("roa.csv"), "date,ticker,value\n2020-01-02,AAA,0.05\n2020-01-02,BBB,-0.02\n2020-01-02,CCC,0.12\n").unwrap();
    let mut f = String::from("date,mkt_rf,smb,hml,rf\n");
    let smb = [0.0, 0.003, -0.001, 0.002, -0.004, 0.001, 0.0, 0.002];
    let hml = [0.0, -0.002, 0.001, 0.004, 0.0, -0.003, 0.002, -0.001];
    for (k, d) in days.iter().enumerate() {
        f.push_str(&format!("{d},0.0,{},{},0.0001\n", smb[k], hml[k]));
    }
    fs::write(dir.join("factors.csv"), f).unwrap();
}

#[test]
fn market_backtest_without_costs_tracks_total_capitalization() {
    let dir = tempfile::tempdir().unwrap();
    write_small_panel(&dir.path().join("panel"));
    let mut cfg = RunConfig::default();
    cfg.data.dir = dir.path().join("panel");
    cfg.costs = CostModel::free();
    cfg.strategies = vec![GenConfig::Entropy { c: 0.1 }];
    let (doc, paths) = cmd_backtest(&cfg, &dir.path().join("out")).unwrap();
    // market is added in front
    assert_eq!(doc.strategies[0].strategy, "market");
    assert_eq!(doc.strategies[1].strategy, "entropy");
    let m = &doc.strategies[0];
    let cap0 = 10.0 * 100.0 + 20.0 * 30.0 + 5.0 * 400.0;
    let cap_end = 11.3 * 100.0 + 21.0 * 30.0 + 5.0 * 400.0;
    assert!((m.terminal_value - cap_end / cap0).abs() < 1e-14);
    assert_eq!(m.info_ratio, None);
    assert_eq!(m.mean_short, 0.0);
    // Only the day-0 entry trades; afterwards the weights drift with prices.
    assert!((m.ann_turnover - 252.0 / 7.0).abs() < 1e-9, "{}", m.ann_turnover);

    let tables = cmd_report(&paths.json).unwrap();
    assert_eq!(tables, fs::read_to_string(&paths.tables).unwrap());
    assert!(tables.contains("n/a"));
}

#[test]
fn repeated_strategies_get_distinct_names() {
    let dir = tempfile::tempdir().unwrap();
    write_small_panel(&dir.path().join("panel"));
    let mut cfg = RunConfig::default();
    cfg.data.dir = dir.path().join("panel");
    cfg.strategies = vec![GenConfig::Market, GenConfig::Entropy { c: 0.1 }, GenConfig::Entropy { c: 10.0 }];
    let (doc, _) = cmd_backtest(&cfg, &dir.path().join("out")).unwrap();
    let names: Vec<&str> = doc.strategies.iter().map(|s| s.strategy.as_str()).collect();
    assert_eq!(names, ["market", "entropy", "entropy_2"]);
}

#[test]
fn bundled_panel_matches_its_recipe() {
    let dir = tempfile::tempdir().unwrap();
    cmd_generate_panel(&RunConfig::default(), dir.path()).unwrap();
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic");
    assert_eq!(read_tree(dir.path()), read_tree(&bundled));
}

fn small_verify() -> VerifyConfig {
    VerifyConfig {
        paths: 8,
        arbitrage_paths: 8,
        beta_dt: 1e-3,
        beta_paths: 4,
        roa_paths: 4,
        invariance_draws: 10,
        multiplicative_draws: 10,
        gradient_samples: 20,
        ..VerifyConfig::default()
    }
}

#[test]
fn verify_writes_report_and_decomposition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        verify: small_verify(),
        ..RunConfig::default()
    };
    let report = cmd_verify(&cfg, dir.path()).unwrap();
    assert_eq!(report.checks.len(), 13);
    let grad = report.checks.iter().find(|c| c.id == "gradient_consistency").unwrap();
    assert!(grad.passed, "{}", grad.detail);
    let mult = report.checks.iter().find(|c| c.id == "multiplicative_invariance").unwrap();
    assert!(mult.passed, "{}", mult.detail);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(json["checks"].as_array().unwrap().len(), 13);
    let dec = fs::read_to_string(dir.path().join("decomposition.csv")).unwrap();
    assert_eq!(dec.lines().count(), 1 + 1001);
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let ok = write_config(dir.path(), "[grid]\nhorizon = 0.1\ndt = 0.01\npaths = 2\n");
    let out = spt().args(["simulate", "--config"]).arg(&ok).arg("--out").arg(dir.path().join("sim")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("sim/summary.json").exists());

    let bad = write_config(dir.path(), "[[strategies]]\nname = \"boosted_entropy\"\nc = 1.0\nalpha = 0.9\n");
    let out = spt().args(["simulate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    let out = spt().args(["report"]).arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = spt().arg("backtest").arg("--out").arg(dir.path().join("bt")).current_dir(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "no panel in the working directory");

    // No command anywhere.
    let out = spt().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verification_failure_exits_one() {
    // An entropy floor at the uniform entropy leaves no admissible path for
    // the reduced-entropy bound, so that check cannot pass.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[verify]\npaths = 4\narbitrage_paths = 4\nbeta_dt = 1e-3\nbeta_paths = 2\nroa_paths = 2\ngradient_samples = 10\nentropy_floor = 0.9999\n",
    );
    let out = spt().arg("verify").arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("v")).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL reduced_entropy_bound"), "{stdout}");
    assert!(stdout.contains("PASS gradient_consistency"), "{stdout}");
}

#[test]
fn out_dir_env_is_only_a_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nhorizon = 0.1\ndt = 0.05\npaths = 1\n");
    let out = spt()
        .arg("simulate")
        .arg("--config")
        .arg(&cfg)
        .env(spt_cli::OUT_DIR_ENV, dir.path().join("env"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("env/simulate/summary.json").exists());
    let out = spt()
        .arg("simulate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("flag"))
        .env(spt_cli::OUT_DIR_ENV, dir.path().join("env2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("flag/summary.json").exists());
    assert!(!dir.path().join("env2").exists());
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::load(&path).unwrap();
            cfg.validate().unwrap();
            assert!(cfg.command.is_some(), "{}", path.display());
            seen += 1;
        }
    }
    assert_eq!(seen, 3);
    let v = RunConfig::load(dir.join("verify.toml")).unwrap();
    assert_eq!(v.verify, VerifyConfig::default());
    let b = RunConfig::load(dir.join("backtest.toml")).unwrap();
    assert!(b.data.files().prices.exists());
    assert_eq!(b.strategies, RunConfig::default().strategies);
}
