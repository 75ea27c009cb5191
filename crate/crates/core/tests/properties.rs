//! Randomized invariants across the public API.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use spt_core::backtest::{run_backtest, CostModel, GeneratedRule};
use spt_core::characteristics::realized_betas;
use spt_core::data_io::{load_panel, synthetic_panel, write_panel, PanelFiles, SyntheticPanelSpec};
use spt_core::decomposition::{
    arbitrage_time, decompose_generated, ArbitrageBoundSpec, ArbitrageKind, Covariation, Upsilon,
};
use spt_core::generating_functions::{
    classical_weights, generalized_weights, BetaGenFun, BoostedEntropy, CharDim, Entropy, ExpFactor, GenConfig,
    GeneratingFunction, GeometricMean, Multiplicative, ReducedEntropy, RoaGenFun,
};
use spt_core::linalg::check_psd_kernel;
use spt_core::market_sim::{
    excess_growth_direct, excess_growth_via_reference, market_weights_path, model_covariance, relative_covariance,
    simulate_path, MarketPath, MarketSpec, SimGrid,
};

fn interior(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.02f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn psd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |a| {
        let a = DMatrix::from_vec(n, n, a);
        &a * a.transpose()
    })
}

fn vsm_path(n: usize, alpha: f64, steps: usize, seed: u64, index: u64) -> MarketPath {
    let grid = SimGrid::with_steps(0.05, steps, seed).unwrap();
    simulate_path(&MarketSpec::volatility_stabilized(n, alpha), &grid, index, false).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulated_weights_stay_in_the_open_simplex(
        n in 2usize..6, alpha in 0.5f64..2.0, seed in any::<u64>(), index in 0u64..1000,
    ) {
        let path = vsm_path(n, alpha, 50, seed, index);
        let mu = market_weights_path(&path);
        for t in 0..mu.len() {
            let col = mu.column(t);
            prop_assert!((col.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(col.iter().all(|m| *m > 0.0 && *m < 1.0));
        }
    }

    #[test]
    fn simulation_depends_only_on_seed_and_index(seed in any::<u64>(), index in 0u64..1000) {
        let a = vsm_path(3, 1.0, 30, seed, index);
        let b = vsm_path(3, 1.0, 30, seed, index);
        prop_assert_eq!(a.prices().as_slice(), b.prices().as_slice());
        let other = vsm_path(3, 1.0, 30, seed, index + 1);
        prop_assert_ne!(a.prices().as_slice(), other.prices().as_slice());
    }

    #[test]
    fn relative_covariance_is_psd_with_reference_in_kernel(sigma in psd(5), w in interior(5)) {
        let tau = relative_covariance(&sigma, &w).unwrap();
        let check = check_psd_kernel(&tau, &w, 1e-10);
        prop_assert!(check.passed, "{check:?}");
    }

    #[test]
    fn excess_growth_ignores_the_reference(
        sigma in psd(4), pi in interior(4), z1 in interior(4), z2 in interior(4), z3 in interior(4),
    ) {
        let direct = excess_growth_direct(&sigma, &pi).unwrap();
        prop_assert!(direct >= -1e-12);
        for zeta in [&z1, &z2, &z3, &pi] {
            let via = excess_growth_via_reference(&sigma, &pi, zeta).unwrap();
            prop_assert!((via - direct).abs() <= 1e-10, "{via} vs {direct}");
        }
    }

    #[test]
    fn generated_weights_sum_to_one_and_long_only_stays_positive(
        mu in interior(4), betas in prop::collection::vec(0.0f64..5.0, 4), roa in prop::collection::vec(0.01f64..2.99, 4),
        c in 0.01f64..5.0, t in 0.0f64..10.0,
    ) {
        let cases: Vec<(Arc<dyn GeneratingFunction>, Vec<f64>)> = vec![
            (Arc::new(Entropy::new(c).unwrap()), vec![]),
            (Arc::new(GeometricMean::new()), vec![]),
            (Arc::new(ReducedEntropy::new(c, 0.1).unwrap()), vec![t]),
            (Arc::new(BoostedEntropy::new(c, 0.3).unwrap()), vec![t]),
            (Arc::new(BetaGenFun::new(1e-4, c, 0.7).unwrap()), betas.clone()),
            (Arc::new(RoaGenFun::new(3.0).unwrap()), roa.clone()),
        ];
        for (s, p) in &cases {
            let w = generalized_weights(s.as_ref(), &mu, p).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "{}", s.name());
            prop_assert!(w.iter().all(|v| *v > 0.0), "{} {w:?}", s.name());
        }
    }

    #[test]
    fn classical_and_generalized_agree_without_characteristics(mu in interior(5), c in 0.01f64..5.0) {
        let s = Entropy::new(c).unwrap();
        prop_assert_eq!(classical_weights(&s, &mu).unwrap(), generalized_weights(&s, &mu, &[]).unwrap());
    }

    #[test]
    fn multiplicative_weights_ignore_characteristics(
        mu in interior(3), y1 in prop::collection::vec(-3.0f64..3.0, 3), y2 in prop::collection::vec(-3.0f64..3.0, 3),
        rate in -2.0f64..2.0,
    ) {
        let s = Multiplicative::new(
            Arc::new(Entropy::new(0.5).unwrap()),
            Arc::new(ExpFactor::new(rate, CharDim::PerStock).unwrap()),
        ).unwrap();
        let a = generalized_weights(&s, &mu, &y1).unwrap();
        let b = generalized_weights(&s, &mu, &y2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-14, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn reduced_entropy_horizon_is_shorter(c in 0.01f64..50.0, n in 2usize..20, eps_frac in 0.0f64..0.99) {
        let mu0 = vec![1.0 / n as f64; n];
        let s0: f64 = -mu0.iter().map(|m| m * m.ln()).sum::<f64>();
        let mut spec = ArbitrageBoundSpec::new(Upsilon::volatility_stabilized(n), n);
        spec.c = Some(c);
        spec.epsilon = Some(eps_frac * s0);
        let full = arbitrage_time(ArbitrageKind::EntropyTstar, &spec, s0).unwrap();
        let reduced = arbitrage_time(ArbitrageKind::ReducedTtilde, &spec, s0).unwrap();
        prop_assert!(reduced < full, "{reduced} >= {full}");
    }

    #[test]
    fn betas_add_over_subintervals(seed in any::<u64>(), split in 1usize..40) {
        let path = vsm_path(3, 1.0, 40, seed, 0);
        let betas = realized_betas(&path);
        let prices = path.prices();
        let total = path.total_value();
        let end = path.len() - 1;
        for i in 0..3 {
            let tail: f64 = (split + 1..=end)
                .map(|t| (prices.get(i, t) - prices.get(i, t - 1)) * (total[t] - total[t - 1]))
                .sum();
            let whole = betas.get(i, end);
            prop_assert!((betas.get(i, split) + tail - whole).abs() <= 1e-12 * (1.0 + whole.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn decomposition_terms_account_for_the_relative_value(seed in any::<u64>(), c in 0.1f64..5.0) {
        let path = vsm_path(4, 1.0, 200, seed, 0);
        let (_, dec) = decompose_generated(&path, None, &Entropy::new(c).unwrap(), Covariation::Realized).unwrap();
        for t in 0..dec.len() {
            let rebuilt = dec.log_s_change[t] - dec.stoch_integral[t] + dec.drift_theta[t] + dec.residual[t];
            prop_assert!((rebuilt - dec.lhs[t]).abs() <= 1e-12 * (1.0 + dec.lhs[t].abs()));
        }
    }

    #[test]
    fn concave_functions_have_nondecreasing_market_drift(seed in any::<u64>(), c in 0.1f64..5.0) {
        let spec = MarketSpec::volatility_stabilized(4, 1.0);
        let path = simulate_path(&spec, &SimGrid::with_steps(0.05, 200, seed).unwrap(), 0, false).unwrap();
        let cov = model_covariance(&spec, &path).unwrap();
        for s in [
            Arc::new(Entropy::new(c).unwrap()) as Arc<dyn GeneratingFunction>,
            Arc::new(GeometricMean::new()),
        ] {
            let (_, dec) = decompose_generated(&path, None, s.as_ref(), Covariation::Model(&cov)).unwrap();
            for w in dec.drift_market.windows(2) {
                prop_assert!(w[1] - w[0] >= -1e-12, "{} step {}", s.name(), w[1] - w[0]);
            }
        }
    }
}

fn panel_spec(seed: u64) -> SyntheticPanelSpec {
    SyntheticPanelSpec {
        n: 4,
        days: 120,
        seed,
        report_every: 20,
        ..SyntheticPanelSpec::default()
    }
}

/// Copies `files` into `dir`, keeping only rows dated on or before `last`.
fn truncate_panel(files: &PanelFiles, dir: &Path, last: &str) -> PanelFiles {
    let out = PanelFiles::in_dir(dir);
    for (from, to) in [
        (&files.prices, &out.prices),
        (&files.shares, &out.shares),
        (&files.roa, &out.roa),
        (&files.factors, &out.factors),
    ] {
        let text = fs::read_to_string(from).unwrap();
        let mut lines = text.lines();
        let mut kept = vec![lines.next().unwrap()];
        kept.extend(lines.filter(|l| &l[..10] <= last));
        fs::write(to, kept.join("\n") + "\n").unwrap();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn loading_is_idempotent_and_never_looks_ahead(seed in any::<u64>(), cut in 30usize..110) {
        let dir = tempfile::tempdir().unwrap();
        let panel = synthetic_panel(&panel_spec(seed)).unwrap();
        let files = write_panel(dir.path().join("full"), &panel, 10.0).unwrap();
        let a = load_panel(&files, 10.0).unwrap();
        let b = load_panel(&files, 10.0).unwrap();
        prop_assert_eq!(&a, &b);

        let dates = a.date_strings();
        let short_dir = dir.path().join("short");
        fs::create_dir_all(&short_dir).unwrap();
        let short = load_panel(&truncate_panel(&files, &short_dir, &dates[cut]), 10.0).unwrap();
        prop_assert_eq!(short.len(), cut + 1);
        for t in 0..=cut {
            prop_assert_eq!(short.roa.column(t), a.roa.column(t));
            prop_assert_eq!(short.prices.column(t), a.prices.column(t));
            prop_assert_eq!(short.shares.column(t), a.shares.column(t));
        }
    }

    #[test]
    fn cost_free_readjusted_weights_are_self_financing(seed in any::<u64>()) {
        let panel = synthetic_panel(&panel_spec(seed)).unwrap();
        let inputs = panel.strategy_inputs();
        for cfg in [
            GenConfig::Entropy { c: 0.1 },
            GenConfig::GeometricMean,
            GenConfig::Beta { a_shift: 1e-4, c: 1e-4, p: 0.7 },
            GenConfig::QualityOverlay { a: Some(2.5), a_shift: None, varsigma: None },
        ] {
            let mut rule = GeneratedRule::new(&cfg, &inputs).unwrap();
            let run = run_backtest(&panel.prices, &mut rule, CostModel::free()).unwrap();
            for t in 1..run.horizon() {
                let s: f64 = run.readjusted.column(t).iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-12, "{} day {t}: {s}", cfg.label());
            }
            if cfg.overlay_leverage().unwrap().is_none() {
                prop_assert!(run.short_mass().iter().all(|m| *m == 0.0));
            }
        }
    }
}
