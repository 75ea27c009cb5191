//! Monte Carlo studies behind `spt verify` and the acceptance target.
//!
//! Every study draws its paths from per-path streams, runs them through
//! rayon and collects results in path order, so outcomes do not depend on
//! the thread count.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use spt_core::characteristics::{
    beta_characteristic, synthetic_roa_market, time_characteristic, verify_roa_assumptions, RoaMarketSpec,
};
use spt_core::decomposition::{
    arbitrage_time, assess_refinement, check_drift_monotonicity, check_pathwise_bound, decompose_generated, generated_portfolio, median,
    ArbitrageBoundSpec, ArbitrageKind, BoundPath, BoundReport, Covariation, MasterDecomposition, PathwiseBound, RefinementAssessment,
    Upsilon,
};
use spt_core::generating_functions::{
    check_gradient_consistency, classical_weights, generalized_weights, BetaGenFun, BoostedEntropy, CharDim, Entropy, ExpFactor,
    GenConfig, GeneratingFunction, GeometricMean, HessianPerturbation, Monotonicity, Multiplicative, ReducedEntropy, RoaGenFun,
};
use spt_core::linalg::check_psd_kernel;
use spt_core::market_sim::{
    excess_growth_compact, excess_growth_direct, excess_growth_via_reference, market_weights_path, model_covariance,
    portfolio_value_path, realized_excess_growth, simulate_path, MarketPath, MarketSpec, SimGrid, WeightsPath,
};
use spt_core::rng::{path_rng, StreamDomain};
use spt_core::{Result, SptError};

/// Volatility-stabilized market sampled on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VsmSetup {
    pub n: usize,
    pub alpha: f64,
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl VsmSetup {
    pub fn spec(&self) -> MarketSpec {
        MarketSpec::volatility_stabilized(self.n, self.alpha)
    }

    fn grid(&self, horizon: f64) -> Result<SimGrid> {
        SimGrid::new(horizon, self.dt, self.seed)
    }

    /// Initial standard entropy `−Σ μ_0 log μ_0`.
    pub fn initial_entropy(&self) -> f64 {
        entropy_of(&weights_of(&self.spec().initial_prices))
    }

    fn bound_spec(&self) -> ArbitrageBoundSpec {
        ArbitrageBoundSpec::new(Upsilon::volatility_stabilized(self.n), self.n)
    }

    /// Runs `f` on each path in parallel; results come back in path order.
    fn per_path<T: Send>(&self, horizon: f64, f: impl Fn(&MarketPath) -> Result<T> + Sync) -> Result<Vec<T>> {
        let spec = self.spec();
        let grid = self.grid(horizon)?;
        (0..self.paths as u64)
            .into_par_iter()
            .map(|i| f(&simulate_path(&spec, &grid, i, false)?))
            .collect()
    }
}

fn weights_of(x: &[f64]) -> Vec<f64> {
    let s: f64 = x.iter().sum();
    x.iter().map(|v| v / s).collect()
}

fn entropy_of(mu: &[f64]) -> f64 {
    -mu.iter().map(|m| m * m.ln()).sum::<f64>()
}

fn market_value(path: &MarketPath) -> Vec<f64> {
    let total = path.total_value();
    total.iter().map(|v| v / total[0]).collect()
}

fn log_ratio(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (x / y).ln()).collect()
}

/// Medians of `max_t |residual|` across a refinement schedule, plus the
/// extended-drift monotonicity check on every path.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementStudy {
    pub dts: Vec<f64>,
    pub median_residuals: Vec<f64>,
    pub assessment: RefinementAssessment,
    pub monotonicity_paths: usize,
    pub monotonicity_violations: usize,
}

/// Reduced-entropy portfolio with `P = t` decomposed against the market.
pub fn residual_refinement(base: &VsmSetup, horizon: f64, dts: &[f64], c: f64, epsilon: f64) -> Result<RefinementStudy> {
    let s = ReducedEntropy::new(c, epsilon)?;
    let flags = s.flags();
    let mut medians = Vec::with_capacity(dts.len());
    let mut checked = 0;
    let mut violations = 0;
    for &dt in dts {
        let setup = VsmSetup { dt, ..*base };
        let per = setup.per_path(horizon, |path| {
            let p = time_characteristic(path.times())?;
            let (_, dec) = decompose_generated(path, Some(&p), &s, Covariation::Realized)?;
            let mono = check_drift_monotonicity(&dec, flags, Some(Monotonicity::Increasing));
            Ok((dec.max_abs_residual(), mono))
        })?;
        for (_, m) in &per {
            if let spt_core::decomposition::DriftMonotonicity::Checked { violations: v, .. } = m {
                checked += 1;
                violations += v.len();
            }
        }
        medians.push(median(&per.iter().map(|(r, _)| *r).collect::<Vec<_>>()));
    }
    Ok(RefinementStudy {
        dts: dts.to_vec(),
        assessment: assess_refinement(dts, &medians)?,
        median_residuals: medians,
        monotonicity_paths: checked,
        monotonicity_violations: violations,
    })
}

/// One decomposition for export.
pub fn sample_decomposition(setup: &VsmSetup, horizon: f64, c: f64, epsilon: f64) -> Result<MasterDecomposition> {
    let path = simulate_path(&setup.spec(), &setup.grid(horizon)?, 0, false)?;
    let p = time_characteristic(path.times())?;
    let s = ReducedEntropy::new(c, epsilon)?;
    Ok(decompose_generated(&path, Some(&p), &s, Covariation::Realized)?.1)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassicalReduction {
    pub median_classical: f64,
    pub median_generalized: f64,
    pub ratio: f64,
}

/// Entropy residuals from the market-weights-only engine against the
/// generalized engine fed a function that ignores its characteristic.
pub fn classical_reduction(setup: &VsmSetup, horizon: f64, c: f64) -> Result<ClassicalReduction> {
    let classical = Entropy::new(c)?;
    let flat = ReducedEntropy::new(c, 0.0)?;
    let per = setup.per_path(horizon, |path| {
        let (_, a) = decompose_generated(path, None, &classical, Covariation::Realized)?;
        let p = time_characteristic(path.times())?;
        let (_, b) = decompose_generated(path, Some(&p), &flat, Covariation::Realized)?;
        Ok((a.max_abs_residual(), b.max_abs_residual()))
    })?;
    let mc = median(&per.iter().map(|r| r.0).collect::<Vec<_>>());
    let mg = median(&per.iter().map(|r| r.1).collect::<Vec<_>>());
    Ok(ClassicalReduction {
        median_classical: mc,
        median_generalized: mg,
        ratio: mg / mc,
    })
}

/// Pathwise bound check plus the terminal ordering claim.
#[derive(Debug, Clone, Serialize)]
pub struct ArbitrageStudy {
    pub arbitrage_time: f64,
    pub horizon: f64,
    pub report: BoundReport,
    /// Admissible paths on which the claimed ordering holds at the horizon.
    pub terminal_wins: usize,
    pub spec: ArbitrageBoundSpec,
    /// The same check with every path treated as admissible, when some were
    /// excluded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unconditional: Option<BoundReport>,
}

impl ArbitrageStudy {
    pub fn all_win(&self) -> bool {
        self.report.paths_checked > 0 && self.terminal_wins == self.report.paths_checked
    }
}

fn finish(kind: PathwiseBound, spec: ArbitrageBoundSpec, t_arb: f64, horizon: f64, paths: Vec<BoundPath>) -> Result<ArbitrageStudy> {
    let report = check_pathwise_bound(kind, &paths, &spec)?;
    let unconditional = if report.paths_excluded > 0 {
        let all: Vec<BoundPath> = paths.iter().map(|p| BoundPath { admissible: true, ..p.clone() }).collect();
        Some(check_pathwise_bound(kind, &all, &spec)?)
    } else {
        None
    };
    let terminal_wins = paths
        .iter()
        .filter(|p| p.admissible)
        .filter(|p| {
            let last = *p.log_relative.last().expect("non-empty path");
            if kind.is_upper() {
                last < 0.0
            } else {
                last > 0.0
            }
        })
        .count();
    Ok(ArbitrageStudy {
        arbitrage_time: t_arb,
        horizon,
        report,
        terminal_wins,
        spec,
        unconditional,
    })
}

/// Entropy portfolio against the market at `factor · T*`.
pub fn entropy_arbitrage(setup: &VsmSetup, c: f64, factor: f64) -> Result<ArbitrageStudy> {
    let mut spec = setup.bound_spec();
    spec.c = Some(c);
    let s0 = setup.initial_entropy();
    let t_arb = arbitrage_time(ArbitrageKind::EntropyTstar, &spec, s0)?;
    let horizon = factor * t_arb;
    let s = Entropy::new(c)?;
    let paths = setup.per_path(horizon, |path| {
        let gp = generated_portfolio(path, None, &s)?;
        Ok(BoundPath {
            times: path.times().to_vec(),
            log_relative: log_ratio(gp.values.values(), &market_value(path)),
            s_mu0: s0,
            admissible: true,
        })
    })?;
    finish(PathwiseBound::EntropyLower, spec, t_arb, horizon, paths)
}

/// `T̃(c) < T*(c)` on a log grid of `c`; returns the largest `T̃ − T*`.
pub fn reduced_time_grid(n: usize, epsilon: f64, s_mu0: f64, c_lo: f64, c_hi: f64, points: usize) -> Result<(bool, f64)> {
    let mut spec = ArbitrageBoundSpec::new(Upsilon::volatility_stabilized(n), n);
    spec.epsilon = Some(epsilon);
    let mut all = true;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..points {
        let c = c_lo * (c_hi / c_lo).powf(k as f64 / (points - 1) as f64);
        spec.c = Some(c);
        let tt = arbitrage_time(ArbitrageKind::ReducedTtilde, &spec, s_mu0)?;
        let ts = arbitrage_time(ArbitrageKind::EntropyTstar, &spec, s_mu0)?;
        all &= tt < ts;
        worst = worst.max(tt - ts);
    }
    Ok((all, worst))
}

/// Reduced-entropy portfolio (`P = t`) against the market at `factor · T̃`.
/// Paths whose market entropy dips below `epsilon` violate the bound's
/// premise and are excluded.
pub fn reduced_entropy_arbitrage(setup: &VsmSetup, c: f64, epsilon: f64, factor: f64) -> Result<ArbitrageStudy> {
    let mut spec = setup.bound_spec();
    spec.c = Some(c);
    spec.epsilon = Some(epsilon);
    let s0 = setup.initial_entropy();
    let t_arb = arbitrage_time(ArbitrageKind::ReducedTtilde, &spec, s0)?;
    let horizon = factor * t_arb;
    let s = ReducedEntropy::new(c, epsilon)?;
    let paths = setup.per_path(horizon, |path| {
        let mu = market_weights_path(path);
        let min_h = (0..mu.len()).map(|t| entropy_of(mu.column(t))).fold(f64::INFINITY, f64::min);
        let p = time_characteristic(path.times())?;
        let gp = generated_portfolio(path, Some(&p), &s)?;
        Ok(BoundPath {
            times: path.times().to_vec(),
            log_relative: log_ratio(gp.values.values(), &market_value(path)),
            s_mu0: s0,
            admissible: min_h >= epsilon,
        })
    })?;
    finish(PathwiseBound::ReducedEntropyLower, spec, t_arb, horizon, paths)
}

/// Boosted entropy (`P = t`) against the entropy portfolio at `factor · T̂`.
pub fn boosted_arbitrage(setup: &VsmSetup, c: f64, alpha: f64, factor: f64) -> Result<ArbitrageStudy> {
    let mut spec = setup.bound_spec();
    spec.c = Some(c);
    spec.alpha = Some(alpha);
    let s0 = setup.initial_entropy();
    let t_arb = arbitrage_time(ArbitrageKind::BoostThat, &spec, s0)?;
    let horizon = factor * t_arb;
    let boosted = BoostedEntropy::new(c, alpha)?;
    let plain = Entropy::new(c)?;
    let paths = setup.per_path(horizon, |path| {
        let p = time_characteristic(path.times())?;
        let a = generated_portfolio(path, Some(&p), &boosted)?;
        let b = generated_portfolio(path, None, &plain)?;
        Ok(BoundPath {
            times: path.times().to_vec(),
            log_relative: log_ratio(a.values.values(), b.values.values()),
            s_mu0: s0,
            admissible: true,
        })
    })?;
    finish(PathwiseBound::BoostedLower, spec, t_arb, horizon, paths)
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaStudy {
    pub arbitrage: ArbitrageStudy,
    /// Time-averaged realized market excess growth, averaged over paths.
    pub realized_gamma: f64,
    pub target_gamma: f64,
}

/// Beta portfolio with signs +1 against the market at `factor · T`, with the
/// excess-growth floor set to the model's `(n−1)/2`.
pub fn beta_arbitrage(setup: &VsmSetup, a_shift: f64, c: f64, p: f64, factor: f64) -> Result<BetaStudy> {
    let target = (setup.n as f64 - 1.0) / 2.0;
    let mut spec = setup.bound_spec();
    spec.a_shift = Some(a_shift);
    spec.c = Some(c);
    spec.p = Some(p);
    spec.epsilon = Some(target);
    let s0 = setup.initial_entropy();
    let t_arb = arbitrage_time(ArbitrageKind::BetaT, &spec, s0)?;
    let horizon = factor * t_arb;
    let s = BetaGenFun::new(a_shift, c, p)?;
    let signs = vec![1.0; setup.n];
    let per = setup.per_path(horizon, |path| {
        let beta = beta_characteristic(path, Some(&signs))?;
        let gp = generated_portfolio(path, Some(&beta.path), &s)?;
        let gamma = realized_excess_growth(path, &market_weights_path(path))?;
        let mean_gamma = gamma.iter().sum::<f64>() / gamma.len() as f64;
        Ok((
            BoundPath {
                times: path.times().to_vec(),
                log_relative: log_ratio(gp.values.values(), &market_value(path)),
                s_mu0: s0,
                admissible: true,
            },
            mean_gamma,
        ))
    })?;
    let realized_gamma = per.iter().map(|r| r.1).sum::<f64>() / per.len() as f64;
    let paths = per.into_iter().map(|r| r.0).collect();
    Ok(BetaStudy {
        arbitrage: finish(PathwiseBound::BetaLower, spec, t_arb, horizon, paths)?,
        realized_gamma,
        target_gamma: target,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RoaStudy {
    pub arbitrage: ArbitrageStudy,
    pub overlay_leverage: f64,
    /// Admissible paths with `Z^η_T > Z^μ_T`.
    pub overlay_wins: usize,
    /// Largest gap between the overlay's traded value and `(1+a)Z^μ − aZ^π`.
    pub overlay_identity_gap: f64,
    pub exclusion_rate: f64,
}

/// Joint ROA/market model: the market against the ROA portfolio and the
/// quality overlay against the market at `factor · T*`.
pub fn roa_arbitrage(market: &RoaMarketSpec, paths: usize, dt: f64, seed: u64, factor: f64, window: usize) -> Result<RoaStudy> {
    let r = &market.roa;
    let mut spec = ArbitrageBoundSpec::new(Upsilon::volatility_stabilized(market.n), market.n);
    spec.a_shift = Some(r.a_shift);
    spec.varsigma = Some(r.varsigma);
    spec.eta = Some(r.eta);
    spec.delta = Some(r.delta);
    spec.epsilon = Some(r.epsilon);
    let t_arb = arbitrage_time(ArbitrageKind::RoaTstar, &spec, 0.0)?;
    let horizon = factor * t_arb;
    let grid = SimGrid::new(horizon, dt, seed)?;
    let s = RoaGenFun::new(r.varsigma)?;
    let overlay = GenConfig::QualityOverlay {
        a: None,
        a_shift: Some(r.a_shift),
        varsigma: Some(r.varsigma),
    };
    let a = overlay.overlay_leverage()?.expect("overlay config");
    let per: Vec<(BoundPath, bool, f64)> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let (path, roa) = synthetic_roa_market(market, &grid, i)?;
            let mu = market_weights_path(&path);
            let admissible = verify_roa_assumptions(&roa, &mu, r, window).admissible();
            let gp = generated_portfolio(&path, Some(&roa), &s)?;
            let z_mu = market_value(&path);
            let z_pi = gp.values.values();
            let (eta_win, gap) = overlay_check(&path, &mu, &gp.weights, &z_mu, z_pi, a)?;
            Ok((
                BoundPath {
                    times: path.times().to_vec(),
                    log_relative: log_ratio(z_pi, &z_mu),
                    s_mu0: 0.0,
                    admissible,
                },
                eta_win && admissible,
                gap,
            ))
        })
        .collect::<Result<_>>()?;
    let overlay_wins = per.iter().filter(|r| r.1).count();
    let gap = per.iter().map(|r| r.2).fold(0.0, f64::max);
    let bound_paths: Vec<BoundPath> = per.into_iter().map(|r| r.0).collect();
    let arbitrage = finish(PathwiseBound::RoaUpper, spec, t_arb, horizon, bound_paths)?;
    Ok(RoaStudy {
        exclusion_rate: arbitrage.report.exclusion_rate(),
        arbitrage,
        overlay_leverage: a,
        overlay_wins,
        overlay_identity_gap: gap,
    })
}

/// Trades the overlay weights and compares with the static combination.
fn overlay_check(path: &MarketPath, mu: &WeightsPath, pi: &WeightsPath, z_mu: &[f64], z_pi: &[f64], a: f64) -> Result<(bool, f64)> {
    let mut w = spt_core::SeriesMatrix::with_capacity(path.n(), path.len());
    for t in 0..path.len() {
        let eta = match spt_core::generating_functions::quality_overlay_weights(mu.column(t), pi.column(t), z_mu[t], z_pi[t], a) {
            Ok(e) => e,
            // Overlay insolvent: the claim fails on this path.
            Err(SptError::OverlayInsolvent { .. }) => return Ok((false, 0.0)),
            Err(e) => return Err(e),
        };
        w.push_column(&eta)?;
    }
    let z_eta = portfolio_value_path(path, &WeightsPath::new(w)?, 1.0)?;
    let mut gap = 0.0f64;
    for t in 0..path.len() {
        let combo = (1.0 + a) * z_mu[t] - a * z_pi[t];
        gap = gap.max((z_eta.values()[t] - combo).abs() / combo.abs().max(1.0));
    }
    let last = path.len() - 1;
    Ok((z_eta.values()[last] > z_mu[last], gap))
}

/// Largest `|π(f·g) − π(f)|` over random `(μ, P)` draws.
pub fn multiplicative_invariance(n: usize, draws: usize, seed: u64) -> Result<f64> {
    let f: Arc<dyn GeneratingFunction> = Arc::new(Entropy::new(1.0)?);
    let s = Multiplicative::new(f.clone(), Arc::new(ExpFactor::new(0.7, CharDim::Fixed(3))?))?;
    let mut rng = path_rng(seed, StreamDomain::Characteristics, 0);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let mu = weights_of(&raw);
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let a = generalized_weights(&s, &mu, &p)?;
        let b = classical_weights(f.as_ref(), &mu)?;
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct PsdStudy {
    pub points: usize,
    pub failures: usize,
    pub worst_eigenvalue: f64,
    pub worst_kernel_residual: f64,
}

/// Model τ relative to the market: PSD with μ in its kernel at every point.
pub fn tau_psd(setup: &VsmSetup, horizon: f64, tol: f64) -> Result<PsdStudy> {
    let spec = setup.spec();
    let per = setup.per_path(horizon, |path| {
        let cov = model_covariance(&spec, path)?;
        let mu = market_weights_path(path);
        let mut out = (0usize, 0usize, f64::INFINITY, 0.0f64);
        for t in 0..cov.len() {
            let chk = check_psd_kernel(cov.tau(t), mu.column(t), tol);
            out.0 += 1;
            out.1 += usize::from(!chk.passed);
            out.2 = out.2.min(chk.min_eigenvalue);
            out.3 = out.3.max(chk.kernel_residual);
        }
        Ok(out)
    })?;
    Ok(PsdStudy {
        points: per.iter().map(|r| r.0).sum(),
        failures: per.iter().map(|r| r.1).sum(),
        worst_eigenvalue: per.iter().map(|r| r.2).fold(f64::INFINITY, f64::min),
        worst_kernel_residual: per.iter().map(|r| r.3).fold(0.0, f64::max),
    })
}

/// Largest disagreement among the three excess-growth routes on random
/// PSD `σ`, portfolios `π` (possibly short) and references `ζ`.
pub fn numeraire_invariance(n: usize, draws: usize, seed: u64) -> Result<f64> {
    let mut rng = path_rng(seed, StreamDomain::Market, 0);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let sigma = &a * a.transpose();
        let mut draw_weights = |allow_short: bool| -> Vec<f64> {
            let lo = if allow_short { -0.5 } else { 0.05 };
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(lo..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        };
        let pi = draw_weights(true);
        let zeta = draw_weights(false);
        let d = excess_growth_direct(&sigma, &pi)?;
        let v = excess_growth_via_reference(&sigma, &pi, &zeta)?;
        let c = excess_growth_compact(&sigma, &pi)?;
        worst = worst.max((d - v).abs()).max((d - c).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientStudy {
    pub checked: Vec<(String, bool, f64)>,
    /// The deliberately wrong Hessian must be caught.
    pub negative_control_caught: bool,
}

pub fn gradient_consistency(n: usize, samples: usize, seed: u64) -> Result<GradientStudy> {
    let fns: Vec<Arc<dyn GeneratingFunction>> = vec![
        Arc::new(Entropy::new(0.1)?),
        Arc::new(GeometricMean),
        Arc::new(ReducedEntropy::new(1.0, 0.5)?),
        Arc::new(BoostedEntropy::new(1.0, 0.1)?),
        Arc::new(BetaGenFun::new(1e-4, 1e-4, 0.7)?),
        Arc::new(RoaGenFun::new(1.0)?),
    ];
    let checked = fns
        .iter()
        .map(|s| {
            let r = check_gradient_consistency(s.as_ref(), n, samples, seed);
            (r.name, r.passed, r.max_gradient_error.max(r.max_hessian_error))
        })
        .collect();
    let broken = HessianPerturbation::new(Arc::new(Entropy::new(1.0)?), 1.5);
    let caught = !check_gradient_consistency(&broken, n, samples, seed).passed;
    Ok(GradientStudy {
        checked,
        negative_control_caught: caught,
    })
}

/// Outcome of one verification check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: String,
    pub passed: bool,
    pub detail: String,
    pub metrics: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }
}

fn check(id: &str, passed: bool, detail: String, metrics: &impl Serialize) -> Result<CheckResult> {
    Ok(CheckResult {
        id: id.into(),
        passed,
        detail,
        metrics: serde_json::to_value(metrics)?,
    })
}

fn arbitrage_detail(s: &ArbitrageStudy) -> String {
    format!(
        "T={:.4} horizon={:.4}: {}/{} paths win, bound {}/{} points, worst margin {:.3e}, {} excluded",
        s.arbitrage_time,
        s.horizon,
        s.terminal_wins,
        s.report.paths_checked,
        s.report.pairs_satisfied,
        s.report.pairs_checked,
        s.report.worst_margin,
        s.report.paths_excluded
    )
}

/// Runs the full property suite with the sizes in `cfg`.
pub fn run_verification(cfg: &crate::config::VerifyConfig, seed: u64) -> Result<VerificationReport> {
    let n = cfg.n;
    let ln_n = (n as f64).ln();
    let eps = cfg.entropy_floor * ln_n;
    let mut checks = Vec::new();

    let base = cfg.vsm(cfg.paths, cfg.dt, seed);
    let refine = residual_refinement(&base, cfg.refinement_horizon, &cfg.refinement_dts, 1.0, eps)?;
    let a = &refine.assessment;
    checks.push(check(
        "master_equation",
        a.passed(),
        format!(
            "median max|residual| {:?}, finest {:.3e} vs bound {:.3e}",
            refine.median_residuals, a.residuals[a.residuals.len() - 1], a.finest_bound
        ),
        &refine,
    )?);

    let red = classical_reduction(&base, cfg.refinement_horizon, 1.0)?;
    checks.push(check(
        "classical_reduction",
        (0.5..=2.0).contains(&red.ratio),
        format!("median ratio {:.4}", red.ratio),
        &red,
    )?);

    let arb = cfg.vsm(cfg.arbitrage_paths, cfg.dt, seed);
    let ent = entropy_arbitrage(&arb, 1.0, 1.5)?;
    checks.push(check(
        "entropy_arbitrage",
        ent.all_win() && ent.report.holds_everywhere() && ent.report.paths_excluded == 0,
        arbitrage_detail(&ent),
        &ent,
    )?);

    let (ordered, worst_gap) = reduced_time_grid(n, eps, arb.initial_entropy(), 1e-2, 1e2, 41)?;
    checks.push(check(
        "reduced_time_ordering",
        ordered,
        format!("largest reduced minus entropy time {worst_gap:.4e}"),
        &worst_gap,
    )?);
    let rent = reduced_entropy_arbitrage(&arb, 1.0, eps, 1.5)?;
    checks.push(check(
        "reduced_entropy_bound",
        rent.all_win() && rent.report.holds_everywhere(),
        arbitrage_detail(&rent),
        &rent,
    )?);

    let boost = boosted_arbitrage(&arb, 1.0, 0.1, 1.1)?;
    checks.push(check(
        "boosted_entropy",
        boost.all_win() && boost.report.holds_everywhere(),
        arbitrage_detail(&boost),
        &boost,
    )?);

    let beta = beta_arbitrage(&cfg.vsm(cfg.beta_paths, cfg.beta_dt, seed), 1.0, 1.0, 0.5, 1.1)?;
    let gamma_err = (beta.realized_gamma / beta.target_gamma - 1.0).abs();
    checks.push(check(
        "beta_bound",
        beta.arbitrage.report.holds_everywhere() && gamma_err <= 0.05,
        format!(
            "{}; realized excess growth {:.4} vs {}",
            arbitrage_detail(&beta.arbitrage),
            beta.realized_gamma,
            beta.target_gamma
        ),
        &beta,
    )?);

    let roa = roa_arbitrage(&RoaMarketSpec::reference(n), cfg.roa_paths, cfg.roa_dt, seed, 1.5, cfg.roa_window)?;
    let checked = roa.arbitrage.report.paths_checked;
    checks.push(check(
        "roa_pair",
        checked > 0
            && roa.exclusion_rate <= 0.2
            && roa.arbitrage.terminal_wins == checked
            && roa.overlay_wins == checked,
        format!(
            "{}; overlay beats market on {}/{} (a={:.4}), exclusion rate {:.3}",
            arbitrage_detail(&roa.arbitrage),
            roa.overlay_wins,
            checked,
            roa.overlay_leverage,
            roa.exclusion_rate
        ),
        &roa,
    )?);

    let mult = multiplicative_invariance(n, cfg.multiplicative_draws, seed)?;
    checks.push(check(
        "multiplicative_invariance",
        mult <= 1e-12,
        format!("max weight difference {mult:.3e}"),
        &mult,
    )?);
    checks.push(check(
        "drift_monotonicity",
        refine.monotonicity_paths > 0 && refine.monotonicity_violations == 0,
        format!(
            "{} violations on {} paths",
            refine.monotonicity_violations, refine.monotonicity_paths
        ),
        &(refine.monotonicity_paths, refine.monotonicity_violations),
    )?);
    let psd = tau_psd(&base, cfg.refinement_horizon, 1e-10)?;
    checks.push(check(
        "tau_psd_kernel",
        psd.failures == 0,
        format!(
            "{} failures on {} points, min eigenvalue {:.3e}, kernel residual {:.3e}",
            psd.failures, psd.points, psd.worst_eigenvalue, psd.worst_kernel_residual
        ),
        &psd,
    )?);

    let num = numeraire_invariance(n, cfg.invariance_draws, seed)?;
    checks.push(check(
        "numeraire_invariance",
        num <= 1e-10,
        format!("max route disagreement {num:.3e}"),
        &num,
    )?);

    let grad = gradient_consistency(n, cfg.gradient_samples, seed)?;
    checks.push(check(
        "gradient_consistency",
        grad.checked.iter().all(|c| c.1) && grad.negative_control_caught,
        format!(
            "{}/{} functions consistent, broken Hessian caught: {}",
            grad.checked.iter().filter(|c| c.1).count(),
            grad.checked.len(),
            grad.negative_control_caught
        ),
        &grad,
    )?);

    Ok(VerificationReport { seed, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_refinement_runs() {
        let setup = VsmSetup {
            n: 3,
            alpha: 0.0,
            paths: 4,
            dt: 1e-3,
            seed: 1,
        };
        let r = residual_refinement(&setup, 0.2, &[2e-3, 1e-3, 5e-4], 1.0, 0.5).unwrap();
        assert_eq!(r.median_residuals.len(), 3);
        assert_eq!(r.monotonicity_paths, 12);
        assert_eq!(r.monotonicity_violations, 0);
    }

    #[test]
    fn reduced_grid_orders_times() {
        let (ok, worst) = reduced_time_grid(5, 0.5, 5f64.ln(), 1e-2, 1e2, 21).unwrap();
        assert!(ok && worst < 0.0);
    }

    #[test]
    fn algebraic_checks() {
        assert!(multiplicative_invariance(4, 20, 3).unwrap() < 1e-12);
        assert!(numeraire_invariance(4, 20, 3).unwrap() < 1e-10);
        let g = gradient_consistency(4, 10, 3).unwrap();
        assert!(g.checked.iter().all(|c| c.1), "{:?}", g.checked);
        assert!(g.negative_control_caught);
    }
}
