//! Term-by-term evaluation of the generalized master equation
//!
//! `log(Z^π_t/Z^μ_t) = log(S_t/S_0) − Σ_a ∫ ∂_{n+a} log S dP^a + Θ_t`
//!
//! on simulated or observed paths, with all integrals as left-point sums.

mod bounds;

pub use bounds::{
    arbitrage_time, check_pathwise_bound, pathwise_bound_value, ArbitrageBoundSpec, ArbitrageKind, BoundPath,
    BoundReport, PathwiseBound, Upsilon,
};

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::characteristics::CharacteristicsPath;
use crate::error::{Result, SptError};
use crate::generating_functions::{evaluate_checked, generalized_weights, GenFlags, GeneratingFunction, Monotonicity};
use crate::market_sim::{market_weights_path, portfolio_value_path, CovariancePath, MarketPath, ValuePath, WeightsPath};
use crate::matrix::SeriesMatrix;

/// Source of `d⟨μ^i, μ^j⟩` in the market-Hessian drift term.
#[derive(Debug, Clone, Copy)]
pub enum Covariation<'a> {
    /// Realized increments `Δμ^i Δμ^j`.
    Realized,
    /// `μ^i μ^j τ^{ij} dt` from a supplied covariance path.
    Model(&'a CovariancePath),
}

/// Every term of the master equation per grid point, cumulated from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterDecomposition {
    pub times: Vec<f64>,
    /// `log(Z^π_t/Z^μ_t) − log(Z^π_0/Z^μ_0)`.
    pub lhs: Vec<f64>,
    pub log_s_change: Vec<f64>,
    pub stoch_integral: Vec<f64>,
    pub drift_market: Vec<f64>,
    pub drift_qv: Vec<f64>,
    pub drift_cross: Vec<f64>,
    pub drift_theta: Vec<f64>,
    /// `Θ − stoch_integral`, only when the characteristics have finite
    /// variation (or are absent).
    pub extended_drift: Option<Vec<f64>>,
    pub residual: Vec<f64>,
}

impl MasterDecomposition {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// CSV with columns `t,lhs,logS,stoch_int,drift_market,drift_qv,drift_cross,residual`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "lhs", "logS", "stoch_int", "drift_market", "drift_qv", "drift_cross", "residual"])?;
        for t in 0..self.len() {
            w.write_record(
                [
                    self.times[t],
                    self.lhs[t],
                    self.log_s_change[t],
                    self.stoch_integral[t],
                    self.drift_market[t],
                    self.drift_qv[t],
                    self.drift_cross[t],
                    self.residual[t],
                ]
                .iter()
                .map(|v| v.to_string()),
            )?;
        }
        w.flush().map_err(|e| SptError::io("decomposition csv", e))?;
        Ok(())
    }
}

/// Weights and value of the portfolio generated by `S` along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPortfolio {
    pub weights: WeightsPath,
    pub values: ValuePath,
}

/// Characteristics at grid point `t` (empty without `P`).
fn char_column(p: Option<&CharacteristicsPath>, t: usize) -> &[f64] {
    p.map_or(&[], |p| p.column(t))
}

fn check_inputs(path: &MarketPath, p: Option<&CharacteristicsPath>, s: &dyn GeneratingFunction) -> Result<()> {
    let k = s.char_dim(path.n());
    match p {
        Some(p) => {
            p.check_aligned(path)?;
            if p.k() != k {
                return Err(SptError::dims("characteristics", k, p.k()));
            }
        }
        None if k != 0 => {
            return Err(SptError::param("P", format!("{} needs {k} characteristics", s.name())));
        }
        None => {}
    }
    Ok(())
}

/// Weights `π_t` generated by `S` at `(μ_t, P_t)` and the resulting value
/// process with `Z_0 = 1`.
pub fn generated_portfolio(
    path: &MarketPath,
    p: Option<&CharacteristicsPath>,
    s: &dyn GeneratingFunction,
) -> Result<GeneratedPortfolio> {
    check_inputs(path, p, s)?;
    let mu = market_weights_path(path);
    let mut w = SeriesMatrix::with_capacity(path.n(), path.len());
    for t in 0..path.len() {
        w.push_column(&generalized_weights(s, mu.column(t), char_column(p, t))?)?;
    }
    let weights = WeightsPath::new(w)?;
    let values = portfolio_value_path(path, &weights, 1.0)?;
    Ok(GeneratedPortfolio { weights, values })
}

/// Evaluates every term along one path. `pi`, `z_pi` are the generated
/// portfolio, `mu`, `z_mu` the market.
#[allow(clippy::too_many_arguments)]
pub fn decompose(
    path: &MarketPath,
    mu: &WeightsPath,
    p: Option<&CharacteristicsPath>,
    s: &dyn GeneratingFunction,
    pi: &WeightsPath,
    z_pi: &ValuePath,
    z_mu: &ValuePath,
    covariation: Covariation<'_>,
) -> Result<MasterDecomposition> {
    check_inputs(path, p, s)?;
    let len = path.len();
    let n = path.n();
    for (what, l) in [("market weights", mu.len()), ("portfolio weights", pi.len()), ("portfolio value", z_pi.len()), ("market value", z_mu.len())] {
        if l != len {
            return Err(SptError::GridMismatch(format!("{what} has {l} points, grid has {len}")));
        }
    }
    if mu.n() != n || pi.n() != n {
        return Err(SptError::dims("weights", n, if mu.n() != n { mu.n() } else { pi.n() }));
    }
    if let Covariation::Model(cov) = covariation {
        if cov.len() != len {
            return Err(SptError::GridMismatch(format!("covariance path has {} points, grid has {len}", cov.len())));
        }
    }
    let k = s.char_dim(n);
    let finite_variation = p.is_none_or(|p| p.finite_variation());
    let times = path.times();

    let mut out = MasterDecomposition {
        times: times.to_vec(),
        lhs: Vec::with_capacity(len),
        log_s_change: Vec::with_capacity(len),
        stoch_integral: Vec::with_capacity(len),
        drift_market: Vec::with_capacity(len),
        drift_qv: Vec::with_capacity(len),
        drift_cross: Vec::with_capacity(len),
        drift_theta: Vec::with_capacity(len),
        extended_drift: None,
        residual: Vec::with_capacity(len),
    };

    let lhs0 = (z_pi.values()[0] / z_mu.values()[0]).ln();
    let mut evals = evaluate_checked(s, mu.column(0), char_column(p, 0))?;
    let log_s0 = evals.value.ln();
    let (mut stoch, mut market, mut qv, mut cross) = (0.0, 0.0, 0.0, 0.0);
    let mut dmu = vec![0.0; n];
    let mut dp = vec![0.0; k];

    for t in 0..len {
        if t > 0 {
            let e = &evals;
            let (m0, m1) = (mu.column(t - 1), mu.column(t));
            for i in 0..n {
                dmu[i] = m1[i] - m0[i];
            }
            if k > 0 {
                let (p0, p1) = (char_column(p, t - 1), char_column(p, t));
                for a in 0..k {
                    dp[a] = p1[a] - p0[a];
                }
            }

            // −(1/2S) Σ ∂_ij S d⟨μ^i, μ^j⟩
            let h = &e.hessian;
            let mut quad = 0.0;
            match covariation {
                Covariation::Realized => {
                    for i in 0..n {
                        for j in 0..n {
                            quad += h[(i, j)] * dmu[i] * dmu[j];
                        }
                    }
                }
                Covariation::Model(cov) => {
                    let tau = cov.tau(t - 1);
                    let dt = times[t] - times[t - 1];
                    for i in 0..n {
                        for j in 0..n {
                            quad += h[(i, j)] * m0[i] * m0[j] * tau[(i, j)] * dt;
                        }
                    }
                }
            }
            market -= quad / (2.0 * e.value);

            if k > 0 {
                let glog = e.log_gradient();
                stoch += (0..k).map(|a| glog[n + a] * dp[a]).sum::<f64>();
                if !finite_variation {
                    let lh: DMatrix<f64> = e.log_hessian();
                    let mut q = 0.0;
                    for a in 0..k {
                        for b in 0..k {
                            q += lh[(n + a, n + b)] * dp[a] * dp[b];
                        }
                    }
                    qv -= 0.5 * q;
                    let mut c = 0.0;
                    for i in 0..n {
                        for a in 0..k {
                            c += lh[(i, n + a)] * dmu[i] * dp[a];
                        }
                    }
                    cross -= c;
                }
            }
            evals = evaluate_checked(s, m1, char_column(p, t))?;
        }
        let theta = market + qv + cross;
        let lhs = (z_pi.values()[t] / z_mu.values()[t]).ln() - lhs0;
        let log_s = evals.value.ln() - log_s0;
        out.lhs.push(lhs);
        out.log_s_change.push(log_s);
        out.stoch_integral.push(stoch);
        out.drift_market.push(market);
        out.drift_qv.push(qv);
        out.drift_cross.push(cross);
        out.drift_theta.push(theta);
        out.residual.push(if t == 0 { 0.0 } else { lhs - (log_s - stoch + theta) });
    }
    if finite_variation {
        out.extended_drift = Some(out.drift_theta.iter().zip(&out.stoch_integral).map(|(th, st)| th - st).collect());
    }
    Ok(out)
}

/// Generates the portfolio from `S` and decomposes it against the market.
pub fn decompose_generated(
    path: &MarketPath,
    p: Option<&CharacteristicsPath>,
    s: &dyn GeneratingFunction,
    covariation: Covariation<'_>,
) -> Result<(GeneratedPortfolio, MasterDecomposition)> {
    let gp = generated_portfolio(path, p, s)?;
    let mu = market_weights_path(path);
    let z_mu = ValuePath::new(path.total_value().iter().map(|v| v / path.total_value()[0]).collect())?;
    let dec = decompose(path, &mu, p, s, &gp.weights, &gp.values, &z_mu, covariation)?;
    Ok((gp, dec))
}

/// Outcome of the extended-drift monotonicity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DriftMonotonicity {
    NotApplicable { reason: String },
    Checked {
        /// Grid indices `t` where `Θ̃_t < Θ̃_{t−1}` beyond tolerance.
        violations: Vec<usize>,
        tolerance: f64,
        min_increment: f64,
    },
}

impl DriftMonotonicity {
    /// `None` when the check did not apply.
    pub fn passed(&self) -> Option<bool> {
        match self {
            DriftMonotonicity::NotApplicable { .. } => None,
            DriftMonotonicity::Checked { violations, .. } => Some(violations.is_empty()),
        }
    }
}

/// Checks that `Θ̃` is non-decreasing when `S` is concave in the weights,
/// non-multiplicative, and monotone in the characteristics opposite to a
/// monotone finite-variation `P`. `p_monotone` is `None` without
/// characteristics.
pub fn check_drift_monotonicity(dec: &MasterDecomposition, flags: GenFlags, p_monotone: Option<Monotonicity>) -> DriftMonotonicity {
    let na = |reason: &str| DriftMonotonicity::NotApplicable { reason: reason.into() };
    let Some(ext) = &dec.extended_drift else {
        return na("characteristics are not of finite variation");
    };
    if flags.multiplicative {
        return na("multiplicative S: the extended drift is that of its weight factor");
    }
    if !flags.concave_in_x {
        return na("S is not concave in the market weights");
    }
    if let Some(m) = p_monotone {
        if m == Monotonicity::None {
            return na("characteristics are not monotone");
        }
        if flags.monotone_in_y != m.opposite() {
            return na("S is not monotone opposite to the characteristics");
        }
    }
    let scale = ext.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-10 * (1.0 + scale);
    let mut violations = Vec::new();
    let mut min_increment = f64::INFINITY;
    for t in 1..ext.len() {
        let d = ext[t] - ext[t - 1];
        min_increment = min_increment.min(d);
        if d < -tolerance {
            violations.push(t);
        }
    }
    DriftMonotonicity::Checked {
        violations,
        tolerance,
        min_increment,
    }
}

/// `log(Z^π/Z^ζ)` computed from the value paths and from term differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeReturn {
    pub direct: Vec<f64>,
    pub via_terms: Vec<f64>,
    pub residual: Vec<f64>,
}

impl RelativeReturn {
    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Relative return of `π` against `ζ` when both were decomposed against the
/// same market path.
pub fn relative_return_vs_portfolio(dec_pi: &MasterDecomposition, dec_zeta: &MasterDecomposition) -> Result<RelativeReturn> {
    if dec_pi.times != dec_zeta.times {
        return Err(SptError::GridMismatch("decompositions live on different grids".into()));
    }
    let len = dec_pi.len();
    let mut out = RelativeReturn {
        direct: Vec::with_capacity(len),
        via_terms: Vec::with_capacity(len),
        residual: Vec::with_capacity(len),
    };
    for t in 0..len {
        let direct = dec_pi.lhs[t] - dec_zeta.lhs[t];
        let via = (dec_pi.log_s_change[t] - dec_zeta.log_s_change[t]) - (dec_pi.stoch_integral[t] - dec_zeta.stoch_integral[t])
            + (dec_pi.drift_theta[t] - dec_zeta.drift_theta[t]);
        out.direct.push(direct);
        out.via_terms.push(via);
        out.residual.push(direct - via);
    }
    Ok(out)
}

/// Residual sizes across a grid-refinement schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementAssessment {
    /// Step sizes, coarsest first.
    pub dts: Vec<f64>,
    pub residuals: Vec<f64>,
    pub monotone_decreasing: bool,
    /// `C` of the envelope `C·√dt` through the two coarsest grids.
    pub fitted_c: f64,
    /// `C·√dt` at the finest grid.
    pub finest_bound: f64,
    pub finest_under_curve: bool,
}

impl RefinementAssessment {
    pub fn passed(&self) -> bool {
        self.monotone_decreasing && self.finest_under_curve
    }
}

/// `C` is the larger of `r/√dt` on the two coarsest grids, so the curve
/// envelopes both; the finest residual must fall under it.
pub fn assess_refinement(dts: &[f64], residuals: &[f64]) -> Result<RefinementAssessment> {
    if dts.len() != residuals.len() {
        return Err(SptError::dims("refinement residuals", dts.len(), residuals.len()));
    }
    if dts.len() < 3 {
        return Err(SptError::param("dts", "need at least three grids"));
    }
    if dts.windows(2).any(|w| !(w[1] < w[0])) || dts.iter().any(|d| !(*d > 0.0)) {
        return Err(SptError::param("dts", "must be positive and strictly decreasing"));
    }
    let monotone_decreasing = residuals.windows(2).all(|w| w[1] < w[0]);
    let fitted_c = (residuals[0] / dts[0].sqrt()).max(residuals[1] / dts[1].sqrt());
    let last = dts.len() - 1;
    let finest_bound = fitted_c * dts[last].sqrt();
    Ok(RefinementAssessment {
        dts: dts.to_vec(),
        residuals: residuals.to_vec(),
        monotone_decreasing,
        fitted_c,
        finest_bound,
        finest_under_curve: residuals[last] <= finest_bound,
    })
}

/// Median of a non-empty slice (mean of the two middle values for even
/// lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
