use nalgebra::DMatrix;

use super::{check_normalized, MarketModel, MarketPath, MarketSpec, WeightsPath, VSM_WEIGHT_FLOOR};
use crate::error::{Result, SptError};

/// Trailing window (in steps) used when none is configured.
pub const DEFAULT_COVARIANCE_WINDOW: usize = 60;

/// Log-price covariance rates and relative covariances per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePath {
    sigma: Vec<DMatrix<f64>>,
    tau: Vec<DMatrix<f64>>,
    full_window: Vec<bool>,
}

impl CovariancePath {
    /// Builds τ relative to `reference` at every grid point.
    pub fn from_sigma(sigma: Vec<DMatrix<f64>>, reference: &WeightsPath, full_window: Vec<bool>) -> Result<Self> {
        if sigma.len() != reference.len() || full_window.len() != sigma.len() {
            return Err(SptError::GridMismatch(format!(
                "{} covariance matrices for {} weight columns",
                sigma.len(),
                reference.len()
            )));
        }
        let tau = sigma
            .iter()
            .enumerate()
            .map(|(t, s)| relative_covariance(s, reference.column(t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sigma, tau, full_window })
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn sigma(&self, t: usize) -> &DMatrix<f64> {
        &self.sigma[t]
    }

    pub fn tau(&self, t: usize) -> &DMatrix<f64> {
        &self.tau[t]
    }

    /// False at grid points where the estimation window had not filled yet.
    pub fn full_window(&self, t: usize) -> bool {
        self.full_window[t]
    }

    pub fn warmup_points(&self) -> usize {
        self.full_window.iter().filter(|f| !**f).count()
    }
}

/// Realized covariation of log prices over the trailing `window` increments,
/// divided by the elapsed time. The window expands from the start until it
/// fills; those points are flagged. τ is taken relative to the market weights.
pub fn estimate_covariance(path: &MarketPath, window: usize) -> Result<CovariancePath> {
    if window < 2 {
        return Err(SptError::param("window", format!("{window} < 2")));
    }
    let n = path.n();
    let len = path.len();
    let times = path.times();
    let logs: Vec<Vec<f64>> = path
        .prices()
        .columns()
        .map(|c| c.iter().map(|v| v.ln()).collect())
        .collect();
    let incr: Vec<Vec<f64>> = (1..len)
        .map(|k| (0..n).map(|i| logs[k][i] - logs[k - 1][i]).collect())
        .collect();

    let mut acc = DMatrix::<f64>::zeros(n, n);
    let mut sigma = Vec::with_capacity(len);
    let mut full = Vec::with_capacity(len);
    for t in 1..len {
        add_outer(&mut acc, &incr[t - 1], 1.0);
        if t > window {
            add_outer(&mut acc, &incr[t - 1 - window], -1.0);
        }
        let start = t.saturating_sub(window);
        let elapsed = times[t] - times[start];
        let mut s = &acc / elapsed;
        symmetrize(&mut s);
        sigma.push(s);
        full.push(t >= window);
    }
    // no increments end at t = 0; reuse the first estimate
    let first = sigma[0].clone();
    sigma.insert(0, first);
    full.insert(0, false);
    CovariancePath::from_sigma(sigma, &super::market_weights_path(path), full)
}

fn add_outer(acc: &mut DMatrix<f64>, v: &[f64], sign: f64) {
    let n = v.len();
    for j in 0..n {
        for i in 0..n {
            acc[(i, j)] += sign * v[i] * v[j];
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Known model σ along a path: `δ^{ij}/μ^i` for VSM (weights clamped as in
/// the simulator), `ξξᵀ` for constant-coefficient models.
pub fn model_covariance(spec: &MarketSpec, path: &MarketPath) -> Result<CovariancePath> {
    spec.validate()?;
    if path.n() != spec.n {
        return Err(SptError::dims("market path", spec.n, path.n()));
    }
    let mu = super::market_weights_path(path);
    let n = spec.n;
    let sigma: Vec<DMatrix<f64>> = match &spec.model {
        MarketModel::VolatilityStabilized { .. } => (0..mu.len())
            .map(|t| DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / mu.column(t)[i].max(VSM_WEIGHT_FLOOR) } else { 0.0 }))
            .collect(),
        MarketModel::ConstantLogDiffusion { xi, .. } => {
            let x = DMatrix::from_fn(n, n, |i, j| xi[i][j]);
            let s = &x * x.transpose();
            vec![s; mu.len()]
        }
    };
    let len = sigma.len();
    CovariancePath::from_sigma(sigma, &mu, vec![true; len])
}

/// `τ^{ij} = σ^{ij} − σ^{iπ} − σ^{jπ} + σ^{ππ}` relative to `weights`.
pub fn relative_covariance(sigma: &DMatrix<f64>, weights: &[f64]) -> Result<DMatrix<f64>> {
    let n = weights.len();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(SptError::dims("sigma", n, sigma.nrows()));
    }
    let s_pi: Vec<f64> = (0..n).map(|i| (0..n).map(|j| sigma[(i, j)] * weights[j]).sum()).collect();
    let s_pipi: f64 = (0..n).map(|i| weights[i] * s_pi[i]).sum();
    let mut tau = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = sigma[(i, j)] - s_pi[i] - s_pi[j] + s_pipi;
            tau[(i, j)] = v;
            tau[(j, i)] = v;
        }
    }
    Ok(tau)
}

fn check_square(sigma: &DMatrix<f64>, pi: &[f64]) -> Result<()> {
    if sigma.nrows() != pi.len() || sigma.ncols() != pi.len() {
        return Err(SptError::dims("sigma", pi.len(), sigma.nrows()));
    }
    Ok(())
}

/// `½(Σ π^i σ^{ii} − π·σπ)`.
pub fn excess_growth_direct(sigma: &DMatrix<f64>, pi: &[f64]) -> Result<f64> {
    check_square(sigma, pi)?;
    check_normalized(pi)?;
    let n = pi.len();
    let diag: f64 = (0..n).map(|i| pi[i] * sigma[(i, i)]).sum();
    let quad: f64 = (0..n)
        .map(|i| pi[i] * (0..n).map(|j| sigma[(i, j)] * pi[j]).sum::<f64>())
        .sum();
    Ok(0.5 * (diag - quad))
}

/// `½(Σ π^i τ^{ζ,ii} − π·τ^ζ π)` for an arbitrary reference portfolio ζ.
pub fn excess_growth_via_reference(sigma: &DMatrix<f64>, pi: &[f64], zeta: &[f64]) -> Result<f64> {
    check_square(sigma, pi)?;
    check_normalized(pi)?;
    check_normalized(zeta)?;
    let tau = relative_covariance(sigma, zeta)?;
    let n = pi.len();
    let diag: f64 = (0..n).map(|i| pi[i] * tau[(i, i)]).sum();
    let quad: f64 = (0..n)
        .map(|i| pi[i] * (0..n).map(|j| tau[(i, j)] * pi[j]).sum::<f64>())
        .sum();
    Ok(0.5 * (diag - quad))
}

/// `½ Σ π^i τ^{π,ii}`.
pub fn excess_growth_compact(sigma: &DMatrix<f64>, pi: &[f64]) -> Result<f64> {
    check_square(sigma, pi)?;
    check_normalized(pi)?;
    let tau = relative_covariance(sigma, pi)?;
    Ok(0.5 * (0..pi.len()).map(|i| pi[i] * tau[(i, i)]).sum::<f64>())
}

/// Excess growth rate of `pi`. With a reference portfolio the value is
/// computed through τ relative to it and cross-checked against the direct
/// formula (agreement within `1e-10·(1+max|σ|)`).
pub fn excess_growth_rate(sigma: &DMatrix<f64>, pi: &[f64], via: Option<&[f64]>) -> Result<f64> {
    let direct = excess_growth_direct(sigma, pi)?;
    let Some(zeta) = via else {
        return Ok(direct);
    };
    let routed = excess_growth_via_reference(sigma, pi, zeta)?;
    if (routed - direct).abs() > 1e-10 * (1.0 + sigma.amax()) {
        return Err(SptError::NumeraireMismatch { direct, via: routed });
    }
    Ok(routed)
}

/// Per-step realized excess growth rate of a weights path:
/// `½(Σ π^i (Δℓ^i)² − (Σ π^i Δℓ^i)²)/Δt` with `ℓ = log X`, left-point weights.
pub fn realized_excess_growth(path: &MarketPath, weights: &WeightsPath) -> Result<Vec<f64>> {
    if weights.len() != path.len() || weights.n() != path.n() {
        return Err(SptError::GridMismatch("weights and path differ in shape".into()));
    }
    let prices = path.prices();
    let times = path.times();
    Ok((0..path.len() - 1)
        .map(|k| {
            let pi = weights.column(k);
            let (x0, x1) = (prices.column(k), prices.column(k + 1));
            let mut sq = 0.0;
            let mut lin = 0.0;
            for i in 0..pi.len() {
                let dl = (x1[i] / x0[i]).ln();
                sq += pi[i] * dl * dl;
                lin += pi[i] * dl;
            }
            0.5 * (sq - lin * lin) / (times[k + 1] - times[k])
        })
        .collect())
}
