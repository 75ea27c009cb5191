//! Market models on a discrete grid and the per-path market quantities
//! (weights, covariances, excess growth, portfolio values).

mod covariance;
mod io;

pub use covariance::{
    estimate_covariance, excess_growth_compact, excess_growth_direct, excess_growth_rate,
    excess_growth_via_reference, model_covariance, realized_excess_growth, relative_covariance,
    CovariancePath, DEFAULT_COVARIANCE_WINDOW,
};
pub use io::{decode_binary, encode_binary, read_path_csv, write_path_csv};
pub(crate) use io::write_series_csv;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SptError};
use crate::matrix::SeriesMatrix;
use crate::rng::{path_rng, StreamDomain};

/// Lower clamp applied to market weights inside the VSM coefficients.
pub const VSM_WEIGHT_FLOOR: f64 = 1e-8;

/// Largest per-substep log-price standard deviation `√(h/μ)` in the VSM;
/// coarser steps are split along a Brownian bridge.
pub const VSM_MAX_LOG_STEP: f64 = 0.25;

/// Substeps never shrink below `dt / VSM_MAX_SUBSTEPS`.
pub const VSM_MAX_SUBSTEPS: usize = 1 << 20;

/// Tolerance for "columns sum to one".
pub const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarketModel {
    /// `d log X^i = α/(2μ^i) dt + dB^i/√μ^i`.
    VolatilityStabilized { alpha: f64 },
    /// `d log X = γ dt + ξ dB` with constant coefficients.
    ConstantLogDiffusion { gamma: Vec<f64>, xi: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub n: usize,
    pub model: MarketModel,
    pub initial_prices: Vec<f64>,
}

impl MarketSpec {
    /// Volatility-stabilized market started from equal unit prices.
    pub fn volatility_stabilized(n: usize, alpha: f64) -> Self {
        Self {
            n,
            model: MarketModel::VolatilityStabilized { alpha },
            initial_prices: vec![1.0; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(SptError::param("n", format!("need at least 2 stocks, got {}", self.n)));
        }
        if self.initial_prices.len() != self.n {
            return Err(SptError::dims("initial_prices", self.n, self.initial_prices.len()));
        }
        if let Some(p) = self.initial_prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(SptError::param("initial_prices", format!("price {p} is not positive")));
        }
        match &self.model {
            MarketModel::VolatilityStabilized { alpha } => {
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return Err(SptError::param("alpha", format!("{alpha} must be >= 0")));
                }
            }
            MarketModel::ConstantLogDiffusion { gamma, xi } => {
                if gamma.len() != self.n {
                    return Err(SptError::dims("gamma", self.n, gamma.len()));
                }
                if xi.len() != self.n {
                    return Err(SptError::dims("xi rows", self.n, xi.len()));
                }
                for row in xi {
                    if row.len() != self.n {
                        return Err(SptError::dims("xi columns", self.n, row.len()));
                    }
                }
                if gamma.iter().chain(xi.iter().flatten()).any(|v| !v.is_finite()) {
                    return Err(SptError::param("gamma/xi", "non-finite coefficient"));
                }
            }
        }
        Ok(())
    }
}

/// Uniform time grid `0, dt, ..., n_steps·dt = horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub horizon: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub master_seed: u64,
}

impl SimGrid {
    /// `n_steps = round(horizon/dt)`; `dt` is then reset to `horizon/n_steps`
    /// so the last grid point lands on the horizon.
    pub fn new(horizon: f64, dt: f64, master_seed: u64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(SptError::param("horizon", format!("{horizon} must be positive")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SptError::param("dt", format!("{dt} must be positive")));
        }
        if dt >= horizon {
            return Err(SptError::param("dt", format!("dt {dt} must be below the horizon {horizon}")));
        }
        let n_steps = (horizon / dt).round() as usize;
        Self::with_steps(horizon, n_steps, master_seed)
    }

    pub fn with_steps(horizon: f64, n_steps: usize, master_seed: u64) -> Result<Self> {
        if n_steps == 0 {
            return Err(SptError::param("n_steps", "must be at least 1"));
        }
        Ok(Self {
            horizon,
            dt: horizon / n_steps as f64,
            n_steps,
            master_seed,
        })
    }

    pub fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = (0..=self.n_steps).map(|k| k as f64 * self.dt).collect();
        t[self.n_steps] = self.horizon;
        t
    }
}

/// Where a simulated path's randomness came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSeed {
    pub master_seed: u64,
    pub path_index: u64,
}

/// Positive price paths on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    times: Vec<f64>,
    prices: SeriesMatrix,
    noise: Option<SeriesMatrix>,
    seed: Option<PathSeed>,
    clamp_events: usize,
    refined_steps: usize,
}

impl MarketPath {
    pub fn new(times: Vec<f64>, prices: SeriesMatrix) -> Result<Self> {
        validate_times(&times)?;
        if prices.cols() != times.len() {
            return Err(SptError::GridMismatch(format!(
                "{} price columns for {} grid points",
                prices.cols(),
                times.len()
            )));
        }
        if prices.rows() < 1 {
            return Err(SptError::param("prices", "no stocks"));
        }
        for t in 0..prices.cols() {
            if let Some(p) = prices.column(t).iter().find(|p| !(p.is_finite() && **p > 0.0)) {
                return Err(SptError::param("prices", format!("non-positive price {p} at step {t}")));
            }
        }
        Ok(Self {
            times,
            prices,
            noise: None,
            seed: None,
            clamp_events: 0,
            refined_steps: 0,
        })
    }

    pub fn with_seed(mut self, seed: PathSeed) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn n(&self) -> usize {
        self.prices.rows()
    }

    /// Number of grid points `N + 1`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn prices(&self) -> &SeriesMatrix {
        &self.prices
    }

    /// Brownian increments, when retained by the simulator.
    pub fn noise(&self) -> Option<&SeriesMatrix> {
        self.noise.as_ref()
    }

    pub fn seed(&self) -> Option<PathSeed> {
        self.seed
    }

    /// Number of (step, stock) pairs where the VSM weight clamp was active.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    /// Number of grid steps the VSM simulator split into substeps.
    pub fn refined_steps(&self) -> usize {
        self.refined_steps
    }

    /// Total market capitalization `Σ_i X^i_t` per grid point.
    pub fn total_value(&self) -> Vec<f64> {
        self.prices.columns().map(|c| c.iter().sum()).collect()
    }
}

pub(crate) fn validate_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(SptError::GridMismatch("need at least two grid points".into()));
    }
    if times[0] != 0.0 {
        return Err(SptError::GridMismatch(format!("grid starts at {} instead of 0", times[0])));
    }
    if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(SptError::GridMismatch(format!("times not increasing at step {k}")));
    }
    Ok(())
}

/// Portfolio weights, one column per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightsPath {
    weights: SeriesMatrix,
}

impl WeightsPath {
    /// Checks that every column sums to one within `SUM_TOLERANCE` (scaled by
    /// the gross exposure so leveraged weights are judged fairly).
    pub fn new(weights: SeriesMatrix) -> Result<Self> {
        for col in weights.columns() {
            check_normalized(col)?;
        }
        Ok(Self { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    pub fn len(&self) -> usize {
        self.weights.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.cols() == 0
    }

    pub fn column(&self, t: usize) -> &[f64] {
        self.weights.column(t)
    }

    pub fn matrix(&self) -> &SeriesMatrix {
        &self.weights
    }

    /// True when every entry lies strictly inside (0, 1).
    pub fn in_open_simplex(&self) -> bool {
        self.weights.as_slice().iter().all(|w| *w > 0.0 && *w < 1.0)
    }
}

pub(crate) fn check_normalized(w: &[f64]) -> Result<()> {
    let sum: f64 = w.iter().sum();
    let gross: f64 = w.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if !sum.is_finite() || (sum - 1.0).abs() > SUM_TOLERANCE * gross {
        return Err(SptError::NotNormalized { sum });
    }
    Ok(())
}

/// Portfolio value process.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePath {
    values: Vec<f64>,
}

impl ValuePath {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SptError::param("values", "empty value path"));
        }
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SptError::ValueDepleted { step: k, value: values[k] });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Simulates `n_paths` independent paths; path `i` always uses stream `i`.
pub fn simulate_market(spec: &MarketSpec, grid: &SimGrid, n_paths: usize) -> Result<Vec<MarketPath>> {
    spec.validate()?;
    if n_paths == 0 {
        return Err(SptError::param("n_paths", "must be at least 1"));
    }
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(spec, grid, i, false))
        .collect()
}

/// Simulates a single path from stream `path_index`, optionally keeping the
/// Brownian increments.
pub fn simulate_path(spec: &MarketSpec, grid: &SimGrid, path_index: u64, retain_noise: bool) -> Result<MarketPath> {
    spec.validate()?;
    let n = spec.n;
    let dt = grid.dt;
    let sqrt_dt = dt.sqrt();
    let mut rng = path_rng(grid.master_seed, StreamDomain::Market, path_index);

    let mut prices = SeriesMatrix::with_capacity(n, grid.n_steps + 1);
    prices.push_column(&spec.initial_prices)?;
    let mut noise = retain_noise.then(|| SeriesMatrix::with_capacity(n, grid.n_steps));
    let mut db = vec![0.0; n];
    let mut dlog = vec![0.0; n];
    let mut x = spec.initial_prices.clone();
    let mut clamp_events = 0usize;
    let mut refined_steps = 0usize;

    for _ in 0..grid.n_steps {
        for v in db.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = z * sqrt_dt;
        }
        match &spec.model {
            MarketModel::VolatilityStabilized { alpha } => {
                let events = vsm_step(&mut x, *alpha, dt, &db, &mut rng, &mut dlog);
                clamp_events += events.0;
                refined_steps += usize::from(events.1);
            }
            MarketModel::ConstantLogDiffusion { gamma, xi } => {
                log_increments(&mut dlog, gamma, xi, dt, &db);
                // multiplicative update keeps zero increments exact
                for i in 0..n {
                    x[i] *= dlog[i].exp();
                }
            }
        }
        prices.push_column(&x)?;
        if let Some(nz) = noise.as_mut() {
            nz.push_column(&db)?;
        }
    }

    let mut path = MarketPath::new(grid.times(), prices)?.with_seed(PathSeed {
        master_seed: grid.master_seed,
        path_index,
    });
    path.noise = noise;
    path.clamp_events = clamp_events;
    path.refined_steps = refined_steps;
    Ok(path)
}

/// `Δ log X^i = α/(2μ^i) h + ΔB^i/√μ^i` with clamped weights; returns the
/// number of clamped coordinates.
fn vsm_increments(out: &mut [f64], x: &[f64], alpha: f64, h: f64, db: &[f64]) -> usize {
    let total: f64 = x.iter().sum();
    let mut clamped = 0;
    for i in 0..x.len() {
        let mut mu = x[i] / total;
        if mu < VSM_WEIGHT_FLOOR {
            mu = VSM_WEIGHT_FLOOR;
            clamped += 1;
        }
        out[i] = alpha / (2.0 * mu) * h + db[i] / mu.sqrt();
    }
    clamped
}

/// One VSM grid step driven by the increment `db`. When the smallest weight
/// makes a single log-Euler step too coarse, the step is walked in adaptive
/// substeps `h ≤ κ² μ_min` whose increments follow a Brownian bridge ending
/// at `db`, with weights recomputed after each. Returns (clamp events,
/// whether refined).
fn vsm_step(x: &mut [f64], alpha: f64, dt: f64, db: &[f64], rng: &mut impl Rng, dlog: &mut [f64]) -> (usize, bool) {
    let n = x.len();
    let max_h = |x: &[f64]| {
        let total: f64 = x.iter().sum();
        let mu_min = (x.iter().copied().fold(f64::INFINITY, f64::min) / total).max(VSM_WEIGHT_FLOOR);
        (VSM_MAX_LOG_STEP * VSM_MAX_LOG_STEP * mu_min).max(dt / VSM_MAX_SUBSTEPS as f64)
    };
    if max_h(x) >= dt {
        let clamped = vsm_increments(dlog, x, alpha, dt, db);
        for i in 0..n {
            x[i] *= dlog[i].exp();
        }
        return (clamped, false);
    }
    let mut rest = db.to_vec();
    let mut sub = vec![0.0; n];
    let mut left = dt;
    let mut clamped = 0;
    while left > 0.0 {
        let mut h = max_h(x);
        if h >= left * (1.0 - 1e-9) {
            h = left;
        }
        for i in 0..n {
            sub[i] = if h == left {
                rest[i]
            } else {
                let z: f64 = rng.sample(StandardNormal);
                h / left * rest[i] + (h * (left - h) / left).sqrt() * z
            };
            rest[i] -= sub[i];
        }
        clamped += vsm_increments(dlog, x, alpha, h, &sub);
        for i in 0..n {
            x[i] *= dlog[i].exp();
        }
        left = if h == left { 0.0 } else { left - h };
    }
    (clamped, true)
}

/// `Δ log X = γ dt + ξ ΔB` (exact for constant coefficients).
pub(crate) fn log_increments(out: &mut [f64], gamma: &[f64], xi: &[Vec<f64>], dt: f64, db: &[f64]) {
    for i in 0..out.len() {
        let shock: f64 = xi[i].iter().zip(db).map(|(a, b)| a * b).sum();
        out[i] = gamma[i] * dt + shock;
    }
}

/// `μ^i_t = X^i_t / Σ_j X^j_t`.
pub fn market_weights_path(path: &MarketPath) -> WeightsPath {
    let n = path.n();
    let mut w = SeriesMatrix::with_capacity(n, path.len());
    let mut col = vec![0.0; n];
    for x in path.prices().columns() {
        market_weights_into(x, &mut col);
        w.push_column(&col).expect("column length matches");
    }
    WeightsPath { weights: w }
}

pub(crate) fn market_weights_into(x: &[f64], out: &mut [f64]) {
    let total: f64 = x.iter().sum();
    for (o, xi) in out.iter_mut().zip(x) {
        *o = xi / total;
    }
}

/// `Z_{t+1} = Z_t (1 + Σ_i π^i_t (X^i_{t+1}/X^i_t − 1))`.
pub fn portfolio_value_path(path: &MarketPath, weights: &WeightsPath, z0: f64) -> Result<ValuePath> {
    if !(z0.is_finite() && z0 > 0.0) {
        return Err(SptError::param("z0", format!("{z0} must be positive")));
    }
    if weights.len() != path.len() {
        return Err(SptError::GridMismatch(format!(
            "{} weight columns for {} grid points",
            weights.len(),
            path.len()
        )));
    }
    if weights.n() != path.n() {
        return Err(SptError::dims("weights", path.n(), weights.n()));
    }
    let prices = path.prices();
    let mut values = Vec::with_capacity(path.len());
    values.push(z0);
    let mut z = z0;
    for t in 0..path.len() - 1 {
        let (x0, x1, pi) = (prices.column(t), prices.column(t + 1), weights.column(t));
        let growth: f64 = (0..path.n()).map(|i| pi[i] * (x1[i] / x0[i] - 1.0)).sum();
        z *= 1.0 + growth;
        if !(z > 0.0) {
            return Err(SptError::ValueDepleted { step: t + 1, value: z });
        }
        values.push(z);
    }
    Ok(ValuePath { values })
}
