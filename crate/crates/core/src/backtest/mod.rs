//! Daily-rebalanced backtests with proportional trading costs and a
//! short-financing fee, plus the usual performance statistics.

mod stats;
mod strategies;

pub use stats::{
    design_with_intercept, ff3_stats, mean, ols_regress, performance_stats, sample_std, BacktestReport, FactorSeries,
    Ff3Report, OlsFit,
};
pub use strategies::{BuyAndHold, FixedWeights, GeneratedRule, StrategyInputs, WeightSchedule};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SptError};
use crate::matrix::SeriesMatrix;

/// Annualization constant.
pub const TRADING_DAYS: f64 = 252.0;

/// `eps1` is charged per unit of L1 turnover, `eps2` per unit of short
/// exposure per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub eps1: f64,
    pub eps2: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { eps1: 0.003, eps2: 0.005 }
    }
}

impl CostModel {
    pub fn new(eps1: f64, eps2: f64) -> Result<Self> {
        let c = Self { eps1, eps2 };
        c.validate()?;
        Ok(c)
    }

    pub fn free() -> Self {
        Self { eps1: 0.0, eps2: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SptError::param(name, format!("{v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Price history visible to a weight rule at day `t`: columns `0..=t` only.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    prices: &'a SeriesMatrix,
    t: usize,
}

impl<'a> History<'a> {
    pub fn new(prices: &'a SeriesMatrix, t: usize) -> Self {
        assert!(t < prices.cols(), "history day {t} beyond {} columns", prices.cols());
        Self { prices, t }
    }

    /// Current day.
    pub fn day(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.prices.rows()
    }

    /// Prices on day `s`. Panics when `s` lies in the future.
    pub fn prices(&self, s: usize) -> &'a [f64] {
        assert!(s <= self.t, "look-ahead: day {s} requested at day {}", self.t);
        self.prices.column(s)
    }
}

/// Produces the weights held from day `t` to `t+1`. Called once per day in
/// increasing order, so rules may carry state between calls.
pub trait WeightRule: Send {
    fn name(&self) -> &str;
    fn weights(&mut self, history: History<'_>) -> Result<Vec<f64>>;
}

/// Weights, readjusted weights, short leg, returns and wealth of one run.
/// Columns of the weight matrices are days `0..T`; `returns[t-1]` is the
/// return over `(t-1, t]` and `wealth[t]` the value on day `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRun {
    pub name: String,
    pub weights: SeriesMatrix,
    pub readjusted: SeriesMatrix,
    pub short_leg: SeriesMatrix,
    pub returns: Vec<f64>,
    pub wealth: Vec<f64>,
    /// Day on which wealth first reached zero or below; the run stops there.
    pub depleted: Option<usize>,
}

impl BacktestRun {
    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    /// Number of completed holding periods.
    pub fn horizon(&self) -> usize {
        self.returns.len()
    }

    pub fn terminal_value(&self) -> f64 {
        *self.wealth.last().expect("wealth starts at 1")
    }

    /// `Σ_i |π_t − π̂_t|` for each trading day of the run.
    pub fn turnover(&self) -> Vec<f64> {
        (0..self.horizon())
            .map(|t| {
                self.weights
                    .column(t)
                    .iter()
                    .zip(self.readjusted.column(t))
                    .map(|(w, r)| (w - r).abs())
                    .sum()
            })
            .collect()
    }

    /// Short mass `Σ_i π↓_t` for each trading day of the run.
    pub fn short_mass(&self) -> Vec<f64> {
        (0..self.horizon()).map(|t| self.short_leg.column(t).iter().sum()).collect()
    }
}

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Runs `rule` over `prices` (n × (T+1)) starting from all cash.
pub fn run_backtest(prices: &SeriesMatrix, rule: &mut dyn WeightRule, costs: CostModel) -> Result<BacktestRun> {
    costs.validate()?;
    let n = prices.rows();
    let steps = prices.cols().checked_sub(1).unwrap_or(0);
    if n == 0 || steps == 0 {
        return Err(SptError::Data(format!(
            "backtest needs at least one asset and two days, got {n} x {}",
            prices.cols()
        )));
    }
    if let Some((pos, v)) = prices.as_slice().iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(SptError::Data(format!(
            "price {v} of asset {} on day {} is not positive",
            pos % n,
            pos / n
        )));
    }

    let mut weights = SeriesMatrix::with_capacity(n, steps);
    let mut readjusted = SeriesMatrix::with_capacity(n, steps);
    let mut short_leg = SeriesMatrix::with_capacity(n, steps);
    let mut returns = Vec::with_capacity(steps);
    let mut wealth = Vec::with_capacity(steps + 1);
    wealth.push(1.0);
    let mut hat = vec![0.0; n];
    let mut depleted = None;

    for t in 0..steps {
        let pi = rule.weights(History::new(prices, t))?;
        if pi.len() != n {
            return Err(SptError::dims("strategy weights", n, pi.len()));
        }
        let sum: f64 = pi.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(SptError::NotNormalized { sum });
        }
        let down: Vec<f64> = pi.iter().map(|w| (-w).max(0.0)).collect();
        let (now, next) = (prices.column(t), prices.column(t + 1));

        let gross: f64 = (0..n).map(|i| pi[i] * (next[i] / now[i] - 1.0)).sum();
        let trade: f64 = pi.iter().zip(&hat).map(|(w, h)| (w - h).abs()).sum();
        let short: f64 = down.iter().sum();
        let r = gross - costs.eps1 * trade - costs.eps2 * short;
        let z_prev = wealth[t];
        let z = z_prev * (1.0 + r);

        weights.push_column(&pi)?;
        readjusted.push_column(&hat)?;
        short_leg.push_column(&down)?;
        returns.push(r);
        wealth.push(z);
        if z <= 0.0 {
            depleted = Some(t + 1);
            break;
        }
        for i in 0..n {
            hat[i] = pi[i] * (next[i] / now[i]) * z_prev / z;
        }
    }

    Ok(BacktestRun {
        name: rule.name().to_string(),
        weights,
        readjusted,
        short_leg,
        returns,
        wealth,
        depleted,
    })
}
