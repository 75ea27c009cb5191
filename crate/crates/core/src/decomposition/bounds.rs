//! Relative-arbitrage horizons and the pathwise inequalities behind them.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SptError};

/// Lower bound `Υ` on the cumulative excess growth of the market:
/// strictly increasing with `Υ(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Upsilon {
    /// `Υ(T) = rate·T`.
    Linear { rate: f64 },
    /// Piecewise-linear interpolation of `(times, values)`.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl Upsilon {
    /// `Υ(T) = (n−1)T/2`, exact for volatility-stabilized markets.
    pub fn volatility_stabilized(n: usize) -> Self {
        Upsilon::Linear {
            rate: (n as f64 - 1.0) / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Upsilon::Linear { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(SptError::param("upsilon rate", format!("{rate} must be positive")));
                }
            }
            Upsilon::Table { times, values } => {
                if times.len() != values.len() || times.len() < 2 {
                    return Err(SptError::param("upsilon table", "need matching times/values with at least 2 rows"));
                }
                if times[0] != 0.0 || values[0] != 0.0 {
                    return Err(SptError::param("upsilon table", "must start at (0, 0)"));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) || values.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(SptError::param("upsilon table", "times and values must be strictly increasing"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(SptError::BoundUndefined(format!("upsilon at negative time {t}")));
        }
        match self {
            Upsilon::Linear { rate } => Ok(rate * t),
            Upsilon::Table { times, values } => interpolate(times, values, t)
                .ok_or_else(|| SptError::BoundUndefined(format!("time {t} beyond upsilon table end {}", times[times.len() - 1]))),
        }
    }

    pub fn inverse(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(SptError::BoundUndefined(format!("upsilon inverse at negative level {z}")));
        }
        match self {
            Upsilon::Linear { rate } => Ok(z / rate),
            Upsilon::Table { times, values } => interpolate(values, times, z).ok_or_else(|| {
                SptError::BoundUndefined(format!("level {z} beyond upsilon table maximum {}", values[values.len() - 1]))
            }),
        }
    }

    /// Largest time at which `Υ` is defined.
    fn horizon(&self) -> f64 {
        match self {
            Upsilon::Linear { .. } => f64::INFINITY,
            Upsilon::Table { times, .. } => times[times.len() - 1],
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let last = xs.len() - 1;
    if x > xs[last] {
        return None;
    }
    let j = xs.partition_point(|v| *v < x);
    if j == 0 {
        return Some(ys[0]);
    }
    if xs[j] == x {
        return Some(ys[j]);
    }
    let w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    Some(ys[j - 1] + w * (ys[j] - ys[j - 1]))
}

/// Solves `Υ(T) + k·tanh(T) = z` for `T` by bisection; the root lies below
/// `Υ^{−1}(z)` since the added term is non-negative.
fn invert_with_tanh(upsilon: &Upsilon, k: f64, z: f64) -> Result<f64> {
    let f = |t: f64| -> Result<f64> { Ok(upsilon.eval(t)? + k * t.tanh()) };
    if z <= 0.0 {
        return Ok(0.0);
    }
    let hi = match upsilon.inverse(z) {
        Ok(t) => t,
        Err(_) => {
            let end = upsilon.horizon();
            if f(end)? < z {
                return Err(SptError::BoundUndefined(format!("level {z} beyond the table range")));
            }
            end
        }
    };
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < z {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Constants of the arbitrage examples. Each horizon uses the subset it
/// needs and reports any missing one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageBoundSpec {
    pub upsilon: Upsilon,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a_shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varsigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl ArbitrageBoundSpec {
    pub fn new(upsilon: Upsilon, n: usize) -> Self {
        Self {
            upsilon,
            n,
            c: None,
            epsilon: None,
            alpha: None,
            a_shift: None,
            p: None,
            varsigma: None,
            eta: None,
            delta: None,
        }
    }

    fn need(&self, name: &str, v: Option<f64>) -> Result<f64> {
        v.ok_or_else(|| SptError::param(name, "required by this bound"))
    }

    fn ln_n(&self) -> f64 {
        (self.n as f64).ln()
    }
}

/// Horizons beyond which the examples guarantee outperformance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArbitrageKind {
    /// Entropy portfolio vs market, finite `c`.
    EntropyTstar,
    /// Its `c → ∞` limit `Υ^{−1}(S(μ_0))`.
    EntropyTstarLimit,
    /// Reduced-entropy portfolio vs market.
    ReducedTtilde,
    /// Boosted entropy vs the entropy portfolio.
    BoostThat,
    /// Market vs the ROA portfolio.
    RoaTstar,
    /// Beta portfolio vs market.
    BetaT,
}

/// Horizon for `kind`; `s_mu0` is the standard entropy `−Σ μ_0 log μ_0`
/// where it matters.
pub fn arbitrage_time(kind: ArbitrageKind, spec: &ArbitrageBoundSpec, s_mu0: f64) -> Result<f64> {
    spec.upsilon.validate()?;
    let ln_n = spec.ln_n();
    let positive = |name: &str, v: f64| -> Result<f64> {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(SptError::param(name, format!("{v} must be positive")))
        }
    };
    let entropy_level = || -> Result<f64> {
        let c = positive("c", spec.need("c", spec.c)?)?;
        Ok((c + ln_n) * (s_mu0 / c).ln_1p())
    };
    match kind {
        ArbitrageKind::EntropyTstar => spec.upsilon.inverse(entropy_level()?),
        ArbitrageKind::EntropyTstarLimit => spec.upsilon.inverse(s_mu0),
        ArbitrageKind::ReducedTtilde => {
            let eps = spec.need("epsilon", spec.epsilon)?;
            if !(eps >= 0.0) {
                return Err(SptError::param("epsilon", "must be >= 0"));
            }
            invert_with_tanh(&spec.upsilon, eps, entropy_level()?)
        }
        ArbitrageKind::BoostThat => {
            let c = positive("c", spec.need("c", spec.c)?)?;
            let alpha = spec.need("alpha", spec.alpha)?;
            if !(alpha > 0.0 && alpha < 0.5) {
                return Err(SptError::param("alpha", format!("{alpha} must lie in (0, 1/2)")));
            }
            let level = (c * (1.0 - alpha) + ln_n) * (c + ln_n) / (alpha * c) * (1.0 / (1.0 - 2.0 * alpha)).ln();
            invert_with_tanh(&spec.upsilon, c + ln_n, level)
        }
        ArbitrageKind::RoaTstar => {
            let a = spec.need("A", spec.a_shift)?;
            let vs = spec.need("varsigma", spec.varsigma)?;
            let eta = spec.need("eta", spec.eta)?;
            let delta = spec.need("delta", spec.delta)?;
            let eps = spec.need("epsilon", spec.epsilon)?;
            let denom = delta * eta * (-vs).exp() - 2.0 * eps;
            if !(denom > 0.0) {
                return Err(SptError::BoundUndefined(format!(
                    "delta*eta*exp(-varsigma) - 2*epsilon = {denom} must be positive"
                )));
            }
            Ok(2.0 * (1.0 + a - (-vs).exp()) / denom)
        }
        ArbitrageKind::BetaT => {
            let a = spec.need("A", spec.a_shift)?;
            let c = positive("c", spec.need("c", spec.c)?)?;
            let p = spec.need("p", spec.p)?;
            let eps = positive("epsilon", spec.need("epsilon", spec.epsilon)?)?;
            if !(p > 0.0 && p < 1.0) {
                return Err(SptError::param("p", format!("{p} must lie in (0, 1)")));
            }
            let d = a + (1.0 + c) * (spec.n as f64).powf(1.0 - p);
            Ok(d / (p * (1.0 - p) * c * eps) * (d / (a + c)).ln())
        }
    }
}

/// Pathwise inequalities on the relative log-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathwiseBound {
    /// Entropy vs market: `≥ log(c/(c+S_0)) + Υ(t)/(c+log n)`.
    EntropyLower,
    /// Reduced entropy vs market: adds `ε·tanh(t)/(c+log n)`.
    ReducedEntropyLower,
    /// Boosted vs entropy portfolio.
    BoostedLower,
    /// Beta portfolio vs market, with `ε` the excess-growth floor.
    BetaLower,
    /// ROA portfolio vs market (an upper bound).
    RoaUpper,
}

impl PathwiseBound {
    pub fn is_upper(self) -> bool {
        matches!(self, PathwiseBound::RoaUpper)
    }

    /// Horizon after which the bound implies the relative-arbitrage claim.
    pub fn horizon_kind(self) -> ArbitrageKind {
        match self {
            PathwiseBound::EntropyLower => ArbitrageKind::EntropyTstar,
            PathwiseBound::ReducedEntropyLower => ArbitrageKind::ReducedTtilde,
            PathwiseBound::BoostedLower => ArbitrageKind::BoostThat,
            PathwiseBound::BetaLower => ArbitrageKind::BetaT,
            PathwiseBound::RoaUpper => ArbitrageKind::RoaTstar,
        }
    }
}

/// Right-hand side of the inequality at time `t`.
pub fn pathwise_bound_value(kind: PathwiseBound, spec: &ArbitrageBoundSpec, t: f64, s_mu0: f64) -> Result<f64> {
    let ln_n = spec.ln_n();
    Ok(match kind {
        PathwiseBound::EntropyLower | PathwiseBound::ReducedEntropyLower => {
            let c = spec.need("c", spec.c)?;
            let mut v = (c / (c + s_mu0)).ln() + spec.upsilon.eval(t)? / (c + ln_n);
            if kind == PathwiseBound::ReducedEntropyLower {
                v += spec.need("epsilon", spec.epsilon)? * t.tanh() / (c + ln_n);
            }
            v
        }
        PathwiseBound::BoostedLower => {
            let c = spec.need("c", spec.c)?;
            let alpha = spec.need("alpha", spec.alpha)?;
            let inner = c * (1.0 - alpha) + ln_n;
            (1.0 - 2.0 * alpha).ln()
                + alpha * c * spec.upsilon.eval(t)? / (inner * (c + ln_n))
                + alpha * c * t.tanh() / inner
        }
        PathwiseBound::BetaLower => {
            let a = spec.need("A", spec.a_shift)?;
            let c = spec.need("c", spec.c)?;
            let p = spec.need("p", spec.p)?;
            let eps = spec.need("epsilon", spec.epsilon)?;
            let d = a + (1.0 + c) * (spec.n as f64).powf(1.0 - p);
            ((a + c) / d).ln() + p * (1.0 - p) * c * eps * t / d
        }
        PathwiseBound::RoaUpper => {
            let a = spec.need("A", spec.a_shift)?;
            let vs = spec.need("varsigma", spec.varsigma)?;
            let eta = spec.need("eta", spec.eta)?;
            let delta = spec.need("delta", spec.delta)?;
            let eps = spec.need("epsilon", spec.epsilon)?;
            1.0 - (-vs).exp() + a + eps * t - delta * (-vs).exp() * eta * t / 2.0
        }
    })
}

/// One path's relative log-value against the bound's benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPath {
    pub times: Vec<f64>,
    /// `log(Z^π_t / Z^benchmark_t)`.
    pub log_relative: Vec<f64>,
    /// Standard entropy of the initial market weights.
    pub s_mu0: f64,
    /// False when the path failed its model-assumption checks.
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: PathwiseBound,
    pub paths_checked: usize,
    pub paths_excluded: usize,
    pub pairs_checked: usize,
    pub pairs_satisfied: usize,
    /// Smallest signed distance to the bound (positive means satisfied).
    pub worst_margin: f64,
    /// Paths whose horizon exceeds the arbitrage time.
    pub claim_paths: usize,
    /// Of those, paths where the claimed ordering holds strictly at the end.
    pub claim_satisfied: usize,
}

impl BoundReport {
    pub fn pair_fraction(&self) -> f64 {
        if self.pairs_checked == 0 {
            0.0
        } else {
            self.pairs_satisfied as f64 / self.pairs_checked as f64
        }
    }

    pub fn exclusion_rate(&self) -> f64 {
        let total = self.paths_checked + self.paths_excluded;
        if total == 0 {
            0.0
        } else {
            self.paths_excluded as f64 / total as f64
        }
    }

    /// `None` when no path reached the arbitrage time.
    pub fn claim_fraction(&self) -> Option<f64> {
        (self.claim_paths > 0).then(|| self.claim_satisfied as f64 / self.claim_paths as f64)
    }

    pub fn holds_everywhere(&self) -> bool {
        self.paths_checked > 0 && self.pairs_satisfied == self.pairs_checked
    }
}

/// Evaluates the bound at every grid point of every admissible path.
pub fn check_pathwise_bound(kind: PathwiseBound, paths: &[BoundPath], spec: &ArbitrageBoundSpec) -> Result<BoundReport> {
    let mut r = BoundReport {
        kind,
        paths_checked: 0,
        paths_excluded: 0,
        pairs_checked: 0,
        pairs_satisfied: 0,
        worst_margin: f64::INFINITY,
        claim_paths: 0,
        claim_satisfied: 0,
    };
    for path in paths {
        if path.times.len() != path.log_relative.len() {
            return Err(SptError::GridMismatch(format!(
                "{} relative values for {} grid points",
                path.log_relative.len(),
                path.times.len()
            )));
        }
        if !path.admissible {
            r.paths_excluded += 1;
            continue;
        }
        r.paths_checked += 1;
        for (t, v) in path.times.iter().zip(&path.log_relative) {
            let b = pathwise_bound_value(kind, spec, *t, path.s_mu0)?;
            let margin = if kind.is_upper() { b - v } else { v - b };
            r.pairs_checked += 1;
            if margin >= 0.0 {
                r.pairs_satisfied += 1;
            }
            r.worst_margin = r.worst_margin.min(margin);
        }
        let horizon = arbitrage_time(kind.horizon_kind(), spec, path.s_mu0)?;
        let (end, last) = (path.times[path.times.len() - 1], path.log_relative[path.log_relative.len() - 1]);
        if end > horizon {
            r.claim_paths += 1;
            let holds = if kind.is_upper() { last < 0.0 } else { last > 0.0 };
            if holds {
                r.claim_satisfied += 1;
            }
        }
    }
    Ok(r)
}
