//! Generating functions on the open simplex × a box of characteristics,
//! their portfolio weights, and the named constructors.

mod compose;
mod config;
mod constructors;
mod numeric;
mod weights;

pub use compose::{CharDim, CharacteristicFactor, ExpFactor, FactorEvaluation, Multiplicative, UnitFactor};
pub use config::GenConfig;
pub use constructors::{BetaGenFun, BoostedEntropy, Constant, Entropy, GeometricMean, ReducedEntropy, RoaGenFun};
pub use numeric::{check_gradient_consistency, GradientCheckReport, HessianPerturbation, NumericGenFun};
pub use weights::{
    classical_weights, generalized_weights, guard_simplex, quality_overlay_weights, theoretical_overlay_a,
    SIMPLEX_GUARD,
};

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SptError};

/// One end of a characteristics interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    Unbounded,
    Open(f64),
    Closed(f64),
}

/// Interval of admissible values for one characteristic coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: Bound,
    pub upper: Bound,
}

impl Interval {
    pub const REAL: Interval = Interval {
        lower: Bound::Unbounded,
        upper: Bound::Unbounded,
    };

    pub fn open(lo: f64, hi: f64) -> Self {
        Self {
            lower: Bound::Open(lo),
            upper: Bound::Open(hi),
        }
    }

    /// `[lo, ∞)`.
    pub fn closed_below(lo: f64) -> Self {
        Self {
            lower: Bound::Closed(lo),
            upper: Bound::Unbounded,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        let lo_ok = match self.lower {
            Bound::Unbounded => true,
            Bound::Open(a) => v > a,
            Bound::Closed(a) => v >= a,
        };
        let hi_ok = match self.upper {
            Bound::Unbounded => true,
            Bound::Open(b) => v < b,
            Bound::Closed(b) => v <= b,
        };
        lo_ok && hi_ok
    }

    /// Finite interior range used for random spot checks.
    pub(crate) fn sample_range(&self) -> (f64, f64) {
        let lo = match self.lower {
            Bound::Unbounded => None,
            Bound::Open(a) | Bound::Closed(a) => Some(a),
        };
        let hi = match self.upper {
            Bound::Unbounded => None,
            Bound::Open(b) | Bound::Closed(b) => Some(b),
        };
        match (lo, hi) {
            (Some(a), Some(b)) => (a + 0.05 * (b - a), b - 0.05 * (b - a)),
            (Some(a), None) => (a + 0.05, a + 3.0),
            (None, Some(b)) => (b - 3.0, b - 0.05),
            (None, None) => (-2.0, 2.0),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lower {
            Bound::Unbounded => write!(f, "(-inf")?,
            Bound::Open(a) => write!(f, "({a}")?,
            Bound::Closed(a) => write!(f, "[{a}")?,
        }
        match self.upper {
            Bound::Unbounded => write!(f, ", inf)"),
            Bound::Open(b) => write!(f, ", {b})"),
            Bound::Closed(b) => write!(f, ", {b}]"),
        }
    }
}

/// Product of per-coordinate intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    coords: Vec<Interval>,
}

impl BoxDomain {
    pub fn new(coords: Vec<Interval>) -> Self {
        Self { coords }
    }

    pub fn uniform(k: usize, interval: Interval) -> Self {
        Self {
            coords: vec![interval; k],
        }
    }

    pub fn empty() -> Self {
        Self { coords: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn interval(&self, i: usize) -> &Interval {
        &self.coords[i]
    }

    pub fn check(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.coords.len() {
            return Err(SptError::dims("characteristics", self.coords.len(), y.len()));
        }
        for (i, (v, iv)) in y.iter().zip(&self.coords).enumerate() {
            if !iv.contains(*v) {
                return Err(SptError::OutsideDomain {
                    index: i,
                    value: *v,
                    domain: iv.to_string(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    None,
}

impl Monotonicity {
    pub fn opposite(self) -> Self {
        match self {
            Monotonicity::Increasing => Monotonicity::Decreasing,
            Monotonicity::Decreasing => Monotonicity::Increasing,
            Monotonicity::None => Monotonicity::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenFlags {
    pub concave_in_x: bool,
    pub monotone_in_y: Monotonicity,
    pub multiplicative: bool,
}

/// Value, gradient and Hessian of `S` at one point `(x, y)`; coordinates
/// `0..n` are market weights, `n..n+k` characteristics.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

impl Evaluation {
    /// `∂ log S = ∂S / S`.
    pub fn log_gradient(&self) -> Vec<f64> {
        self.gradient.iter().map(|g| g / self.value).collect()
    }

    /// `∂² log S = ∂²S/S − ∂S ∂Sᵀ/S²`.
    pub fn log_hessian(&self) -> DMatrix<f64> {
        let d = self.gradient.len();
        let s = self.value;
        DMatrix::from_fn(d, d, |i, j| {
            self.hessian[(i, j)] / s - self.gradient[i] * self.gradient[j] / (s * s)
        })
    }
}

/// A positive, twice-differentiable `S(x, y)`.
pub trait GeneratingFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// Characteristics dimension `k` for an `n`-stock market.
    fn char_dim(&self, n: usize) -> usize;

    fn domain(&self, n: usize) -> BoxDomain;

    fn flags(&self) -> GenFlags;

    fn value(&self, x: &[f64], y: &[f64]) -> f64;

    fn evaluate(&self, x: &[f64], y: &[f64]) -> Evaluation;
}

/// Evaluates after checking the domain and positivity of the value.
pub fn evaluate_checked(s: &dyn GeneratingFunction, x: &[f64], y: &[f64]) -> Result<Evaluation> {
    let n = x.len();
    if y.len() != s.char_dim(n) {
        return Err(SptError::dims("characteristics", s.char_dim(n), y.len()));
    }
    s.domain(n).check(y)?;
    let e = s.evaluate(x, y);
    if !(e.value.is_finite() && e.value > 0.0) {
        return Err(SptError::NonPositiveValue { value: e.value });
    }
    Ok(e)
}

pub(crate) fn require(cond: bool, name: &str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(SptError::param(name, reason()))
    }
}
