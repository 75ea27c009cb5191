use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{require, BoxDomain, Evaluation, GenFlags, GeneratingFunction, Interval, Monotonicity};
use crate::error::{Result, SptError};

/// Characteristics dimension of a factor: fixed, or one per stock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharDim {
    Fixed(usize),
    PerStock,
}

impl CharDim {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            CharDim::Fixed(k) => k,
            CharDim::PerStock => n,
        }
    }
}

/// Value, gradient and Hessian of a characteristics factor `g(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorEvaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

/// Smooth positive map on the characteristics box.
pub trait CharacteristicFactor: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn dim(&self) -> CharDim;
    fn domain(&self, k: usize) -> BoxDomain;
    fn monotone(&self) -> Monotonicity;
    fn evaluate(&self, y: &[f64]) -> FactorEvaluation;
}

/// `g(y) = exp(−rate · Σ y^j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFactor {
    rate: f64,
    dim: CharDim,
}

impl ExpFactor {
    pub fn new(rate: f64, dim: CharDim) -> Result<Self> {
        require(rate.is_finite(), "rate", || format!("{rate} is not finite"))?;
        Ok(Self { rate, dim })
    }
}

impl CharacteristicFactor for ExpFactor {
    fn name(&self) -> String {
        format!("exp(-{}*sum y)", self.rate)
    }

    fn dim(&self) -> CharDim {
        self.dim
    }

    fn domain(&self, k: usize) -> BoxDomain {
        BoxDomain::uniform(k, Interval::REAL)
    }

    fn monotone(&self) -> Monotonicity {
        if self.rate > 0.0 {
            Monotonicity::Decreasing
        } else if self.rate < 0.0 {
            Monotonicity::Increasing
        } else {
            Monotonicity::None
        }
    }

    fn evaluate(&self, y: &[f64]) -> FactorEvaluation {
        let k = y.len();
        let g = (-self.rate * y.iter().sum::<f64>()).exp();
        FactorEvaluation {
            value: g,
            gradient: vec![-self.rate * g; k],
            hessian: DMatrix::from_element(k, k, self.rate * self.rate * g),
        }
    }
}

/// `g ≡ 1` on `k` real characteristics.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitFactor {
    dim: CharDim,
    domain: Interval,
}

impl UnitFactor {
    pub fn new(dim: CharDim, domain: Interval) -> Self {
        Self { dim, domain }
    }
}

impl CharacteristicFactor for UnitFactor {
    fn name(&self) -> String {
        "1".into()
    }

    fn dim(&self) -> CharDim {
        self.dim
    }

    fn domain(&self, k: usize) -> BoxDomain {
        BoxDomain::uniform(k, self.domain)
    }

    fn monotone(&self) -> Monotonicity {
        Monotonicity::None
    }

    fn evaluate(&self, y: &[f64]) -> FactorEvaluation {
        let k = y.len();
        FactorEvaluation {
            value: 1.0,
            gradient: vec![0.0; k],
            hessian: DMatrix::zeros(k, k),
        }
    }
}

/// `S(x, y) = f(x) · g(y)`.
#[derive(Debug, Clone)]
pub struct Multiplicative {
    f: Arc<dyn GeneratingFunction>,
    g: Arc<dyn CharacteristicFactor>,
}

impl Multiplicative {
    pub fn new(f: Arc<dyn GeneratingFunction>, g: Arc<dyn CharacteristicFactor>) -> Result<Self> {
        if f.char_dim(2) != 0 {
            return Err(SptError::param(
                "f",
                format!("{} depends on characteristics; the x-factor must not", f.name()),
            ));
        }
        Ok(Self { f, g })
    }

    pub fn x_factor(&self) -> &Arc<dyn GeneratingFunction> {
        &self.f
    }
}

impl GeneratingFunction for Multiplicative {
    fn name(&self) -> String {
        format!("{} * {}", self.f.name(), self.g.name())
    }

    fn char_dim(&self, n: usize) -> usize {
        self.g.dim().resolve(n)
    }

    fn domain(&self, n: usize) -> BoxDomain {
        self.g.domain(self.char_dim(n))
    }

    fn flags(&self) -> GenFlags {
        GenFlags {
            concave_in_x: self.f.flags().concave_in_x,
            monotone_in_y: self.g.monotone(),
            multiplicative: true,
        }
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.f.value(x, &[]) * self.g.evaluate(y).value
    }

    fn evaluate(&self, x: &[f64], y: &[f64]) -> Evaluation {
        let n = x.len();
        let k = y.len();
        let fe = self.f.evaluate(x, &[]);
        let ge = self.g.evaluate(y);
        let mut grad = Vec::with_capacity(n + k);
        grad.extend(fe.gradient.iter().map(|v| v * ge.value));
        grad.extend(ge.gradient.iter().map(|v| v * fe.value));
        let hess = DMatrix::from_fn(n + k, n + k, |i, j| match (i < n, j < n) {
            (true, true) => ge.value * fe.hessian[(i, j)],
            (true, false) => fe.gradient[i] * ge.gradient[j - n],
            (false, true) => ge.gradient[i - n] * fe.gradient[j],
            (false, false) => fe.value * ge.hessian[(i - n, j - n)],
        });
        Evaluation {
            value: fe.value * ge.value,
            gradient: grad,
            hessian: hess,
        }
    }
}
