use nalgebra::DMatrix;

use super::{require, BoxDomain, Evaluation, GenFlags, GeneratingFunction, Interval, Monotonicity};
use crate::error::Result;

fn entropy_parts(x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let h = -x.iter().map(|v| v * v.ln()).sum::<f64>();
    let grad = x.iter().map(|v| -v.ln() - 1.0).collect();
    let hess = x.iter().map(|v| -1.0 / v).collect();
    (h, grad, hess)
}

fn sech2(y: f64) -> f64 {
    let t = y.tanh();
    1.0 - t * t
}

/// `S_c(x) = c − Σ x^i log x^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Entropy {
    c: f64,
}

impl Entropy {
    pub fn new(c: f64) -> Result<Self> {
        require(c.is_finite() && c > 0.0, "c", || format!("{c} must be positive"))?;
        Ok(Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl GeneratingFunction for Entropy {
    fn name(&self) -> String {
        format!("entropy(c={})", self.c)
    }

    fn char_dim(&self, _n: usize) -> usize {
        0
    }

    fn domain(&self, _n: usize) -> BoxDomain {
        BoxDomain::empty()
    }

    fn flags(&self) -> GenFlags {
        GenFlags {
            concave_in_x: true,
            monotone_in_y: Monotonicity::None,
            multiplicative: false,
        }
    }

    fn value(&self, x: &[f64], _y: &[f64]) -> f64 {
        self.c - x.iter().map(|v| v * v.ln()).sum::<f64>()
    }

    fn evaluate(&self, x: &[f64], _y: &[f64]) -> Evaluation {
        let (h, grad, diag) = entropy_parts(x);
        let n = x.len();
        Evaluation {
            value: self.c + h,
            gradient: grad,
            hessian: DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }),
        }
    }
}

/// `(x^1 ⋯ x^n)^{1/n}`; generates the equally weighted portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeometricMean;

impl GeometricMean {
    pub fn new() -> Self {
        GeometricMean
    }
}

impl GeneratingFunction for GeometricMean {
    fn name(&self) -> String {
        "geometric_mean".into()
    }

    fn char_dim(&self, _n: usize) -> usize {
        0
    }

    fn domain(&self, _n: usize) -> BoxDomain {
        BoxDomain::empty()
    }

    fn flags(&self) -> GenFlags {
        GenFlags {
            concave_in_x: true,
            monotone_in_y: Monotonicity::None,
            multiplicative: false,
        }
    }

    fn value(&self, x: &[f64], _y: &[f64]) -> f64 {
        let n = x.len() as f64;
        (x.iter().map(|v| v.ln()).sum::<f64>() / n).exp()
    }

    fn evaluate(&self, x: &[f64], y: &[f64]) -> Evaluation {
        let n = x.len();
        let nf = n as f64;
        let s = self.value(x, y);
        Evaluation {
            value: s,
            gradient: x.iter().map(|v| s / (nf * v)).collect(),
            hessian: DMatrix::from_fn(n, n, |i, j| {
                let off = s / (nf * nf * x[i] * x[j]);
                if i == j {
                    off - s / (nf * x[i] * x[i])
                } else {
                    off
                }
            }),
        }
    }
}

/// `S̃_c(x, y) = c − Σ x^i log x^i − ε tanh(y)` with `y` = time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedEntropy {
    c: f64,
    epsilon: f64,
}

impl ReducedEntropy {
    pub fn new(c: f64, epsilon: f64) -> Result<Self> {
        require(c.is_finite() && c > 0.0, "c", || format!("{c} must be positive"))?;
        require(epsilon.is_finite() && epsilon >= 0.0, "epsilon", || format!("{epsilon} must be >= 0"))?;
        Ok(Self { c, epsilon })
    }
}

impl GeneratingFunction for ReducedEntropy {
    fn name(&self) -> String {
        format!("reduced_entropy(c={}, epsilon={})", self.c, self.epsilon)
    }

    fn char_dim(&self, _n: usize) -> usize {
        1
    }

    fn domain(&self, _n: usize) -> BoxDomain {
        BoxDomain::uniform(1, Interval::closed_below(0.0))
    }

    fn flags(&self) -> GenFlags {
        GenFlags {
            concave_in_x: true,
            monotone_in_y: Monotonicity::Decreasing,
            multiplicative: false,
        }
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.c - x.iter().map(|v| v * v.ln()).sum::<f64>() - self.epsilon * y[0].tanh()
    }

    fn evaluate(&self, x: &[f64], y: &[f64]) -> Evaluation {
        let n = x.len();
        let (h, mut grad, diag) = entropy_parts(x);
        let (t, s2) = (y[0].tanh(), sech2(y[0]));
        grad.push(-self.epsilon * s2);
        let mut hess = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            hess[(i, i)] = diag[i];
        }
        hess[(n, n)] = 2.0 * self.epsilon * s2 * t;
        Evaluation {
            value: self.c + h - self.epsilon * t,
            gradient: grad,
            hessian: hess,
        }
    }
}

/// `S_c(x) + αc(tanh(−y) − 1)` with `y` = time and `α ∈ (0, ½)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedEntropy {
    c: f64,
    alpha: f64,
}

impl BoostedEntropy {
    pub fn new(c: f64, alpha: f64) -> Result<Self> {
        require(c.is_finite() && c > 0.0, "c", || format!("{c} must be positive"))?;
        require(alpha > 0.0 && alpha < 0.5, "alpha", || format!("{alpha} must lie in (0, 1/2)"))?;
        Ok(Self { c, alpha })
    }
}

impl GeneratingFunction for BoostedEntropy {
    fn name(&self) -> String {
        format!("boosted_entropy(c={}, alpha={})", self.c, self.alpha)
    }

    fn char_dim(&self, _n: usize) -> usize {
        1
    }

    fn domain(&self, _n: usize) -> BoxDomain {
        BoxDomain::uniform(1, Interval::closed_below(0.0))
    }

    fn flags(&self) -> GenFlags {
        GenFlags {
            concave_in_x: true,
            monotone_in_y: Monotonicity::Decreasing,
            multiplicative: false,
        }
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.c - x.iter().map(|v| v * v.ln()).sum::<f64>() + self.alpha * self.c * (-y[0].tanh() - 1.0)
    }

    fn evaluate(&self, x: &[f64], y: &[f64]) -> Evaluation {
        let n = x.len();
        let (h, mut grad, diag) = entropy_parts(x);
        let ac = self.alpha * self.c;
        let (t, s2) = (y[0].tanh(), sech2(y[0]));
        grad.push(-ac * s2);
        let mut hess = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            hess[(i, i)] = diag[i];
        }
        hess[(n, n)] = 2.0 * ac * s2 * t;
        Evaluation {
            value: self.c + h + ac * (-t - 1.0),
            gradient: grad,
            hessian: hess,
        }
    }
}

/// `S(x, y) = A + Σ (x^i)^p (c + e^{−y^i})` with `y` = signed betas.
///
/// Defined and positive on all of `ℝ^n` in `y`; realized discrete betas can
/// dip below zero early on a path, so the domain is not restricted to `y ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaGenFun {
    a_shift: f64,
    c: f64,
    p: f64,
}

impl BetaGenFun {
    pub fn new(a_shift: f64, c: f64, p: f64) -> Result<Self> {
        require(a_shift.is_finite() && a_shift >= 0.0, "A", || format!("{a_shift} must be >= 0"))?;
        require(c.is_finite() && c > 0.0, "c", || format!("{c} must be positive"))?;
        require(p > 0.0 && p < 1.0, "p", || format!("{p} must lie in (0, 1)"))?;
        Ok(Self { a_shift, c, p })
    }

    pub fn params(&self) -> (f64, f64, f64) {
        (self.a_shift, self.c, self.p)
    }

    /// `(A + c, A + (1+c) n^{1−p})`, the range of `S` over the simplex × `[0,∞)^n`.
    pub fn value_bounds(&self, n: usize) -> (f64, f64) {
        (
            self.a_shift + self.c,
            self.a_shift + (1.0 + self.c) * (n as f64).powf(1.0 - self.p),
        )
    }
}

impl GeneratingFunction for BetaGenFun {
    fn name(&self) -> String {
        format!("beta(A={}, c={}, p={})", self.a_shift, self.c, self.p)
    }

    fn char_dim(&self, n: usize) -> usize {
        n
    }

    fn domain(&self, n: usize) -> BoxDomain {
        BoxDomain::uniform(n, Interval::REAL)
    }

    fn flags(&self) -> GenFlags {
        GenFlags {
            concave_in_x: true,
            monotone_in_y: Monotonicity::Decreasing,
            multiplicative: false,
        }
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.a_shift
            + x.iter()
                .zip(y)
                .map(|(xi, yi)| xi.powf(self.p) * (self.c + (-yi).exp()))
                .sum::<f64>()
    }

    fn evaluate(&self, x: &[f64], y: &[f64]) -> Evaluation {
        let n = x.len();
        let p = self.p;
        let mut grad = vec![0.0; 2 * n];
        let mut hess = DMatrix::zeros(2 * n, 2 * n);
        let mut value = self.a_shift;
        for i in 0..n {
            let xp = x[i].powf(p);
            let e = (-y[i]).exp();
            let w = self.c + e;
            value += xp * w;
            grad[i] = p * xp / x[i] * w;
            grad[n + i] = -xp * e;
            hess[(i, i)] = p * (p - 1.0) * xp / (x[i] * x[i]) * w;
            let cross = -p * xp / x[i] * e;
            hess[(i, n + i)] = cross;
            hess[(n + i, i)] = cross;
            hess[(n + i, n + i)] = xp * e;
        }
        Evaluation {
            value,
            gradient: grad,
            hessian: hess,
        }
    }
}

/// `S(x, y) = exp(Σ x^i e^{−y^i})` with `y` = return on assets.
#[derive(Debug, Clone, PartialEq)]
pub struct RoaGenFun {
    varsigma: Option<f64>,
}

impl RoaGenFun {
    /// Domain `(0, ς)^n`.
    pub fn new(varsigma: f64) -> Result<Self> {
        require(varsigma.is_finite() && varsigma > 0.0, "varsigma", || format!("{varsigma} must be positive"))?;
        Ok(Self { varsigma: Some(varsigma) })
    }

    /// Same function on all of `ℝ^n`; used for observed ROA data, which need
    /// not respect a model bound.
    pub fn unbounded() -> Self {
        Self { varsigma: None }
    }
}

impl GeneratingFunction for RoaGenFun {
    fn name(&self) -> String {
        match self.varsigma {
            Some(s) => format!("roa(varsigma={s})"),
            None => "roa".into(),
        }
    }

    fn char_dim(&self, n: usize) -> usize {
        n
    }

    fn domain(&self, n: usize) -> BoxDomain {
        match self.varsigma {
            Some(s) => BoxDomain::uniform(n, Interval::open(0.0, s)),
            None => BoxDomain::uniform(n, Interval::REAL),
        }
    }

    fn flags(&self) -> GenFlags {
        GenFlags {
            concave_in_x: false,
            monotone_in_y: Monotonicity::Decreasing,
            multiplicative: false,
        }
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(xi, yi)| xi * (-yi).exp()).sum::<f64>().exp()
    }

    fn evaluate(&self, x: &[f64], y: &[f64]) -> Evaluation {
        // S = e^L with L = Σ x e^{−y}: ∂S = S ∂L, ∂²S = S (∂L ∂Lᵀ + ∂²L)
        let n = x.len();
        let e: Vec<f64> = y.iter().map(|v| (-v).exp()).collect();
        let l: f64 = x.iter().zip(&e).map(|(a, b)| a * b).sum();
        let s = l.exp();
        let mut dl = vec![0.0; 2 * n];
        for i in 0..n {
            dl[i] = e[i];
            dl[n + i] = -x[i] * e[i];
        }
        let mut hess = DMatrix::from_fn(2 * n, 2 * n, |i, j| s * dl[i] * dl[j]);
        for i in 0..n {
            hess[(i, n + i)] -= s * e[i];
            hess[(n + i, i)] -= s * e[i];
            hess[(n + i, n + i)] += s * x[i] * e[i];
        }
        Evaluation {
            value: s,
            gradient: dl.iter().map(|d| s * d).collect(),
            hessian: hess,
        }
    }
}

/// A constant positive function; generates the market portfolio.
#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    value: f64,
}

impl Constant {
    pub fn new(value: f64) -> Result<Self> {
        require(value.is_finite() && value > 0.0, "value", || format!("{value} must be positive"))?;
        Ok(Self { value })
    }
}

impl GeneratingFunction for Constant {
    fn name(&self) -> String {
        "market".into()
    }

    fn char_dim(&self, _n: usize) -> usize {
        0
    }

    fn domain(&self, _n: usize) -> BoxDomain {
        BoxDomain::empty()
    }

    fn flags(&self) -> GenFlags {
        GenFlags {
            concave_in_x: true,
            monotone_in_y: Monotonicity::None,
            multiplicative: false,
        }
    }

    fn value(&self, _x: &[f64], _y: &[f64]) -> f64 {
        self.value
    }

    fn evaluate(&self, x: &[f64], _y: &[f64]) -> Evaluation {
        let n = x.len();
        Evaluation {
            value: self.value,
            gradient: vec![0.0; n],
            hessian: DMatrix::zeros(n, n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| v / s).collect()
    }

    #[test]
    fn parameter_ranges_enforced() {
        assert!(Entropy::new(0.0).is_err());
        assert!(ReducedEntropy::new(1.0, -0.1).is_err());
        assert!(BoostedEntropy::new(1.0, 0.5).is_err());
        assert!(BoostedEntropy::new(1.0, 0.0).is_err());
        assert!(BetaGenFun::new(-1.0, 1.0, 0.5).is_err());
        assert!(BetaGenFun::new(0.0, 0.0, 0.5).is_err());
        assert!(BetaGenFun::new(0.0, 1.0, 1.0).is_err());
        assert!(RoaGenFun::new(0.0).is_err());
        assert!(Constant::new(-1.0).is_err());
    }

    #[test]
    fn entropy_value_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Entropy::new(0.7).unwrap();
        for n in [2usize, 5, 20] {
            for _ in 0..200 {
                let x = random_simplex(&mut rng, n);
                let v = s.value(&x, &[]);
                assert!(v >= 0.7 && v <= 0.7 + (n as f64).ln() + 1e-12);
            }
        }
    }

    #[test]
    fn beta_value_range_on_nonnegative_betas() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = BetaGenFun::new(1e-4, 1e-4, 0.7).unwrap();
        let n = 6;
        let (lo, hi) = s.value_bounds(n);
        for _ in 0..500 {
            let x = random_simplex(&mut rng, n);
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
            let v = s.value(&x, &y);
            assert!(v >= lo && v <= hi + 1e-12, "{v} not in [{lo}, {hi}]");
        }
    }

    #[test]
    fn roa_value_with_equal_characteristics() {
        let s = RoaGenFun::new(1.0).unwrap();
        let x = [0.1, 0.3, 0.6];
        let r = 0.37;
        assert!((s.value(&x, &[r; 3]) - (-r).exp().exp()).abs() < 1e-14);
    }

    #[test]
    fn evaluate_value_matches_value() {
        let x = [0.2, 0.3, 0.5];
        let y3 = [0.1, 0.4, 0.8];
        let funcs: Vec<(Box<dyn GeneratingFunction>, Vec<f64>)> = vec![
            (Box::new(Entropy::new(0.1).unwrap()), vec![]),
            (Box::new(GeometricMean), vec![]),
            (Box::new(ReducedEntropy::new(1.0, 0.5).unwrap()), vec![0.3]),
            (Box::new(BoostedEntropy::new(1.0, 0.1).unwrap()), vec![0.3]),
            (Box::new(BetaGenFun::new(1.0, 1.0, 0.5).unwrap()), y3.to_vec()),
            (Box::new(RoaGenFun::new(1.0).unwrap()), y3.to_vec()),
            (Box::new(Constant::new(2.0).unwrap()), vec![]),
        ];
        for (f, y) in funcs {
            let e = f.evaluate(&x, &y);
            assert!((e.value - f.value(&x, &y)).abs() < 1e-14, "{}", f.name());
            assert_eq!(e.gradient.len(), 3 + f.char_dim(3));
            assert_eq!(e.hessian.nrows(), 3 + f.char_dim(3));
        }
    }
}
