use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BoxDomain, CharDim, Evaluation, GenFlags, GeneratingFunction, Interval};
use crate::linalg::is_symmetric;

/// Step for first differences.
fn first_step(z: f64) -> f64 {
    1e-6 * (1.0 + z.abs())
}

/// Step for second differences of the value. A 1e-6 step leaves the
/// rounding error `ε·S/h²` near 1e-4, which is too coarse for the
/// master-equation drift, so second derivatives use a wider step.
fn second_step(z: f64) -> f64 {
    1e-4 * (1.0 + z.abs())
}

type ValueFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// Wraps a user-supplied value function and differentiates it numerically
/// with central differences.
#[derive(Clone)]
pub struct NumericGenFun {
    name: String,
    f: Arc<ValueFn>,
    dim: CharDim,
    interval: Interval,
    flags: GenFlags,
}

impl fmt::Debug for NumericGenFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NumericGenFun")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("interval", &self.interval)
            .finish()
    }
}

impl NumericGenFun {
    pub fn new<F>(name: impl Into<String>, dim: CharDim, interval: Interval, flags: GenFlags, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            f: Arc::new(f),
            dim,
            interval,
            flags,
        }
    }

    fn call(&self, z: &[f64], n: usize) -> f64 {
        (self.f)(&z[..n], &z[n..])
    }
}

impl GeneratingFunction for NumericGenFun {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn char_dim(&self, n: usize) -> usize {
        self.dim.resolve(n)
    }

    fn domain(&self, n: usize) -> BoxDomain {
        BoxDomain::uniform(self.char_dim(n), self.interval)
    }

    fn flags(&self) -> GenFlags {
        self.flags
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.f)(x, y)
    }

    fn evaluate(&self, x: &[f64], y: &[f64]) -> Evaluation {
        let n = x.len();
        let mut z: Vec<f64> = x.iter().chain(y).copied().collect();
        let d = z.len();
        let f0 = self.call(&z, n);

        let mut gradient = vec![0.0; d];
        for i in 0..d {
            let h = first_step(z[i]);
            let zi = z[i];
            z[i] = zi + h;
            let fp = self.call(&z, n);
            z[i] = zi - h;
            let fm = self.call(&z, n);
            z[i] = zi;
            gradient[i] = (fp - fm) / (2.0 * h);
        }

        let mut hessian = DMatrix::zeros(d, d);
        for i in 0..d {
            let hi = second_step(z[i]);
            let zi = z[i];
            z[i] = zi + hi;
            let fp = self.call(&z, n);
            z[i] = zi - hi;
            let fm = self.call(&z, n);
            z[i] = zi;
            hessian[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
            for j in 0..i {
                let hj = second_step(z[j]);
                let zj = z[j];
                let corner = |si: f64, sj: f64, z: &mut Vec<f64>| {
                    z[i] = zi + si * hi;
                    z[j] = zj + sj * hj;
                    let v = self.call(z, n);
                    z[i] = zi;
                    z[j] = zj;
                    v
                };
                let v = (corner(1.0, 1.0, &mut z) - corner(1.0, -1.0, &mut z) - corner(-1.0, 1.0, &mut z)
                    + corner(-1.0, -1.0, &mut z))
                    / (4.0 * hi * hj);
                hessian[(i, j)] = v;
                hessian[(j, i)] = v;
            }
        }
        Evaluation {
            value: f0,
            gradient,
            hessian,
        }
    }
}

/// Scales the Hessian of another generating function; a deliberately
/// inconsistent function for negative controls.
#[derive(Debug, Clone)]
pub struct HessianPerturbation {
    inner: Arc<dyn GeneratingFunction>,
    factor: f64,
}

impl HessianPerturbation {
    pub fn new(inner: Arc<dyn GeneratingFunction>, factor: f64) -> Self {
        Self { inner, factor }
    }
}

impl GeneratingFunction for HessianPerturbation {
    fn name(&self) -> String {
        format!("{} [hessian x{}]", self.inner.name(), self.factor)
    }

    fn char_dim(&self, n: usize) -> usize {
        self.inner.char_dim(n)
    }

    fn domain(&self, n: usize) -> BoxDomain {
        self.inner.domain(n)
    }

    fn flags(&self) -> GenFlags {
        self.inner.flags()
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.inner.value(x, y)
    }

    fn evaluate(&self, x: &[f64], y: &[f64]) -> Evaluation {
        let mut e = self.inner.evaluate(x, y);
        e.hessian *= self.factor;
        e
    }
}

/// Agreement of analytic derivatives with finite differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckReport {
    pub name: String,
    pub samples: usize,
    /// Largest gradient error relative to `max(1, ‖∇S‖∞)`.
    pub max_gradient_error: f64,
    /// Largest Hessian error relative to `max(1, ‖∇²S‖∞)`.
    pub max_hessian_error: f64,
    pub symmetric: bool,
    pub min_value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, domain: &BoxDomain) -> (Vec<f64>, Vec<f64>) {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let x = raw.iter().map(|v| v / total).collect();
    let y = (0..domain.dim())
        .map(|i| {
            let (lo, hi) = domain.interval(i).sample_range();
            rng.random_range(lo..hi)
        })
        .collect();
    (x, y)
}

/// Compares the analytic gradient with central differences of the value and
/// the analytic Hessian with central differences of the analytic gradient at
/// `samples` random interior points.
pub fn check_gradient_consistency(s: &dyn GeneratingFunction, n: usize, samples: usize, seed: u64) -> GradientCheckReport {
    const TOL: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = s.domain(n);
    let mut max_g: f64 = 0.0;
    let mut max_h: f64 = 0.0;
    let mut symmetric = true;
    let mut min_value = f64::INFINITY;

    for _ in 0..samples {
        let (x, y) = random_point(&mut rng, n, &domain);
        let e = s.evaluate(&x, &y);
        min_value = min_value.min(e.value);
        symmetric &= is_symmetric(&e.hessian, 1e-10);

        let mut z: Vec<f64> = x.iter().chain(&y).copied().collect();
        let d = z.len();
        let g_scale = e.gradient.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let h_scale = e.hessian.amax().max(1.0);
        for i in 0..d {
            let h = first_step(z[i]);
            let zi = z[i];
            z[i] = zi + h;
            let (xp, yp) = z.split_at(n);
            let vp = s.value(xp, yp);
            let gp = s.evaluate(xp, yp).gradient;
            z[i] = zi - h;
            let (xm, ym) = z.split_at(n);
            let vm = s.value(xm, ym);
            let gm = s.evaluate(xm, ym).gradient;
            z[i] = zi;
            let fd = (vp - vm) / (2.0 * h);
            max_g = max_g.max((fd - e.gradient[i]).abs() / g_scale);
            for j in 0..d {
                let fd_h = (gp[j] - gm[j]) / (2.0 * h);
                max_h = max_h.max((fd_h - e.hessian[(j, i)]).abs() / h_scale);
            }
        }
    }
    let passed = samples > 0 && max_g <= TOL && max_h <= TOL && symmetric && min_value > 0.0;
    GradientCheckReport {
        name: s.name(),
        samples,
        max_gradient_error: max_g,
        max_hessian_error: max_h,
        symmetric,
        min_value,
        tolerance: TOL,
        passed,
    }
}
