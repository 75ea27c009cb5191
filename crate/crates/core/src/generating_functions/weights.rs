use super::{evaluate_checked, GeneratingFunction};
use crate::error::{Result, SptError};

/// Minimum distance from the simplex boundary accepted by weight maps.
pub const SIMPLEX_GUARD: f64 = 1e-12;

/// Rejects weights that are not in the open simplex (up to `SIMPLEX_GUARD`).
pub fn guard_simplex(mu: &[f64]) -> Result<()> {
    let sum: f64 = mu.iter().sum();
    if !sum.is_finite() || (sum - 1.0).abs() > 1e-10 {
        return Err(SptError::NotNormalized { sum });
    }
    let min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    let max = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min <= SIMPLEX_GUARD || max >= 1.0 - SIMPLEX_GUARD {
        return Err(SptError::SimplexBoundary {
            min,
            max,
            tol: SIMPLEX_GUARD,
        });
    }
    Ok(())
}

/// `π^i = μ^i (∂^i log S + 1 − Σ_j μ^j ∂^j log S)` for a function of the
/// market weights alone.
pub fn classical_weights(s: &dyn GeneratingFunction, mu: &[f64]) -> Result<Vec<f64>> {
    let k = s.char_dim(mu.len());
    if k != 0 {
        return Err(SptError::param(
            "S",
            format!("{} has {k} characteristics; use generalized_weights", s.name()),
        ));
    }
    generalized_weights(s, mu, &[])
}

/// Weights generated by `S` at `(μ_t, P_t)`; only the x-partials enter.
pub fn generalized_weights(s: &dyn GeneratingFunction, mu: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    guard_simplex(mu)?;
    let e = evaluate_checked(s, mu, p)?;
    let n = mu.len();
    let dlog: Vec<f64> = e.gradient[..n].iter().map(|g| g / e.value).collect();
    Ok(weights_from_log_gradient(mu, &dlog))
}

pub(crate) fn weights_from_log_gradient(mu: &[f64], dlog: &[f64]) -> Vec<f64> {
    let avg: f64 = mu.iter().zip(dlog).map(|(m, d)| m * d).sum();
    mu.iter().zip(dlog).map(|(m, d)| m * (d + 1.0 - avg)).collect()
}

/// `η^i = ((1+a) Z^μ μ^i − a Z^π π^i) / Z^η` with `Z^η = (1+a) Z^μ − a Z^π`.
pub fn quality_overlay_weights(mu: &[f64], pi: &[f64], z_mu: f64, z_pi: f64, a: f64) -> Result<Vec<f64>> {
    if mu.len() != pi.len() {
        return Err(SptError::dims("overlay weights", mu.len(), pi.len()));
    }
    if !(a.is_finite() && a >= 0.0) {
        return Err(SptError::param("a", format!("{a} must be >= 0")));
    }
    let z_eta = (1.0 + a) * z_mu - a * z_pi;
    if !(z_eta > 0.0) {
        return Err(SptError::OverlayInsolvent { value: z_eta });
    }
    Ok(mu
        .iter()
        .zip(pi)
        .map(|(m, p)| ((1.0 + a) * z_mu * m - a * z_pi * p) / z_eta)
        .collect())
}

/// Overlay leverage `a = e^{−b}/(2 − e^{−b} − e^{−ς})` with `b = 1 + A`.
pub fn theoretical_overlay_a(a_shift: f64, varsigma: f64) -> f64 {
    let eb = (-(1.0 + a_shift)).exp();
    eb / (2.0 - eb - (-varsigma).exp())
}
