//! Stock-characteristics paths: deterministic time, realized betas and
//! synthetic return-on-assets diffusions.

mod roa;

pub use roa::{
    innovation_cross_variation, realized_qv_rate, synthetic_roa, synthetic_roa_market, synthetic_roa_markets, verify_roa_assumptions, AssumptionCheck, CrossVariation, RoaAssumptionReport,
    RoaDriver, RoaMarketSpec, RoaSpec,
};

use std::io::Write;

use crate::error::{Result, SptError};
use crate::generating_functions::{BoxDomain, Interval, Monotonicity};
use crate::market_sim::{validate_times, MarketPath};
use crate::matrix::SeriesMatrix;

/// Path of the characteristics process aligned with a market grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicsPath {
    times: Vec<f64>,
    values: SeriesMatrix,
    finite_variation: bool,
    monotone: Vec<Monotonicity>,
    domain: BoxDomain,
}

impl CharacteristicsPath {
    /// Validates domain membership and any declared monotonicity.
    pub fn new(
        times: Vec<f64>,
        values: SeriesMatrix,
        finite_variation: bool,
        monotone: Vec<Monotonicity>,
        domain: BoxDomain,
    ) -> Result<Self> {
        validate_times(&times)?;
        let k = values.rows();
        if values.cols() != times.len() {
            return Err(SptError::GridMismatch(format!(
                "{} characteristic columns for {} grid points",
                values.cols(),
                times.len()
            )));
        }
        if monotone.len() != k {
            return Err(SptError::dims("monotonicity flags", k, monotone.len()));
        }
        if domain.dim() != k {
            return Err(SptError::dims("characteristics domain", k, domain.dim()));
        }
        for col in values.columns() {
            domain.check(col)?;
        }
        for (i, m) in monotone.iter().enumerate() {
            let row = values.row(i);
            let bad = match m {
                Monotonicity::Increasing => row.windows(2).position(|w| w[1] < w[0]),
                Monotonicity::Decreasing => row.windows(2).position(|w| w[1] > w[0]),
                Monotonicity::None => None,
            };
            if let Some(step) = bad {
                return Err(SptError::MonotonicityViolated { index: i, step: step + 1 });
            }
        }
        Ok(Self {
            times,
            values,
            finite_variation,
            monotone,
            domain,
        })
    }

    pub fn k(&self) -> usize {
        self.values.rows()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &SeriesMatrix {
        &self.values
    }

    pub fn column(&self, t: usize) -> &[f64] {
        self.values.column(t)
    }

    pub fn finite_variation(&self) -> bool {
        self.finite_variation
    }

    pub fn monotone(&self) -> &[Monotonicity] {
        &self.monotone
    }

    /// Common monotonicity of all coordinates, `None` if they differ.
    pub fn common_monotonicity(&self) -> Monotonicity {
        match self.monotone.first() {
            Some(first) if self.monotone.iter().all(|m| m == first) => *first,
            _ => Monotonicity::None,
        }
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Errors unless this path shares the market path's grid.
    pub fn check_aligned(&self, path: &MarketPath) -> Result<()> {
        if self.times.as_slice() != path.times() {
            return Err(SptError::GridMismatch(format!(
                "characteristics grid ({} points) differs from market grid ({} points)",
                self.len(),
                path.len()
            )));
        }
        Ok(())
    }

    /// CSV export with columns `t,P1..Pk`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        crate::market_sim::write_series_csv(writer, &self.times, &self.values, "P")
    }
}

/// `P_t = t`.
pub fn time_characteristic(times: &[f64]) -> Result<CharacteristicsPath> {
    let values = SeriesMatrix::from_rows(&[times.to_vec()])?;
    CharacteristicsPath::new(
        times.to_vec(),
        values,
        true,
        vec![Monotonicity::Increasing],
        BoxDomain::uniform(1, Interval::closed_below(0.0)),
    )
}

/// Signed realized betas and the signs used.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaCharacteristic {
    pub path: CharacteristicsPath,
    pub signs: Vec<f64>,
    /// True when the signs were estimated from the full-sample covariation.
    pub signs_estimated: bool,
}

/// Raw realized covariations `β^i_t = Σ_{s≤t} ΔX^i_s ΔZ_s` with `Z = Σ_j X^j`.
pub fn realized_betas(path: &MarketPath) -> SeriesMatrix {
    let n = path.n();
    let prices = path.prices();
    let total = path.total_value();
    let mut out = SeriesMatrix::with_capacity(n, path.len());
    let mut acc = vec![0.0; n];
    out.push_column(&acc).expect("n rows");
    for t in 1..path.len() {
        let dz = total[t] - total[t - 1];
        for (i, a) in acc.iter_mut().enumerate() {
            *a += (prices.get(i, t) - prices.get(i, t - 1)) * dz;
        }
        out.push_column(&acc).expect("n rows");
    }
    out
}

/// `β̃^i = s^i β^i`. Without explicit signs, `s^i` is the sign of the
/// full-sample covariation (ties count as +1).
pub fn beta_characteristic(path: &MarketPath, signs: Option<&[f64]>) -> Result<BetaCharacteristic> {
    let n = path.n();
    let raw = realized_betas(path);
    let last = raw.column(raw.cols() - 1);
    let (signs, estimated) = match signs {
        Some(s) => {
            if s.len() != n {
                return Err(SptError::dims("beta signs", n, s.len()));
            }
            if let Some(v) = s.iter().find(|v| **v != 1.0 && **v != -1.0) {
                return Err(SptError::param("signs", format!("{v} is not +1 or -1")));
            }
            (s.to_vec(), false)
        }
        None => (last.iter().map(|b| if *b < 0.0 { -1.0 } else { 1.0 }).collect(), true),
    };
    let mut signed = raw;
    for t in 0..signed.cols() {
        for (v, s) in signed.column_mut(t).iter_mut().zip(&signs) {
            *v *= s;
        }
    }
    let cp = CharacteristicsPath::new(
        path.times().to_vec(),
        signed,
        true,
        vec![Monotonicity::None; n],
        BoxDomain::uniform(n, Interval::REAL),
    )?;
    Ok(BetaCharacteristic {
        path: cp,
        signs,
        signs_estimated: estimated,
    })
}
