use std::sync::Arc;

use super::{History, WeightRule, TRADING_DAYS};
use crate::error::{Result, SptError};
use crate::generating_functions::{generalized_weights, quality_overlay_weights, GenConfig, GeneratingFunction};
use crate::matrix::SeriesMatrix;

/// Same weights every day.
#[derive(Debug, Clone)]
pub struct FixedWeights {
    name: String,
    weights: Vec<f64>,
}

impl FixedWeights {
    pub fn new(name: impl Into<String>, weights: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            weights,
        }
    }
}

impl WeightRule for FixedWeights {
    fn name(&self) -> &str {
        &self.name
    }

    fn weights(&mut self, _history: History<'_>) -> Result<Vec<f64>> {
        Ok(self.weights.clone())
    }
}

/// Explicit weights per day.
#[derive(Debug, Clone)]
pub struct WeightSchedule {
    name: String,
    rows: Vec<Vec<f64>>,
}

impl WeightSchedule {
    pub fn new(name: impl Into<String>, rows: Vec<Vec<f64>>) -> Self {
        Self { name: name.into(), rows }
    }
}

impl WeightRule for WeightSchedule {
    fn name(&self) -> &str {
        &self.name
    }

    fn weights(&mut self, history: History<'_>) -> Result<Vec<f64>> {
        self.rows
            .get(history.day())
            .cloned()
            .ok_or_else(|| SptError::Data(format!("no scheduled weights for day {}", history.day())))
    }
}

/// Holds the initial long-only allocation and lets it drift with prices.
#[derive(Debug, Clone)]
pub struct BuyAndHold {
    name: String,
    initial: Vec<f64>,
}

impl BuyAndHold {
    pub fn new(name: impl Into<String>, initial: Vec<f64>) -> Result<Self> {
        if initial.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(SptError::param("initial", "buy-and-hold weights must be long-only"));
        }
        Ok(Self {
            name: name.into(),
            initial,
        })
    }
}

impl WeightRule for BuyAndHold {
    fn name(&self) -> &str {
        &self.name
    }

    fn weights(&mut self, history: History<'_>) -> Result<Vec<f64>> {
        let (p0, pt) = (history.prices(0), history.prices(history.day()));
        let held: Vec<f64> = self.initial.iter().enumerate().map(|(i, w)| w * pt[i] / p0[i]).collect();
        let total: f64 = held.iter().sum();
        Ok(held.into_iter().map(|h| h / total).collect())
    }
}

/// Capitalizations and characteristics a generated strategy may draw on.
/// Both matrices are n × (T+1) and aligned with the price panel; rules read
/// column `t` only on day `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyInputs {
    pub caps: SeriesMatrix,
    pub roa: Option<SeriesMatrix>,
}

#[derive(Debug, Clone)]
enum CharSource {
    None,
    /// Years elapsed, `t / 252`.
    Time,
    Values(SeriesMatrix),
}

#[derive(Debug, Clone)]
struct OverlayState {
    a: f64,
    z_mu: f64,
    z_pi: f64,
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

/// Weights from a generating function of the capitalization weights and a
/// characteristic: elapsed time for the entropy variants, realized betas
/// (signs +1) for the beta portfolio, ROA for the ROA portfolio and overlay.
///
/// The overlay tracks cost-free shadow values of the market and of the ROA
/// portfolio to size its short leg.
#[derive(Debug, Clone)]
pub struct GeneratedRule {
    name: String,
    s: Arc<dyn GeneratingFunction>,
    caps: SeriesMatrix,
    chars: CharSource,
    overlay: Option<OverlayState>,
    next_day: usize,
}

/// `β^i_t = Σ_{s≤t} ΔX^i_s ΔZ_s` with capitalizations scaled by the initial
/// total so that `Z_0 = 1`.
fn causal_betas(caps: &SeriesMatrix) -> SeriesMatrix {
    let n = caps.rows();
    let scale: f64 = caps.column(0).iter().sum();
    let mut out = SeriesMatrix::with_capacity(n, caps.cols());
    let mut acc = vec![0.0; n];
    out.push_column(&acc).expect("n rows");
    for t in 1..caps.cols() {
        let (prev, now) = (caps.column(t - 1), caps.column(t));
        let dz: f64 = now.iter().zip(prev).map(|(a, b)| a - b).sum::<f64>() / scale;
        for i in 0..n {
            acc[i] += (now[i] - prev[i]) / scale * dz;
        }
        out.push_column(&acc).expect("n rows");
    }
    out
}

impl GeneratedRule {
    pub fn new(config: &GenConfig, inputs: &StrategyInputs) -> Result<Self> {
        config.validate()?;
        let n = inputs.caps.rows();
        if let Some((pos, v)) = inputs
            .caps
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(SptError::Data(format!(
                "capitalization {v} of asset {} on day {} is not positive",
                pos % n.max(1),
                pos / n.max(1)
            )));
        }
        let s = config.generating_function()?;
        let chars = match config {
            GenConfig::Market | GenConfig::Entropy { .. } | GenConfig::GeometricMean => CharSource::None,
            GenConfig::ReducedEntropy { .. } | GenConfig::BoostedEntropy { .. } => CharSource::Time,
            GenConfig::Beta { .. } => CharSource::Values(causal_betas(&inputs.caps)),
            GenConfig::Roa { .. } | GenConfig::QualityOverlay { .. } => {
                let roa = inputs
                    .roa
                    .as_ref()
                    .ok_or_else(|| SptError::Data(format!("strategy `{}` needs ROA data", config.label())))?;
                if roa.rows() != n || roa.cols() != inputs.caps.cols() {
                    return Err(SptError::GridMismatch(format!(
                        "ROA panel {}x{} vs capitalizations {}x{}",
                        roa.rows(),
                        roa.cols(),
                        n,
                        inputs.caps.cols()
                    )));
                }
                CharSource::Values(roa.clone())
            }
        };
        let k = s.char_dim(n);
        let have = match &chars {
            CharSource::None => 0,
            CharSource::Time => 1,
            CharSource::Values(m) => m.rows(),
        };
        if k != have {
            return Err(SptError::dims("characteristics for strategy", k, have));
        }
        let overlay = config.overlay_leverage()?.map(|a| OverlayState {
            a,
            z_mu: 1.0,
            z_pi: 1.0,
            prev: None,
        });
        Ok(Self {
            name: config.label(),
            s,
            caps: inputs.caps.clone(),
            chars,
            overlay,
            next_day: 0,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl WeightRule for GeneratedRule {
    fn name(&self) -> &str {
        &self.name
    }

    fn weights(&mut self, history: History<'_>) -> Result<Vec<f64>> {
        let t = history.day();
        if t != self.next_day {
            return Err(SptError::Data(format!(
                "strategy `{}` called for day {t}, expected day {}",
                self.name, self.next_day
            )));
        }
        if t >= self.caps.cols() || history.n() != self.caps.rows() {
            return Err(SptError::GridMismatch(format!(
                "prices ({} assets, day {t}) do not match capitalizations {}x{}",
                history.n(),
                self.caps.rows(),
                self.caps.cols()
            )));
        }
        self.next_day += 1;
        let caps = self.caps.column(t);
        let total: f64 = caps.iter().sum();
        let mu: Vec<f64> = caps.iter().map(|c| c / total).collect();
        let time;
        let p: &[f64] = match &self.chars {
            CharSource::None => &[],
            CharSource::Time => {
                time = [t as f64 / TRADING_DAYS];
                &time
            }
            CharSource::Values(m) => m.column(t),
        };
        let pi = generalized_weights(self.s.as_ref(), &mu, p)?;
        let Some(ov) = self.overlay.as_mut() else {
            return Ok(pi);
        };
        if let Some((mu_prev, pi_prev)) = &ov.prev {
            let (before, now) = (history.prices(t - 1), history.prices(t));
            let growth = |w: &[f64]| -> f64 { w.iter().enumerate().map(|(i, v)| v * now[i] / before[i]).sum() };
            ov.z_mu *= growth(mu_prev);
            ov.z_pi *= growth(pi_prev);
        }
        let eta = quality_overlay_weights(&mu, &pi, ov.z_mu, ov.z_pi, ov.a)?;
        ov.prev = Some((mu, pi));
        Ok(eta)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{run_backtest, CostModel};
    use super::*;

    fn panel() -> (SeriesMatrix, StrategyInputs) {
        let cols: Vec<Vec<f64>> = (0..30)
            .map(|t| {
                let x = t as f64;
                vec![1.0 + 0.01 * x, 2.0 - 0.02 * (x * 0.3).sin(), 1.5 + 0.005 * x * (x * 0.2).cos()]
            })
            .collect();
        let prices = SeriesMatrix::from_columns(3, &cols).unwrap();
        let roa_cols: Vec<Vec<f64>> = (0..30).map(|t| vec![-1.0, 0.5 + 0.001 * t as f64, 3.0]).collect();
        let inputs = StrategyInputs {
            caps: prices.clone(),
            roa: Some(SeriesMatrix::from_columns(3, &roa_cols).unwrap()),
        };
        (prices, inputs)
    }

    #[test]
    fn market_rule_equals_buy_and_hold() {
        let (prices, inputs) = panel();
        let mut gen = GeneratedRule::new(&GenConfig::Market, &inputs).unwrap();
        let a = run_backtest(&prices, &mut gen, CostModel::free()).unwrap();
        let w0: Vec<f64> = {
            let c = prices.column(0);
            let s: f64 = c.iter().sum();
            c.iter().map(|v| v / s).collect()
        };
        let mut bh = BuyAndHold::new("bh", w0).unwrap();
        let b = run_backtest(&prices, &mut bh, CostModel::free()).unwrap();
        let last = prices.cols() - 1;
        let expected = prices.column(last).iter().sum::<f64>() / prices.column(0).iter().sum::<f64>();
        assert!((a.terminal_value() - expected).abs() < 1e-13);
        assert!((b.terminal_value() - expected).abs() < 1e-13);
    }

    #[test]
    fn long_only_rules_pay_no_short_fee() {
        let (prices, inputs) = panel();
        for cfg in [
            GenConfig::Entropy { c: 0.1 },
            GenConfig::GeometricMean,
            GenConfig::Beta {
                a_shift: 1e-4,
                c: 1e-4,
                p: 0.7,
            },
            GenConfig::Roa { varsigma: None },
            GenConfig::ReducedEntropy { c: 1.0, epsilon: 0.1 },
        ] {
            let mut rule = GeneratedRule::new(&cfg, &inputs).unwrap();
            let run = run_backtest(&prices, &mut rule, CostModel::default()).unwrap();
            assert!(run.short_mass().iter().all(|s| *s == 0.0), "{}", cfg.label());
        }
    }

    #[test]
    fn overlay_shorts_and_tracks_shadow_values() {
        let (prices, inputs) = panel();
        let cfg = GenConfig::QualityOverlay {
            a: Some(2.5),
            a_shift: None,
            varsigma: None,
        };
        let mut rule = GeneratedRule::new(&cfg, &inputs).unwrap();
        let run = run_backtest(&prices, &mut rule, CostModel::default()).unwrap();
        assert!(run.short_mass().iter().any(|s| *s > 0.0));
        for t in 0..run.horizon() {
            assert!((run.weights.column(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_roa_and_out_of_order_calls() {
        let (prices, mut inputs) = panel();
        inputs.roa = None;
        assert!(GeneratedRule::new(&GenConfig::Roa { varsigma: None }, &inputs).is_err());
        let mut rule = GeneratedRule::new(&GenConfig::Entropy { c: 0.1 }, &inputs).unwrap();
        assert!(rule.weights(History::new(&prices, 3)).is_err());
    }

    #[test]
    fn betas_are_causal() {
        let (_, inputs) = panel();
        let full = causal_betas(&inputs.caps);
        let head = causal_betas(&inputs.caps.slice_columns(0, 10));
        for t in 0..10 {
            assert_eq!(full.column(t), head.column(t));
        }
        assert_eq!(full.column(0), &[0.0; 3]);
    }
}
