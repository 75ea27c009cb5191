use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{BacktestRun, TRADING_DAYS};
use crate::error::{Result, SptError};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Square root of the unbiased sample variance.
pub fn sample_std(x: &[f64]) -> f64 {
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() as f64 - 1.0)).sqrt()
}

/// `√252 · mean / std`, or `None` when the series is constant.
fn annualized_ratio(x: &[f64]) -> Option<f64> {
    let m = mean(x);
    let s = sample_std(x);
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(s.is_finite() && s > 1e-12 * scale) {
        return None;
    }
    Some(TRADING_DAYS.sqrt() * m / s)
}

/// Least-squares fit. `coefficients[0]` is the intercept when the design
/// comes from [`design_with_intercept`].
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    /// Centered `1 − SSR/SST`; `None` when `y` is constant.
    pub r_squared: Option<f64>,
    pub residuals: Vec<f64>,
}

/// Column of ones followed by the given regressors.
pub fn design_with_intercept(regressors: &[&[f64]]) -> Result<DMatrix<f64>> {
    let rows = regressors.first().map_or(0, |c| c.len());
    if let Some(bad) = regressors.iter().find(|c| c.len() != rows) {
        return Err(SptError::dims("regressor length", rows, bad.len()));
    }
    Ok(DMatrix::from_fn(rows, regressors.len() + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            regressors[c - 1][r]
        }
    }))
}

pub fn ols_regress(y: &[f64], x: &DMatrix<f64>) -> Result<OlsFit> {
    let (rows, cols) = x.shape();
    if y.len() != rows {
        return Err(SptError::dims("regression response", rows, y.len()));
    }
    if cols == 0 || rows < cols + 1 {
        return Err(SptError::Data(format!("regression needs more rows than columns, got {rows} x {cols}")));
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * rows.max(cols) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank < cols {
        return Err(SptError::SingularDesign { rank, cols });
    }
    let yv = DVector::from_column_slice(y);
    let beta = svd
        .solve(&yv, tol)
        .map_err(|e| SptError::Data(format!("least squares solve failed: {e}")))?;
    let fitted = x * &beta;
    let residuals: Vec<f64> = yv.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let ym = mean(y);
    let sst: f64 = y.iter().map(|v| (v - ym) * (v - ym)).sum();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let r_squared = (sst > 0.0).then(|| (1.0 - ssr / sst).clamp(0.0, 1.0));
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        r_squared,
        residuals,
    })
}

/// Daily factor returns aligned with the backtest returns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FactorSeries {
    pub smb: Vec<f64>,
    pub hml: Vec<f64>,
    pub rf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ff3Report {
    pub alpha_pct: f64,
    pub beta: f64,
    pub smb_loading: f64,
    pub hml_loading: f64,
    pub r_squared: Option<f64>,
}

/// One row of the performance table. Ratios are `None` when the underlying
/// return series has zero dispersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub strategy: String,
    pub ann_return: f64,
    pub sharpe: Option<f64>,
    pub info_ratio: Option<f64>,
    pub terminal_value: f64,
    pub ann_turnover: f64,
    pub ann_alpha_pct: f64,
    pub beta: f64,
    pub r_squared: Option<f64>,
    pub mean_short: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ff3: Option<Ff3Report>,
}

fn check_pair(run: &BacktestRun, market: &BacktestRun, rf: &[f64]) -> Result<usize> {
    for r in [run, market] {
        if let Some(step) = r.depleted {
            return Err(SptError::ValueDepleted {
                step,
                value: r.terminal_value(),
            });
        }
    }
    let t = run.horizon();
    if market.horizon() != t {
        return Err(SptError::dims("market run length", t, market.horizon()));
    }
    if rf.len() != t {
        return Err(SptError::dims("risk-free series", t, rf.len()));
    }
    if t < 2 {
        return Err(SptError::Data(format!("performance statistics need T >= 2, got {t}")));
    }
    Ok(t)
}

fn excess(x: &[f64], rf: &[f64]) -> Vec<f64> {
    x.iter().zip(rf).map(|(a, b)| a - b).collect()
}

pub fn performance_stats(run: &BacktestRun, market: &BacktestRun, rf: &[f64]) -> Result<BacktestReport> {
    let t = check_pair(run, market, rf)?;
    let tf = t as f64;
    let active: Vec<f64> = run.returns.iter().zip(&market.returns).map(|(a, b)| a - b).collect();
    let y = excess(&run.returns, rf);
    let x = excess(&market.returns, rf);
    let fit = ols_regress(&y, &design_with_intercept(&[&x])?)?;
    Ok(BacktestReport {
        strategy: run.name.clone(),
        ann_return: run.terminal_value().powf(TRADING_DAYS / tf) - 1.0,
        sharpe: annualized_ratio(&run.returns),
        info_ratio: annualized_ratio(&active),
        terminal_value: run.terminal_value(),
        ann_turnover: TRADING_DAYS / tf * run.turnover().iter().sum::<f64>(),
        ann_alpha_pct: TRADING_DAYS * fit.coefficients[0] * 100.0,
        beta: fit.coefficients[1],
        r_squared: fit.r_squared,
        mean_short: run.short_mass().iter().sum::<f64>() / tf,
        ff3: None,
    })
}

/// Regression of excess returns on market excess, SMB and HML.
pub fn ff3_stats(run: &BacktestRun, market: &BacktestRun, factors: &FactorSeries) -> Result<Ff3Report> {
    let t = check_pair(run, market, &factors.rf)?;
    for (name, f) in [("smb", &factors.smb), ("hml", &factors.hml)] {
        if f.len() != t {
            return Err(SptError::dims(name, t, f.len()));
        }
    }
    let y = excess(&run.returns, &factors.rf);
    let x = excess(&market.returns, &factors.rf);
    let fit = ols_regress(&y, &design_with_intercept(&[&x, &factors.smb, &factors.hml])?)?;
    Ok(Ff3Report {
        alpha_pct: TRADING_DAYS * fit.coefficients[0] * 100.0,
        beta: fit.coefficients[1],
        smb_loading: fit.coefficients[2],
        hml_loading: fit.coefficients[3],
        r_squared: fit.r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{run_backtest, CostModel, FixedWeights};
    use super::*;
    use crate::matrix::SeriesMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `(XᵀX)⁻¹Xᵀy` by Gauss-Jordan elimination with partial pivoting.
    fn normal_equations(y: &[f64], x: &[Vec<f64>]) -> Vec<f64> {
        let p = x[0].len();
        let mut a = vec![vec![0.0; p + 1]; p];
        for (row, yi) in x.iter().zip(y) {
            for i in 0..p {
                for j in 0..p {
                    a[i][j] += row[i] * row[j];
                }
                a[i][p] += row[i] * yi;
            }
        }
        for c in 0..p {
            let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, piv);
            for r in 0..p {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..=p {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        (0..p).map(|i| a[i][p] / a[i][i]).collect()
    }

    #[test]
    fn matches_normal_equations_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let rows: Vec<Vec<f64>> = (0..200)
                .map(|_| vec![1.0, rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0)])
                .collect();
            let y: Vec<f64> = rows
                .iter()
                .map(|r| 0.3 - 1.2 * r[1] + 0.7 * r[2] + rng.random_range(-0.5..0.5))
                .collect();
            let x = DMatrix::from_fn(200, 3, |r, c| rows[r][c]);
            let fit = ols_regress(&y, &x).unwrap();
            let oracle = normal_equations(&y, &rows);
            for (a, b) in fit.coefficients.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn exact_and_orthogonal_fits() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 3.0 * v).collect();
        let fit = ols_regress(&y, &design_with_intercept(&[&x]).unwrap()).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] + 3.0).abs() < 1e-12);
        assert!((fit.r_squared.unwrap() - 1.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-12));

        // y symmetric around the mean of x: zero slope and zero R².
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let y = [1.0, -1.0, 0.0, -1.0, 1.0];
        let fit = ols_regress(&y, &design_with_intercept(&[&x]).unwrap()).unwrap();
        assert!(fit.coefficients[1].abs() < 1e-12);
        assert!(fit.r_squared.unwrap() < 1e-12);
    }

    #[test]
    fn rank_and_shape_errors() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let zero = [0.0; 4];
        let d = design_with_intercept(&[&x, &zero]).unwrap();
        assert!(matches!(
            ols_regress(&[1.0, 2.0, 3.0, 5.0], &d),
            Err(SptError::SingularDesign { rank: 2, cols: 3 })
        ));
        let d = design_with_intercept(&[&x[..2]]).unwrap();
        assert!(ols_regress(&[1.0, 2.0], &d).is_err());
    }

    fn random_market(days: usize, seed: u64) -> SeriesMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols = vec![vec![1.0, 2.0, 3.0]];
        for _ in 0..days {
            let p = cols.last().unwrap().clone();
            cols.push(p.iter().map(|v| v * (1.0 + rng.random_range(-0.02..0.021))).collect());
        }
        SeriesMatrix::from_columns(3, &cols).unwrap()
    }

    fn run(prices: &SeriesMatrix, w: Vec<f64>, costs: CostModel) -> BacktestRun {
        let mut rule = FixedWeights::new("fixed", w);
        run_backtest(prices, &mut rule, costs).unwrap()
    }

    #[test]
    fn market_against_itself() {
        let prices = random_market(60, 3);
        let m = run(&prices, vec![0.2, 0.3, 0.5], CostModel::default());
        let rf = vec![1e-4; 60];
        let rep = performance_stats(&m, &m, &rf).unwrap();
        assert!(rep.ann_alpha_pct.abs() < 1e-12);
        assert!((rep.beta - 1.0).abs() < 1e-12);
        assert!((rep.r_squared.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rep.info_ratio, None);
        assert!(rep.sharpe.is_some());
        assert_eq!(rep.mean_short, 0.0);
    }

    #[test]
    fn constant_wealth_and_turnover() {
        let flat = SeriesMatrix::from_columns(2, &vec![vec![1.0, 1.0]; 11]).unwrap();
        let s = run(&flat, vec![0.5, 0.5], CostModel::free());
        let m = run(&random_market(10, 5), vec![0.2, 0.3, 0.5], CostModel::free());
        // Different universes are fine for the statistics: only returns are paired.
        let rep = performance_stats(&s, &m, &[0.0; 10]).unwrap();
        assert_eq!(rep.ann_return, 0.0);
        assert_eq!(rep.sharpe, None);
        // Only the day-zero entry trade moves weights: 252/10 * 1.
        assert!((rep.ann_turnover - 25.2).abs() < 1e-12);
    }

    #[test]
    fn annualization_and_short_mass() {
        let prices = random_market(40, 8);
        let s = run(&prices, vec![1.3, -0.1, -0.2], CostModel::default());
        let m = run(&prices, vec![0.2, 0.3, 0.5], CostModel::default());
        let rep = performance_stats(&s, &m, &vec![0.0; 40]).unwrap();
        assert!((rep.mean_short - 0.3).abs() < 1e-15);
        let expected = s.terminal_value().powf(252.0 / 40.0) - 1.0;
        assert_eq!(rep.ann_return, expected);
        let sd = sample_std(&s.returns);
        assert!((rep.sharpe.unwrap() - 252f64.sqrt() * mean(&s.returns) / sd).abs() < 1e-12);
    }

    #[test]
    fn sample_std_uses_unbiased_variance() {
        assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn three_factor_recovery_and_degeneracy() {
        let prices = random_market(80, 21);
        let m = run(&prices, vec![0.2, 0.3, 0.5], CostModel::free());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let smb: Vec<f64> = (0..80).map(|_| rng.random_range(-0.01..0.01)).collect();
        let hml: Vec<f64> = (0..80).map(|_| rng.random_range(-0.01..0.01)).collect();
        let rf = vec![5e-5; 80];
        let mut synthetic = m.clone();
        synthetic.name = "synthetic".into();
        for t in 0..80 {
            synthetic.returns[t] =
                rf[t] + 2e-4 + 0.9 * (m.returns[t] - rf[t]) - 0.2 * smb[t] - 0.1 * hml[t];
        }
        let f = FactorSeries { smb, hml, rf: rf.clone() };
        let rep = ff3_stats(&synthetic, &m, &f).unwrap();
        assert!((rep.alpha_pct - 252.0 * 2e-4 * 100.0).abs() < 1e-9);
        assert!((rep.beta - 0.9).abs() < 1e-10);
        assert!((rep.smb_loading + 0.2).abs() < 1e-10);
        assert!((rep.hml_loading + 0.1).abs() < 1e-10);
        assert!((rep.r_squared.unwrap() - 1.0).abs() < 1e-12);

        let zeros = FactorSeries {
            smb: vec![0.0; 80],
            hml: vec![0.0; 80],
            rf,
        };
        assert!(matches!(ff3_stats(&synthetic, &m, &zeros), Err(SptError::SingularDesign { .. })));
    }
}
