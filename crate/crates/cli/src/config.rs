//! TOML run configuration.
//!
//! Every section has defaults, so an empty file is a valid config. Relative
//! paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use spt_core::backtest::CostModel;
use spt_core::data_io::{PanelFiles, SyntheticPanelSpec, DEFAULT_ROA_SCALE};
use spt_core::generating_functions::GenConfig;
use spt_core::market_sim::{MarketModel, MarketSpec, SimGrid};

use crate::error::CliError;
use crate::suite::VsmSetup;

pub const DEFAULT_SEED: u64 = 20240101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Simulate,
    Verify,
    Backtest,
    Report,
    GeneratePanel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Command to run when none is given on the command line.
    #[serde(default)]
    pub command: Option<CommandKind>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub market: MarketConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub costs: CostModel,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<GenConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub synthetic: SyntheticPanelSpec,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// The five strategies of the empirical study, with their fixed parameters.
pub fn default_strategies() -> Vec<GenConfig> {
    vec![
        GenConfig::Market,
        GenConfig::Entropy { c: 0.1 },
        GenConfig::GeometricMean,
        GenConfig::Beta {
            a_shift: 1e-4,
            c: 1e-4,
            p: 0.7,
        },
        GenConfig::QualityOverlay {
            a: Some(2.5),
            a_shift: None,
            varsigma: None,
        },
    ]
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: DEFAULT_SEED,
            out_dir: None,
            threads: None,
            market: MarketConfig::default(),
            grid: GridConfig::default(),
            costs: CostModel::default(),
            data: DataConfig::default(),
            strategies: default_strategies(),
            verify: VerifyConfig::default(),
            synthetic: SyntheticPanelSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub n: usize,
    pub model: MarketModel,
    /// Unit prices when absent.
    #[serde(default)]
    pub initial_prices: Option<Vec<f64>>,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            n: 5,
            model: MarketModel::VolatilityStabilized { alpha: 1.0 },
            initial_prices: None,
        }
    }
}

impl MarketConfig {
    pub fn spec(&self) -> MarketSpec {
        MarketSpec {
            n: self.n,
            model: self.model.clone(),
            initial_prices: self.initial_prices.clone().unwrap_or_else(|| vec![1.0; self.n]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            dt: 1e-3,
            paths: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding prices.csv, shares.csv, roa.csv and factors.csv.
    pub dir: PathBuf,
    /// Stored ROA is multiplied by this on load.
    #[serde(default = "default_roa_scale")]
    pub roa_scale: f64,
}

fn default_roa_scale() -> f64 {
    DEFAULT_ROA_SCALE
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("data/synthetic"),
            roa_scale: DEFAULT_ROA_SCALE,
        }
    }
}

impl DataConfig {
    pub fn files(&self) -> PanelFiles {
        PanelFiles::in_dir(&self.dir)
    }
}

/// Sizes of the verification studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub n: usize,
    pub alpha: f64,
    pub paths: usize,
    pub arbitrage_paths: usize,
    pub dt: f64,
    /// Coarsest first.
    pub refinement_dts: Vec<f64>,
    pub refinement_horizon: f64,
    pub beta_dt: f64,
    pub beta_paths: usize,
    pub roa_dt: f64,
    pub roa_paths: usize,
    pub roa_window: usize,
    pub invariance_draws: usize,
    pub multiplicative_draws: usize,
    pub gradient_samples: usize,
    /// Reduced-entropy threshold as a multiple of `log n`.
    pub entropy_floor: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n: 5,
            alpha: 1.0,
            paths: 100,
            arbitrage_paths: 200,
            dt: 1e-3,
            refinement_dts: vec![1e-3, 5e-4, 2.5e-4],
            refinement_horizon: 1.0,
            beta_dt: 1e-4,
            beta_paths: 50,
            roa_dt: 8e-6,
            roa_paths: 100,
            roa_window: 60,
            invariance_draws: 100,
            multiplicative_draws: 50,
            gradient_samples: 200,
            entropy_floor: 0.5,
        }
    }
}

impl VerifyConfig {
    pub fn vsm(&self, paths: usize, dt: f64, seed: u64) -> VsmSetup {
        VsmSetup {
            n: self.n,
            alpha: self.alpha,
            paths,
            dt,
            seed,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |what: &str| Err(CliError::Config(format!("verify.{what}")));
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if !(self.alpha >= 0.0) {
            return bad("alpha must be >= 0");
        }
        if self.paths == 0 || self.arbitrage_paths == 0 || self.beta_paths == 0 || self.roa_paths == 0 {
            return bad("path counts must be positive");
        }
        if self.refinement_dts.len() < 3 || self.refinement_dts.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("refinement_dts needs three or more strictly decreasing steps");
        }
        for (name, v) in [
            ("dt", self.dt),
            ("beta_dt", self.beta_dt),
            ("roa_dt", self.roa_dt),
            ("refinement_horizon", self.refinement_horizon),
            ("entropy_floor", self.entropy_floor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if self.entropy_floor >= 1.0 {
            return bad("entropy_floor must be below 1 (the uniform entropy is log n)");
        }
        Ok(())
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub dt: Option<f64>,
    pub paths: Option<usize>,
}

impl RunConfig {
    /// Parses a file, resolving relative data paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.data.dir.is_relative() {
            cfg.data.dir = base.join(&cfg.data.dir);
        }
        if let Some(out) = &cfg.out_dir {
            if out.is_relative() {
                cfg.out_dir = Some(base.join(out));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = Some(d.clone());
        }
        if let Some(dt) = o.dt {
            self.grid.dt = dt;
            self.verify.dt = dt;
        }
        if let Some(p) = o.paths {
            self.grid.paths = p;
            self.verify.paths = p;
        }
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<(), CliError> {
        self.market.spec().validate()?;
        SimGrid::new(self.grid.horizon, self.grid.dt, self.seed)?;
        if self.grid.paths == 0 {
            return Err(CliError::Config("grid.paths must be positive".into()));
        }
        self.costs.validate()?;
        if !(self.data.roa_scale.is_finite() && self.data.roa_scale > 0.0) {
            return Err(CliError::Config("data.roa_scale must be positive".into()));
        }
        for s in &self.strategies {
            s.validate()?;
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        self.synthetic.validate()?;
        self.verify.validate()
    }

    /// Output directory: config or flag, else `fallback`.
    pub fn out_dir_or(&self, fallback: &Path) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| fallback.to_path_buf())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
        assert_eq!(c.strategies.len(), 5);
    }

    #[test]
    fn parses_sections() {
        let c = RunConfig::parse(
            r#"
            command = "simulate"
            seed = 7
            [market]
            n = 3
            model = { kind = "volatility_stabilized", alpha = 0.5 }
            [grid]
            horizon = 0.5
            dt = 0.01
            paths = 4
            [costs]
            eps1 = 0.0
            eps2 = 0.0
            [[strategies]]
            name = "entropy"
            c = 1.0
            [[strategies]]
            name = "beta"
            A = 1.0
            c = 1.0
            p = 0.5
            "#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.command, Some(CommandKind::Simulate));
        assert_eq!(c.market.spec().initial_prices, vec![1.0; 3]);
        assert_eq!(c.strategies[1], GenConfig::Beta { a_shift: 1.0, c: 1.0, p: 0.5 });
        assert_eq!(c.costs, CostModel::free());
    }

    #[test]
    fn rejects_bad_input_before_compute() {
        assert!(matches!(RunConfig::parse("bogus = 1"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::parse("[[strategies]]\nname = \"nope\""), Err(CliError::Config(_))));
        let c = RunConfig::parse("[[strategies]]\nname = \"boosted_entropy\"\nc = 1.0\nalpha = 0.7").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("[grid]\nhorizon = 1.0\ndt = 2.0\npaths = 1").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("[market]\nn = 3\nmodel = { kind = \"volatility_stabilized\", alpha = -1.0 }").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::default();
        c.apply(&Overrides {
            seed: Some(3),
            out_dir: Some("x".into()),
            dt: Some(0.01),
            paths: Some(2),
        });
        assert_eq!((c.seed, c.grid.dt, c.grid.paths, c.verify.paths), (3, 0.01, 2, 2));
        assert_eq!(c.out_dir_or(Path::new("y")), PathBuf::from("x"));
    }
}
