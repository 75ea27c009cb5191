use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    theoretical_overlay_a, BetaGenFun, BoostedEntropy, Constant, Entropy, GeneratingFunction, GeometricMean,
    ReducedEntropy, RoaGenFun,
};
use crate::error::{Result, SptError};

/// Named constructor plus parameters, as written in config files:
/// `{ name = "beta", A = 1e-4, c = 1e-4, p = 0.7 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum GenConfig {
    /// Constant function; generates the market portfolio.
    Market,
    Entropy {
        c: f64,
    },
    #[serde(alias = "ewp")]
    GeometricMean,
    ReducedEntropy {
        c: f64,
        epsilon: f64,
    },
    BoostedEntropy {
        c: f64,
        alpha: f64,
    },
    Beta {
        #[serde(rename = "A")]
        a_shift: f64,
        c: f64,
        p: f64,
    },
    Roa {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        varsigma: Option<f64>,
    },
    /// `(1+a)·market − a·ROA portfolio`; `a` given directly or derived from `A` and `ς`.
    QualityOverlay {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
        a_shift: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        varsigma: Option<f64>,
    },
}

impl GenConfig {
    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            GenConfig::Market => "market".into(),
            GenConfig::Entropy { .. } => "entropy".into(),
            GenConfig::GeometricMean => "ewp".into(),
            GenConfig::ReducedEntropy { .. } => "reduced_entropy".into(),
            GenConfig::BoostedEntropy { .. } => "boosted_entropy".into(),
            GenConfig::Beta { .. } => "beta".into(),
            GenConfig::Roa { .. } => "roa".into(),
            GenConfig::QualityOverlay { .. } => "roa_overlay".into(),
        }
    }

    /// The generating function behind this strategy (for the overlay, the ROA
    /// function whose portfolio is shorted).
    pub fn generating_function(&self) -> Result<Arc<dyn GeneratingFunction>> {
        Ok(match self {
            GenConfig::Market => Arc::new(Constant::new(1.0)?),
            GenConfig::Entropy { c } => Arc::new(Entropy::new(*c)?),
            GenConfig::GeometricMean => Arc::new(GeometricMean),
            GenConfig::ReducedEntropy { c, epsilon } => Arc::new(ReducedEntropy::new(*c, *epsilon)?),
            GenConfig::BoostedEntropy { c, alpha } => Arc::new(BoostedEntropy::new(*c, *alpha)?),
            GenConfig::Beta { a_shift, c, p } => Arc::new(BetaGenFun::new(*a_shift, *c, *p)?),
            GenConfig::Roa { varsigma } | GenConfig::QualityOverlay { varsigma, .. } => match varsigma {
                Some(s) => Arc::new(RoaGenFun::new(*s)?),
                None => Arc::new(RoaGenFun::unbounded()),
            },
        })
    }

    /// Overlay leverage `a`, or `None` for plain generated portfolios.
    pub fn overlay_leverage(&self) -> Result<Option<f64>> {
        let GenConfig::QualityOverlay { a, a_shift, varsigma } = self else {
            return Ok(None);
        };
        let a = match (a, a_shift, varsigma) {
            (Some(a), _, _) => *a,
            (None, Some(shift), Some(vs)) => {
                if *shift < 0.0 || *vs <= 0.0 {
                    return Err(SptError::param("A/varsigma", "need A >= 0 and varsigma > 0"));
                }
                theoretical_overlay_a(*shift, *vs)
            }
            _ => {
                return Err(SptError::param(
                    "a",
                    "quality overlay needs `a`, or both `A` and `varsigma`",
                ))
            }
        };
        if !(a.is_finite() && a > 0.0) {
            return Err(SptError::param("a", format!("{a} must be positive")));
        }
        Ok(Some(a))
    }

    /// Builds everything once so range errors surface before any compute.
    pub fn validate(&self) -> Result<()> {
        self.generating_function()?;
        self.overlay_leverage()?;
        Ok(())
    }
}
