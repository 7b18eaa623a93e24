//! One-layer contracts, retained risk (VaR / CVaR), expected surplus and the
//! criterion C = risk / surplus.
//!
//! The free functions here evaluate everything directly in O(m) and serve as
//! the reference route; [`CriterionEvaluator`] gives the same numbers in
//! O(log m) per contract for the optimizer.

mod evaluator;
mod psi;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{ensure_level, ensure_nonnegative, ensure_positive, Error, Result};
use crate::loss::LossSample;
use crate::premium::{premium, PremiumPrinciple};

pub use evaluator::{CriterionEvaluator, CriterionValue};
pub use psi::{derive_layers, psi_functions, PsiAnalysis};

/// Layer I(x) = min(max(x - a1, 0), a2 - a1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerContract {
    pub retention: f64,
    pub limit: f64,
}

impl LayerContract {
    pub fn new(retention: f64, limit: f64) -> Result<Self> {
        ensure_nonnegative("retention", retention)?;
        if !(limit >= retention) || !limit.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "limit must be finite and >= retention, got ({retention}, {limit})"
            )));
        }
        Ok(Self { retention, limit })
    }

    /// No reinsurance.
    pub fn none() -> Self {
        Self {
            retention: 0.0,
            limit: 0.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.limit - self.retention
    }

    #[inline]
    pub fn ceded(&self, x: f64) -> f64 {
        (x - self.retention).clamp(0.0, self.limit - self.retention)
    }
}

pub fn ceded(contract: &LayerContract, x: f64) -> f64 {
    contract.ceded(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskMeasure {
    #[serde(rename = "var")]
    VaR,
    #[serde(rename = "cvar")]
    CVaR,
}

impl fmt::Display for RiskMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskMeasure::VaR => "var",
            RiskMeasure::CVaR => "cvar",
        })
    }
}

impl FromStr for RiskMeasure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "var" => Ok(RiskMeasure::VaR),
            "cvar" => Ok(RiskMeasure::CVaR),
            o => Err(Error::InvalidParameter(format!(
                "unknown risk measure '{o}'"
            ))),
        }
    }
}

/// Loadings, risk level and pricing rule of the criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionConfig {
    /// gamma: insurer loading, pi = (1 + gamma) E X.
    pub insurer_loading: f64,
    /// beta: cost-of-capital rate on the retained risk.
    pub cost_of_capital: f64,
    /// eps: the risk measure looks at the upper eps tail.
    pub level: f64,
    pub risk_measure: RiskMeasure,
    pub principle: PremiumPrinciple,
    /// lambda: price of risk, only used by the psi analytics.
    #[serde(default)]
    pub price_of_risk: Option<f64>,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self {
            insurer_loading: 0.1,
            cost_of_capital: 0.0,
            level: 0.01,
            risk_measure: RiskMeasure::VaR,
            principle: PremiumPrinciple::default(),
            price_of_risk: None,
        }
    }
}

impl CriterionConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("insurer loading", self.insurer_loading)?;
        ensure_nonnegative("cost of capital", self.cost_of_capital)?;
        ensure_level(self.level)?;
        self.principle.validate()?;
        if let Some(l) = self.price_of_risk {
            ensure_nonnegative("price of risk", l)?;
        }
        Ok(())
    }

    /// Non-fatal remarks about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.principle.loading() <= self.insurer_loading {
            out.push(format!(
                "reinsurer loading {} does not exceed insurer loading {}",
                self.principle.loading(),
                self.insurer_loading
            ));
        }
        out
    }
}

/// Risk measure of the retained loss R = X - I(X), computed from the
/// sorted retained values without using the monotonicity of R.
pub fn risk_retained(
    sample: &LossSample,
    contract: &LayerContract,
    config: &CriterionConfig,
) -> Result<f64> {
    config.validate()?;
    let mut r: Vec<f64> = sample
        .values()
        .iter()
        .map(|x| x - contract.ceded(*x))
        .collect();
    r.sort_unstable_by(f64::total_cmp);
    match config.risk_measure {
        RiskMeasure::VaR => Ok(r[sample.quantile_index(config.level)?]),
        RiskMeasure::CVaR => {
            let k = sample.tail_count(config.level)?;
            Ok(r[r.len() - k..].iter().sum::<f64>() / k as f64)
        }
    }
}

/// G_I = gamma E X - (pi_I - E I) - beta rho.
pub fn expected_surplus(
    sample: &LossSample,
    contract: &LayerContract,
    config: &CriterionConfig,
) -> Result<f64> {
    let rho = risk_retained(sample, contract, config)?;
    let m = sample.len() as f64;
    let mean_x = sample.values().iter().sum::<f64>() / m;
    let mean_i = sample
        .values()
        .iter()
        .map(|x| contract.ceded(*x))
        .sum::<f64>()
        / m;
    let pi = premium(&config.principle, sample, contract)?;
    Ok(config.insurer_loading * mean_x - (pi - mean_i) - config.cost_of_capital * rho)
}

/// C(a, theta) = rho / G on one sample.
pub fn criterion_ratio(
    sample: &LossSample,
    contract: &LayerContract,
    config: &CriterionConfig,
) -> Result<f64> {
    let rho = risk_retained(sample, contract, config)?;
    let g = expected_surplus(sample, contract, config)?;
    if g <= 0.0 {
        return Err(Error::NonPositiveSurplus(g));
    }
    Ok(rho / g)
}
