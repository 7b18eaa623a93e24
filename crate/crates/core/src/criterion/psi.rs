//! psi-function analytics: the optimal ceded function has I'(x) = 1 exactly
//! where psi(x) > 0, with
//!   psi_v(x) = -K(F(x)) + (lambda + beta) 1(x <= x_eps)
//!   psi_c(x) = psi_v(x) + (lambda + beta) 1(x > x_eps) (1 - F(x)) / eps.

use super::{CriterionConfig, LayerContract, RiskMeasure};
use crate::error::{Error, Result};
use crate::loss::LossSample;
use crate::premium::KFunction;

/// Prepared psi evaluation over one sample.
///
/// Under a tilted premium W depends on the ceded function itself, so a
/// reference contract must be supplied to fix it.
pub struct PsiAnalysis<'a> {
    sample: &'a LossSample,
    k: KFunction,
    x_eps: f64,
    weight: f64,
    level: f64,
    measure: RiskMeasure,
}

impl<'a> PsiAnalysis<'a> {
    pub fn new(
        sample: &'a LossSample,
        config: &CriterionConfig,
        reference: Option<&LayerContract>,
    ) -> Result<Self> {
        config.validate()?;
        let lambda = config.price_of_risk.ok_or(Error::MissingLambda)?;
        let reference = match reference {
            Some(r) => *r,
            None if config.principle.tilt() == 0.0 => LayerContract::none(),
            None => {
                return Err(Error::InvalidParameter(
                    "a tilted premium needs a reference contract for psi analytics".into(),
                ))
            }
        };
        Ok(Self {
            sample,
            k: KFunction::new(&config.principle, &reference, sample)?,
            x_eps: sample.quantile(config.level)?,
            weight: lambda + config.cost_of_capital,
            level: config.level,
            measure: config.risk_measure,
        })
    }

    /// (psi_v, psi_c) at x using F(x) = #{X_i <= x} / m.
    pub fn psi(&self, x: f64) -> (f64, f64) {
        let f = self.sample.ecdf(x);
        let below = x <= self.x_eps;
        let v = -self.k.eval(f) + if below { self.weight } else { 0.0 };
        let c = v + if below {
            0.0
        } else {
            self.weight * (1.0 - f) / self.level
        };
        (v, c)
    }

    /// Maximal intervals of the grid {0, X_(1), ..., X_(m)} on which the
    /// psi function of the configured risk measure is positive. psi is
    /// constant between grid points and is evaluated at the midpoints.
    pub fn layers(&self) -> Vec<LayerContract> {
        let mut grid = Vec::with_capacity(self.sample.len() + 1);
        grid.push(0.0);
        for &x in self.sample.values() {
            if x > *grid.last().unwrap() {
                grid.push(x);
            }
        }
        let mut out = Vec::new();
        let mut open: Option<f64> = None;
        for w in grid.windows(2) {
            let (v, c) = self.psi(0.5 * (w[0] + w[1]));
            let p = match self.measure {
                RiskMeasure::VaR => v,
                RiskMeasure::CVaR => c,
            };
            match (p > 0.0, open) {
                (true, None) => open = Some(w[0]),
                (false, Some(start)) => {
                    out.push(LayerContract {
                        retention: start,
                        limit: w[0],
                    });
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(start) = open {
            out.push(LayerContract {
                retention: start,
                limit: *grid.last().unwrap(),
            });
        }
        out
    }
}

pub fn psi_functions(
    sample: &LossSample,
    config: &CriterionConfig,
    reference: Option<&LayerContract>,
    x: f64,
) -> Result<(f64, f64)> {
    Ok(PsiAnalysis::new(sample, config, reference)?.psi(x))
}

pub fn derive_layers(
    sample: &LossSample,
    config: &CriterionConfig,
    reference: Option<&LayerContract>,
) -> Result<Vec<LayerContract>> {
    Ok(PsiAnalysis::new(sample, config, reference)?.layers())
}
