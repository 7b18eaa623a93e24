//! Jeffreys and conjugate priors.
//!
//! Every Gamma hyperparameter pair is (shape, scale), mean shape * scale.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::loss::Family;
use crate::special::trigamma;

/// Parameter block a prior refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorTarget {
    /// Claim intensity mu.
    Poisson,
    /// Severity parameters in [`crate::loss::SeverityModel`] order.
    Severity(Family),
}

/// Unnormalised log Jeffreys density.
///
/// Poisson: mu^(-1/2). Gamma (shape a, scale b): sqrt(a psi1(a) - 1) / b.
/// Lognormal: sigma^-2 as a density in (xi, sigma^2), i.e. flat in log
/// sigma. Pareto (shape a, scale b): 1 / (b (a + 1) sqrt(a (a + 2))).
pub fn jeffreys_logdensity(target: PriorTarget, params: &[f64]) -> Result<f64> {
    let need = if target == PriorTarget::Poisson { 1 } else { 2 };
    if params.len() != need {
        return Err(Error::InvalidParameter(format!(
            "expected {need} parameters, got {}",
            params.len()
        )));
    }
    let pos = |what: &'static str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::OutOfSupport { what, value: v })
        }
    };
    match target {
        PriorTarget::Poisson => Ok(-0.5 * pos("mu", params[0])?.ln()),
        PriorTarget::Severity(Family::Gamma) => {
            let a = pos("shape", params[0])?;
            let b = pos("scale", params[1])?;
            Ok(0.5 * (a * trigamma(a) - 1.0).ln() - b.ln())
        }
        PriorTarget::Severity(Family::Lognormal) => {
            if !params[0].is_finite() {
                return Err(Error::OutOfSupport {
                    what: "log_mean",
                    value: params[0],
                });
            }
            Ok(-2.0 * pos("log_sd", params[1])?.ln())
        }
        PriorTarget::Severity(Family::Pareto) => {
            let a = pos("shape", params[0])?;
            let b = pos("scale", params[1])?;
            Ok(pareto_shape_log_kernel(a) - b.ln())
        }
        PriorTarget::Severity(Family::GaussianApprox) => Err(Error::InvalidParameter(
            "no prior for the Gaussian surrogate".into(),
        )),
    }
}

/// log of 1 / ((a + 1) sqrt(a (a + 2))).
pub(crate) fn pareto_shape_log_kernel(a: f64) -> f64 {
    -(a + 1.0).ln() - 0.5 * (a * (a + 2.0)).ln()
}

/// Gamma(shape, scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaHyper {
    pub shape: f64,
    pub scale: f64,
}

impl GammaHyper {
    pub const fn new(shape: f64, scale: f64) -> Self {
        Self { shape, scale }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("prior shape", self.shape)?;
        ensure_positive("prior scale", self.scale)
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    /// Log density up to a constant.
    pub fn log_kernel(&self, x: f64) -> f64 {
        (self.shape - 1.0) * x.ln() - x / self.scale
    }
}

/// Informative severity priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeverityHyper {
    /// Gamma prior on the shape, conjugate Gamma prior on the rate 1/scale.
    Gamma { shape: GammaHyper, rate: GammaHyper },
    /// Normal-inverse-Gamma: xi | sigma^2 ~ N(xi0, sigma^2 / kappa0) and
    /// 1/sigma^2 ~ Gamma(precision).
    Lognormal {
        xi0: f64,
        kappa0: f64,
        precision: GammaHyper,
    },
    /// Conjugate Gamma prior on the shape, Gamma prior on the scale.
    Pareto {
        shape: GammaHyper,
        scale: GammaHyper,
    },
}

impl SeverityHyper {
    pub fn family(&self) -> Family {
        match self {
            SeverityHyper::Gamma { .. } => Family::Gamma,
            SeverityHyper::Lognormal { .. } => Family::Lognormal,
            SeverityHyper::Pareto { .. } => Family::Pareto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SeverityHyper::Gamma { shape, rate } => {
                shape.validate()?;
                rate.validate()
            }
            SeverityHyper::Lognormal {
                xi0,
                kappa0,
                precision,
            } => {
                if !xi0.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "xi0 must be finite, got {xi0}"
                    )));
                }
                ensure_positive("kappa0", *kappa0)?;
                precision.validate()
            }
            SeverityHyper::Pareto { shape, scale } => {
                shape.validate()?;
                scale.validate()
            }
        }
    }

    /// Defaults centred near the reference parameters.
    pub fn reference(family: Family) -> Result<Self> {
        match family {
            Family::Gamma => Ok(SeverityHyper::Gamma {
                shape: GammaHyper::new(10.0, 0.1),
                rate: GammaHyper::new(1.0, 0.1),
            }),
            Family::Lognormal => Ok(SeverityHyper::Lognormal {
                xi0: 2.0,
                kappa0: 100.0,
                precision: GammaHyper::new(8.0, 0.1),
            }),
            Family::Pareto => Ok(SeverityHyper::Pareto {
                shape: GammaHyper::new(40.0, 0.1),
                scale: GammaHyper::new(3000.0, 0.01),
            }),
            Family::GaussianApprox => Err(Error::InvalidParameter(
                "no prior for the Gaussian surrogate".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateHyper {
    pub frequency: GammaHyper,
    pub severity: SeverityHyper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    Jeffreys,
    Conjugate(ConjugateHyper),
}

impl PriorSpec {
    /// Informative priors with the reference hyperparameters.
    pub fn informative(family: Family) -> Result<Self> {
        Ok(PriorSpec::Conjugate(ConjugateHyper {
            frequency: GammaHyper::new(0.25, 0.2),
            severity: SeverityHyper::reference(family)?,
        }))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorSpec::Jeffreys => Ok(()),
            PriorSpec::Conjugate(h) => {
                h.frequency.validate()?;
                h.severity.validate()
            }
        }
    }

    pub fn is_jeffreys(&self) -> bool {
        matches!(self, PriorSpec::Jeffreys)
    }

    pub fn name(&self) -> &'static str {
        match self {
            PriorSpec::Jeffreys => "jeffreys",
            PriorSpec::Conjugate(_) => "informative",
        }
    }
}
