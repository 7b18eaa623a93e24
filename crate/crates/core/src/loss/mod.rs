//! Claim frequency and severity models, compound Poisson simulation of
//! total losses, maximum-likelihood fitting and synthetic claim histories.

mod fit;
pub mod io;
mod sampling;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{ensure_level, ensure_positive, Error, Result};

pub use fit::{fit_mle, fit_severity};
pub use sampling::{
    sample_severity, simulate_history, simulate_history_exposure, simulate_total_losses,
    PoissonCounts, SeveritySampler,
};

/// Severity distribution of a single claim, or a Normal surrogate for the
/// total loss (`GaussianApprox`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeverityModel {
    /// Density y^(a-1) e^(-y/b) / (b^a Gamma(a)), mean a*b.
    Gamma { shape: f64, scale: f64 },
    /// log Y ~ N(log_mean, log_sd^2).
    Lognormal { log_mean: f64, log_sd: f64 },
    /// Pareto type II (Lomax): density (a/b) (1 + y/b)^-(a+1).
    Pareto { shape: f64, scale: f64 },
    /// Normal model of the total loss itself.
    GaussianApprox { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gamma,
    Lognormal,
    Pareto,
    GaussianApprox,
}

impl Family {
    pub const SEVERITIES: [Family; 3] = [Family::Gamma, Family::Lognormal, Family::Pareto];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gamma => "gamma",
            Family::Lognormal => "lognormal",
            Family::Pareto => "pareto",
            Family::GaussianApprox => "gaussian",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gamma" => Ok(Family::Gamma),
            "lognormal" => Ok(Family::Lognormal),
            "pareto" | "lomax" => Ok(Family::Pareto),
            "gaussian" | "gaussian_approx" | "normal" => Ok(Family::GaussianApprox),
            other => Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

impl SeverityModel {
    pub fn family(&self) -> Family {
        match self {
            SeverityModel::Gamma { .. } => Family::Gamma,
            SeverityModel::Lognormal { .. } => Family::Lognormal,
            SeverityModel::Pareto { .. } => Family::Pareto,
            SeverityModel::GaussianApprox { .. } => Family::GaussianApprox,
        }
    }

    /// The two parameters in declaration order.
    pub fn params(&self) -> [f64; 2] {
        match *self {
            SeverityModel::Gamma { shape, scale } => [shape, scale],
            SeverityModel::Lognormal { log_mean, log_sd } => [log_mean, log_sd],
            SeverityModel::Pareto { shape, scale } => [shape, scale],
            SeverityModel::GaussianApprox { mean, sd } => [mean, sd],
        }
    }

    pub fn from_params(family: Family, p: [f64; 2]) -> Result<Self> {
        let model = match family {
            Family::Gamma => SeverityModel::Gamma {
                shape: p[0],
                scale: p[1],
            },
            Family::Lognormal => SeverityModel::Lognormal {
                log_mean: p[0],
                log_sd: p[1],
            },
            Family::Pareto => SeverityModel::Pareto {
                shape: p[0],
                scale: p[1],
            },
            Family::GaussianApprox => SeverityModel::GaussianApprox {
                mean: p[0],
                sd: p[1],
            },
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SeverityModel::Gamma { shape, scale } | SeverityModel::Pareto { shape, scale } => {
                ensure_positive("shape", shape)?;
                ensure_positive("scale", scale)
            }
            SeverityModel::Lognormal { log_mean, log_sd } => {
                if !log_mean.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "log_mean must be finite, got {log_mean}"
                    )));
                }
                ensure_positive("log_sd", log_sd)
            }
            SeverityModel::GaussianApprox { mean, sd } => {
                if !mean.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "mean must be finite, got {mean}"
                    )));
                }
                ensure_positive("sd", sd)
            }
        }
    }

    /// Exact mean and standard deviation.
    pub fn moments(&self) -> Result<Moments> {
        self.validate()?;
        Ok(match *self {
            SeverityModel::Gamma { shape, scale } => Moments {
                mean: shape * scale,
                sd: scale * shape.sqrt(),
            },
            SeverityModel::Lognormal { log_mean, log_sd } => {
                let s2 = log_sd * log_sd;
                let mean = (log_mean + 0.5 * s2).exp();
                Moments {
                    mean,
                    sd: mean * s2.exp_m1().sqrt(),
                }
            }
            SeverityModel::Pareto { shape, scale } => {
                if shape <= 1.0 {
                    return Err(Error::InfiniteMoment {
                        what: "mean",
                        shape,
                    });
                }
                if shape <= 2.0 {
                    return Err(Error::InfiniteMoment {
                        what: "variance",
                        shape,
                    });
                }
                let mean = scale / (shape - 1.0);
                Moments {
                    mean,
                    sd: scale * (shape / ((shape - 1.0).powi(2) * (shape - 2.0))).sqrt(),
                }
            }
            SeverityModel::GaussianApprox { mean, sd } => Moments { mean, sd },
        })
    }

    /// Skewness coefficient of the distribution.
    pub fn skewness(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            SeverityModel::Gamma { shape, .. } => 2.0 / shape.sqrt(),
            SeverityModel::Lognormal { log_sd, .. } => {
                let w = (log_sd * log_sd).exp();
                (w + 2.0) * (w - 1.0).sqrt()
            }
            SeverityModel::Pareto { shape, .. } => {
                if shape <= 3.0 {
                    return Err(Error::InfiniteMoment {
                        what: "third moment",
                        shape,
                    });
                }
                2.0 * (1.0 + shape) / (shape - 3.0) * ((shape - 2.0) / shape).sqrt()
            }
            SeverityModel::GaussianApprox { .. } => 0.0,
        })
    }
}

/// Portfolio of `policies` identical policies with Poisson claim intensity
/// `intensity` per policy-year over `horizon` years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioParams {
    pub policies: u64,
    pub intensity: f64,
    pub horizon: f64,
}

impl Default for PortfolioParams {
    fn default() -> Self {
        Self {
            policies: 1000,
            intensity: 0.05,
            horizon: 1.0,
        }
    }
}

impl PortfolioParams {
    pub fn expected_claims(&self) -> f64 {
        self.policies as f64 * self.intensity * self.horizon
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies == 0 {
            return Err(Error::InvalidParameter("policy count must be >= 1".into()));
        }
        ensure_positive("intensity", self.intensity)?;
        ensure_positive("horizon", self.horizon)
    }
}

/// Normal surrogate for the compound total:
/// mean E(N)E(Y), sd sqrt(Var(N) E(Y)^2 + E(N) Var(Y)) with Var(N) = E(N).
pub fn gaussian_approx(
    portfolio: &PortfolioParams,
    model: &SeverityModel,
) -> Result<SeverityModel> {
    portfolio.validate()?;
    if let SeverityModel::GaussianApprox { .. } = model {
        return Err(Error::InvalidParameter(
            "gaussian_approx needs a claim severity model".into(),
        ));
    }
    let m = model.moments()?;
    let en = portfolio.expected_claims();
    Ok(SeverityModel::GaussianApprox {
        mean: en * m.mean,
        sd: (en * (m.mean * m.mean + m.sd * m.sd)).sqrt(),
    })
}

/// A frequency/severity model: the full parameter vector theta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossModel {
    pub portfolio: PortfolioParams,
    pub severity: SeverityModel,
}

impl LossModel {
    pub fn new(portfolio: PortfolioParams, severity: SeverityModel) -> Result<Self> {
        let model = Self {
            portfolio,
            severity,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.portfolio.validate()?;
        self.severity.validate()
    }

    /// Parameter vector: (mean, sd) for the Gaussian surrogate, otherwise
    /// (intensity, severity parameter 1, severity parameter 2).
    pub fn theta(&self) -> Vec<f64> {
        let p = self.severity.params();
        match self.severity {
            SeverityModel::GaussianApprox { .. } => p.to_vec(),
            _ => vec![self.portfolio.intensity, p[0], p[1]],
        }
    }

    pub fn theta_names(&self) -> Vec<&'static str> {
        match self.severity.family() {
            Family::Gamma => vec!["intensity", "shape", "scale"],
            Family::Lognormal => vec!["intensity", "log_mean", "log_sd"],
            Family::Pareto => vec!["intensity", "shape", "scale"],
            Family::GaussianApprox => vec!["mean", "sd"],
        }
    }

    pub fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        let family = self.severity.family();
        let mut out = *self;
        match (family, theta) {
            (Family::GaussianApprox, [a, b]) => {
                out.severity = SeverityModel::from_params(family, [*a, *b])?
            }
            (Family::GaussianApprox, _) => {
                return Err(Error::InvalidParameter(
                    "Gaussian surrogate takes 2 parameters".into(),
                ))
            }
            (_, [mu, a, b]) => {
                out.portfolio.intensity = *mu;
                out.severity = SeverityModel::from_params(family, [*a, *b])?;
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "compound model takes 3 parameters".into(),
                ))
            }
        }
        out.validate()?;
        Ok(out)
    }

    pub fn simulate(&self, m: usize, seed: u64) -> Result<LossSample> {
        simulate_total_losses(&self.portfolio, &self.severity, m, seed)
    }
}

/// Where a [`LossSample`] came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRecord {
    pub seed: u64,
    #[serde(default)]
    pub model: Option<LossModel>,
}

/// Ascending-sorted simulated total losses.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    values: Vec<f64>,
    record: SeedRecord,
}

impl LossSample {
    /// Sorts `values` and checks they are finite and nonnegative.
    pub fn from_values(mut values: Vec<f64>, record: SeedRecord) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "loss values must be finite and >= 0, found {bad}"
            )));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { values, record })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn record(&self) -> &SeedRecord {
        &self.record
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values[self.len() - 1]
    }

    /// Zero-based index of the order statistic used for x_eps:
    /// ceil((1 - eps) m) - 1, clamped to the sample.
    pub fn quantile_index(&self, eps: f64) -> Result<usize> {
        ensure_level(eps)?;
        let k = snapped_ceil((1.0 - eps) * self.len() as f64);
        Ok(k.clamp(1, self.len()) - 1)
    }

    /// Order-statistic estimate of the 1 - eps quantile.
    pub fn quantile(&self, eps: f64) -> Result<f64> {
        Ok(self.values[self.quantile_index(eps)?])
    }

    /// Number of upper order statistics averaged by the CVaR estimator, ceil(eps m).
    pub fn tail_count(&self, eps: f64) -> Result<usize> {
        ensure_level(eps)?;
        Ok(snapped_ceil(eps * self.len() as f64).clamp(1, self.len()))
    }

    /// Empirical distribution function #{X_i <= x} / m.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.values.partition_point(|v| *v <= x) as f64 / self.len() as f64
    }
}

/// ceil(t) that treats values within rounding noise of an integer as that
/// integer, so (1 - 0.01) * 100 gives 99 rather than 100.
pub(crate) fn snapped_ceil(t: f64) -> usize {
    let r = t.round();
    if (t - r).abs() <= 1e-9 * t.abs().max(1.0) {
        r.max(0.0) as usize
    } else {
        t.ceil().max(0.0) as usize
    }
}

/// Observed claims over an exposure of `exposure` policy-years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimHistory {
    pub severities: Vec<f64>,
    pub exposure: f64,
}

impl ClaimHistory {
    pub fn new(severities: Vec<f64>, exposure: f64) -> Result<Self> {
        ensure_positive("exposure", exposure)?;
        if let Some(bad) = severities.iter().find(|y| !(y.is_finite() && **y > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "claim severities must be > 0, found {bad}"
            )));
        }
        Ok(Self {
            severities,
            exposure,
        })
    }

    pub fn claim_count(&self) -> usize {
        self.severities.len()
    }
}
