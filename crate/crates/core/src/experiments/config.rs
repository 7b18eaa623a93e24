//! Flat, JSON-encoded run configuration.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::criterion::{CriterionConfig, RiskMeasure};
use crate::error::{ensure_positive, Error, Result};
use crate::loss::{gaussian_approx, Family, LossModel, PortfolioParams, SeverityModel};
use crate::premium::PremiumPrinciple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrincipleKind {
    #[default]
    Expected,
    MixedEsscher,
}

impl PrincipleKind {
    pub const ALL: [PrincipleKind; 2] = [PrincipleKind::Expected, PrincipleKind::MixedEsscher];

    pub fn name(self) -> &'static str {
        match self {
            PrincipleKind::Expected => "expected",
            PrincipleKind::MixedEsscher => "mixed_esscher",
        }
    }
}

/// Every knob of an experiment. Absent keys take their defaults; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Restrict to one severity family; all reference models otherwise.
    pub family: Option<Family>,
    /// Parameters of `family` in model order; reference values otherwise.
    pub params: Option<[f64; 2]>,
    pub policies: u64,
    pub intensity: f64,
    pub horizon: f64,
    pub insurer_loading: f64,
    pub reinsurer_loading: f64,
    pub cost_of_capital: f64,
    pub level: f64,
    pub tilt: f64,
    pub risk_measure: RiskMeasure,
    pub principle: PrincipleKind,
    pub m: usize,
    pub reps: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Expected claim counts for the bootstrap and asymptotics.
    pub n_grid: Vec<f64>,
    /// Historical portfolio sizes for the Bayesian tables.
    pub history_policies: Vec<f64>,
    /// Levels of the reserve table.
    pub reserve_levels: Vec<f64>,
    pub loading_grid: Vec<f64>,
    pub tilt_grid: Vec<f64>,
    /// Retentions of the ratio curve; empty means 40 points over
    /// [0.5, 1] x_eps.
    pub a1_grid: Vec<f64>,
    pub rmse_targets: Vec<f64>,
    pub n_max: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = PortfolioParams::default();
        Self {
            family: None,
            params: None,
            policies: p.policies,
            intensity: p.intensity,
            horizon: p.horizon,
            insurer_loading: 0.1,
            reinsurer_loading: 0.2,
            cost_of_capital: 0.0,
            level: 0.01,
            tilt: 0.001,
            risk_measure: RiskMeasure::VaR,
            principle: PrincipleKind::Expected,
            m: 100_000,
            reps: 20,
            seed: 1,
            out: PathBuf::from("results"),
            n_grid: vec![5000.0, 500.0, 50.0],
            history_policies: vec![1e5, 1e4, 1e3],
            reserve_levels: vec![0.01, 0.005],
            loading_grid: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
            tilt_grid: vec![0.001, 0.002, 0.003, 0.004, 0.005, 0.006],
            a1_grid: Vec::new(),
            rmse_targets: vec![0.25, 0.15, 0.05],
            n_max: 200_000.0,
        }
    }
}

/// Reference severity parameters.
pub fn reference_severity(family: Family) -> SeverityModel {
    match family {
        Family::Gamma => SeverityModel::Gamma {
            shape: 0.44,
            scale: 22.5,
        },
        Family::Lognormal => SeverityModel::Lognormal {
            log_mean: 1.71,
            log_sd: 1.09,
        },
        Family::Pareto => SeverityModel::Pareto {
            shape: 3.6,
            scale: 26.0,
        },
        Family::GaussianApprox => SeverityModel::GaussianApprox {
            mean: 495.0,
            sd: 126.7,
        },
    }
}

impl ExperimentConfig {
    pub fn full_scale(mut self) -> Self {
        self.m = 1_000_000;
        self.reps = 100;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn portfolio(&self) -> PortfolioParams {
        PortfolioParams {
            policies: self.policies,
            intensity: self.intensity,
            horizon: self.horizon,
        }
    }

    pub fn premium(&self, kind: PrincipleKind) -> PremiumPrinciple {
        match kind {
            PrincipleKind::Expected => PremiumPrinciple::Expected {
                loading: self.reinsurer_loading,
            },
            PrincipleKind::MixedEsscher => PremiumPrinciple::MixedEsscher {
                loading: self.reinsurer_loading,
                tilt: self.tilt,
            },
        }
    }

    /// Criterion with the configured principle.
    pub fn criterion(&self) -> CriterionConfig {
        self.criterion_with(self.principle)
    }

    pub fn criterion_with(&self, kind: PrincipleKind) -> CriterionConfig {
        CriterionConfig {
            insurer_loading: self.insurer_loading,
            cost_of_capital: self.cost_of_capital,
            level: self.level,
            risk_measure: self.risk_measure,
            principle: self.premium(kind),
            price_of_risk: None,
        }
    }

    fn severity_of(&self, family: Family) -> Result<SeverityModel> {
        match (self.family, self.params) {
            (Some(f), Some(p)) if f == family => SeverityModel::from_params(f, p),
            _ => Ok(reference_severity(family)),
        }
    }

    /// Claim-severity models covered by the run.
    pub fn severity_models(&self) -> Result<Vec<LossModel>> {
        let families: Vec<Family> = match self.family {
            Some(Family::GaussianApprox) => {
                return Err(Error::InvalidParameter(
                    "this run needs a claim severity family".into(),
                ))
            }
            Some(f) => vec![f],
            None => Family::SEVERITIES.to_vec(),
        };
        families
            .into_iter()
            .map(|f| LossModel::new(self.portfolio(), self.severity_of(f)?))
            .collect()
    }

    /// Severity models preceded by the Gaussian surrogate (moment-matched
    /// to the Gamma model unless a family or Gaussian parameters are given).
    pub fn models_with_gaussian(&self) -> Result<Vec<LossModel>> {
        let portfolio = self.portfolio();
        let gaussian = match (self.family, self.params) {
            (Some(Family::GaussianApprox), Some(p)) => {
                return Ok(vec![LossModel::new(
                    portfolio,
                    SeverityModel::from_params(Family::GaussianApprox, p)?,
                )?])
            }
            (Some(Family::GaussianApprox), None) => {
                return Ok(vec![LossModel::new(
                    portfolio,
                    reference_severity(Family::GaussianApprox),
                )?])
            }
            (Some(f), _) => gaussian_approx(&portfolio, &self.severity_of(f)?)?,
            (None, _) => gaussian_approx(&portfolio, &reference_severity(Family::Gamma))?,
        };
        let mut out = vec![LossModel::new(portfolio, gaussian)?];
        out.extend(self.severity_models()?);
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.portfolio().validate()?;
        for k in PrincipleKind::ALL {
            self.criterion_with(k).validate()?;
        }
        if let (Some(f), Some(p)) = (self.family, self.params) {
            SeverityModel::from_params(f, p)?;
        }
        if self.params.is_some() && self.family.is_none() {
            return Err(Error::InvalidParameter(
                "params given without family".into(),
            ));
        }
        if self.m < 100 {
            return Err(Error::InvalidParameter(format!(
                "m must be >= 100, got {}",
                self.m
            )));
        }
        if self.reps < 2 {
            return Err(Error::InvalidParameter(format!(
                "reps must be >= 2, got {}",
                self.reps
            )));
        }
        for (name, grid) in [
            ("n_grid", &self.n_grid),
            ("history_policies", &self.history_policies),
            ("loading_grid", &self.loading_grid),
            ("a1_grid", &self.a1_grid),
        ] {
            if let Some(bad) = grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "{name} entries must be > 0, found {bad}"
                )));
            }
        }
        if let Some(bad) = self
            .tilt_grid
            .iter()
            .find(|v| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "tilt_grid entries must be >= 0, found {bad}"
            )));
        }
        for &l in &self.reserve_levels {
            crate::error::ensure_level(l)?;
        }
        if let Some(bad) = self.rmse_targets.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "rmse targets must lie in (0, 1), found {bad}"
            )));
        }
        ensure_positive("n_max", self.n_max)
    }
}
