//! Nested parametric bootstrap of D.
//!
//! For each replicate: simulate a claim history of expected size n from
//! theta_hat, refit theta_hat*, simulate totals under theta_hat*, optimise to
//! a_hat*, and evaluate D = C(a_hat*, theta_hat) - C(a_hat, theta_hat) on
//! the theta_hat sample that produced a_hat.

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DegradationStats, Method};
use crate::criterion::{CriterionConfig, CriterionEvaluator};
use crate::error::{Error, Result};
use crate::loss::{fit_mle, simulate_history_exposure, LossModel, LossSample, SeveritySampler};
use crate::optimize::{optimize_contract, OptimResult};
use crate::rng::{derive, purpose, SimRng};

/// How the theta_hat* sample relates to the theta_hat sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Same seed: the two samples share random numbers and D reflects
    /// parameter error only.
    #[default]
    Common,
    /// Fresh seed per replicate.
    Independent,
}

#[derive(Debug, Clone, Copy)]
pub struct BootstrapOptions {
    /// Expected number of claims in each simulated history.
    pub n: f64,
    pub reps: usize,
    /// Totals per simulated sample.
    pub m: usize,
    pub seed: u64,
    pub coupling: Coupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub stats: DegradationStats,
    /// a_hat and C(a_hat, theta_hat).
    pub base: OptimResult,
    pub mean_retention: f64,
    pub mean_limit: f64,
    /// Mean of C(a_hat*, theta_hat).
    pub mean_ratio: f64,
}

/// The theta_hat sample and its optimum, reusable across history sizes.
pub struct BootstrapSetup {
    model: LossModel,
    config: CriterionConfig,
    m: usize,
    seed: u64,
    coupling: Coupling,
    sample: LossSample,
    base: OptimResult,
}

impl BootstrapSetup {
    pub fn new(
        model: &LossModel,
        config: &CriterionConfig,
        m: usize,
        seed: u64,
        coupling: Coupling,
    ) -> Result<Self> {
        model.validate()?;
        config.validate()?;
        if matches!(
            model.severity,
            crate::loss::SeverityModel::GaussianApprox { .. }
        ) {
            return Err(Error::InvalidParameter(
                "bootstrap needs a claim severity family".into(),
            ));
        }
        let sample = model.simulate(m, derive(seed, purpose::SAMPLE, 0))?;
        let base = optimize_contract(&sample, config)?;
        Ok(Self {
            model: *model,
            config: *config,
            m,
            seed,
            coupling,
            sample,
            base,
        })
    }

    pub fn base(&self) -> &OptimResult {
        &self.base
    }

    pub fn sample(&self) -> &LossSample {
        &self.sample
    }

    /// Runs `reps` replicates with histories of expected size `n`.
    pub fn run(&self, n: f64, reps: usize) -> Result<BootstrapReport> {
        if reps < 2 {
            return Err(Error::InvalidParameter(
                "bootstrap needs at least 2 replicates".into(),
            ));
        }
        if !(n > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "history size must be > 0, got {n}"
            )));
        }
        let ev = CriterionEvaluator::new(&self.sample, &self.config)?;
        let sampler = SeveritySampler::new(&self.model.severity)?;
        let family = self.model.severity.family();
        let exposure = n / self.model.portfolio.intensity;
        let outcomes: Vec<Result<(f64, OptimResult)>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = SimRng::seed_from_u64(derive(self.seed, purpose::HISTORY, r as u64));
                let history = simulate_history_exposure(
                    self.model.portfolio.intensity,
                    &sampler,
                    exposure,
                    &mut rng,
                )?;
                let (mu, severity) = fit_mle(family, &history)?;
                let mut star = self.model;
                star.portfolio.intensity = mu;
                star.severity = severity;
                let seed = match self.coupling {
                    Coupling::Common => derive(self.seed, purpose::SAMPLE, 0),
                    Coupling::Independent => derive(self.seed, purpose::REPLICATE, r as u64),
                };
                let star_sample = star.simulate(self.m, seed)?;
                let a_star = optimize_contract(&star_sample, &self.config)?;
                let c = ev.ratio(&a_star.contract)?;
                Ok((c - self.base.value, a_star))
            })
            .collect();
        let mut d = Vec::with_capacity(reps);
        let (mut r1, mut r2) = (0.0, 0.0);
        let mut dropped = 0;
        for o in outcomes {
            match o {
                Ok((v, a)) => {
                    d.push(v);
                    r1 += a.contract.retention;
                    r2 += a.contract.limit;
                }
                Err(_) => dropped += 1,
            }
        }
        let k = d.len().max(1) as f64;
        let stats = DegradationStats::from_replicates(Method::Bootstrap, n, d, dropped)?;
        Ok(BootstrapReport {
            mean_ratio: self.base.value + stats.mean,
            mean_retention: r1 / k,
            mean_limit: r2 / k,
            base: self.base,
            stats,
        })
    }
}

/// One-shot bootstrap of D around the fitted model.
pub fn bootstrap_degradation(
    fitted: &LossModel,
    config: &CriterionConfig,
    options: &BootstrapOptions,
) -> Result<BootstrapReport> {
    BootstrapSetup::new(fitted, config, options.m, options.seed, options.coupling)?
        .run(options.n, options.reps)
}
