//! Posterior-predictive totals and the Bayesian degradation experiment.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma, LogNormal, Pareto, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::posterior::{sample_posterior, PosteriorDraws};
use super::prior::PriorSpec;
use crate::criterion::{CriterionConfig, CriterionEvaluator};
use crate::degradation::{DegradationStats, Method};
use crate::error::{Error, Result};
use crate::loss::{
    ClaimHistory, Family, LossModel, LossSample, PoissonCounts, PortfolioParams, SeedRecord,
    SeverityModel, SeveritySampler,
};
use crate::optimize::{optimize_contract, OptimResult};
use crate::rng::{derive, purpose, stream, SimRng};

fn bad(e: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(e.to_string())
}

/// One total per posterior draw: total i uses (mu_i, zeta_i), a Poisson
/// count with mean J mu_i T and that many severities. Sorted ascending.
pub fn posterior_predictive_losses(
    draws: &PosteriorDraws,
    portfolio: &PortfolioParams,
    m: usize,
    seed: u64,
) -> Result<LossSample> {
    portfolio.validate()?;
    if m == 0 || draws.len() < m {
        return Err(Error::InvalidParameter(format!(
            "need {m} posterior draws, have {}",
            draws.len()
        )));
    }
    let family = draws.severity.family;
    let exposure = portfolio.policies as f64 * portfolio.horizon;
    let values: Result<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let lambda = exposure * draws.mu[i];
            let n = if lambda > 0.0 {
                Poisson::new(lambda).map_err(bad)?.sample(&mut rng) as u64
            } else {
                0
            };
            let [p1, p2] = draws.severity.draws[i];
            let mut total = 0.0;
            match family {
                Family::Gamma => {
                    let g = Gamma::new(p1, p2).map_err(bad)?;
                    for _ in 0..n {
                        total += g.sample(&mut rng);
                    }
                }
                Family::Lognormal => {
                    let g = LogNormal::new(p1, p2).map_err(bad)?;
                    for _ in 0..n {
                        total += g.sample(&mut rng);
                    }
                }
                Family::Pareto => {
                    let g = Pareto::new(p2, p1).map_err(bad)?;
                    for _ in 0..n {
                        total += g.sample(&mut rng) - p2;
                    }
                }
                Family::GaussianApprox => {
                    return Err(bad("no predictive for the Gaussian surrogate"))
                }
            }
            Ok(total)
        })
        .collect();
    LossSample::from_values(values?, SeedRecord { seed, model: None })
}

#[derive(Debug, Clone, Copy)]
pub struct BayesOptions {
    /// Totals per sample and posterior draws per replicate.
    pub m: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for BayesOptions {
    fn default() -> Self {
        Self {
            m: 100_000,
            reps: 50,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesReport {
    pub prior: String,
    /// Policies in the historical portfolio, J_h.
    pub history_policies: f64,
    pub stats: DegradationStats,
    /// a_0 and C(a_0; theta_0).
    pub base: OptimResult,
    pub mean_retention: f64,
    pub mean_limit: f64,
    /// Mean of C(a_B; theta_0).
    pub mean_ratio: f64,
    pub mean_claims: f64,
    /// Posterior sd of (mu, p1, p2), averaged over replicates.
    pub posterior_sd: [f64; 3],
    /// Replicates whose chain raised a warning.
    pub chain_warnings: usize,
}

/// Claims of the largest history with a uniform mark each; smaller
/// histories keep the claims whose mark falls below J_h / J_max, so levels
/// are nested and share random numbers.
struct MarkedHistory {
    claims: Vec<(f64, f64)>,
    policies: f64,
    horizon: f64,
}

impl MarkedHistory {
    fn simulate(
        model: &LossModel,
        sampler: &SeveritySampler,
        policies: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = SimRng::seed_from_u64(seed);
        let lambda = model.portfolio.intensity * policies * model.portfolio.horizon;
        let n = PoissonCounts::new(lambda)?.sample(&mut rng);
        let claims = (0..n)
            .map(|_| {
                (
                    sampler.draw(&mut rng).max(f64::MIN_POSITIVE),
                    rng.random::<f64>(),
                )
            })
            .collect();
        Ok(Self {
            claims,
            policies,
            horizon: model.portfolio.horizon,
        })
    }

    fn level(&self, policies: f64) -> Result<ClaimHistory> {
        let keep = policies / self.policies;
        let y = self
            .claims
            .iter()
            .filter(|c| c.1 < keep)
            .map(|c| c.0)
            .collect();
        ClaimHistory::new(y, policies * self.horizon)
    }
}

/// The theta_0 sample and its optimum a_0.
pub struct BayesSetup {
    model: LossModel,
    config: CriterionConfig,
    m: usize,
    seed: u64,
    sample: LossSample,
    base: OptimResult,
}

struct Outcome {
    d: f64,
    contract: OptimResult,
    claims: usize,
    sd: [f64; 3],
    warned: bool,
}

impl BayesSetup {
    pub fn new(model: &LossModel, config: &CriterionConfig, m: usize, seed: u64) -> Result<Self> {
        model.validate()?;
        config.validate()?;
        if model.severity.family() == Family::GaussianApprox {
            return Err(Error::InvalidParameter(
                "Bayesian degradation needs a claim severity family".into(),
            ));
        }
        let sample = model.simulate(m, derive(seed, purpose::SAMPLE, 0))?;
        let base = optimize_contract(&sample, config)?;
        Ok(Self {
            model: *model,
            config: *config,
            m,
            seed,
            sample,
            base,
        })
    }

    pub fn base(&self) -> &OptimResult {
        &self.base
    }

    /// D and a_B for one set of posterior draws.
    pub fn degradation_for(
        &self,
        draws: &PosteriorDraws,
        predictive_seed: u64,
    ) -> Result<(f64, OptimResult)> {
        let pred =
            posterior_predictive_losses(draws, &self.model.portfolio, self.m, predictive_seed)?;
        let a_b = optimize_contract(&pred, &self.config)?;
        let c = CriterionEvaluator::new(&self.sample, &self.config)?.ratio(&a_b.contract)?;
        Ok((c - self.base.value, a_b))
    }

    fn replicate(&self, prior: &PriorSpec, history: &ClaimHistory, r: u64) -> Result<Outcome> {
        let family = self.model.severity.family();
        let mut rng = SimRng::seed_from_u64(derive(self.seed, purpose::CHAIN, r));
        let draws = sample_posterior(prior, family, history, self.m, &mut rng)?;
        let (d, contract) =
            self.degradation_for(&draws, derive(self.seed, purpose::PREDICTIVE, r))?;
        let k = draws.mu.len() as f64;
        let mu_mean = draws.mu.iter().sum::<f64>() / k;
        let mu_sd =
            (draws.mu.iter().map(|v| (v - mu_mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        let s = draws.severity.sd();
        Ok(Outcome {
            d,
            contract,
            claims: history.claim_count(),
            sd: [mu_sd, s[0], s[1]],
            warned: !draws.severity.diagnostics.warnings.is_empty(),
        })
    }

    /// One report per historical portfolio size, replicate r sharing its
    /// history (thinned), chain seed and predictive seed across sizes.
    pub fn run_levels(
        &self,
        prior: &PriorSpec,
        policies: &[f64],
        reps: usize,
    ) -> Result<Vec<BayesReport>> {
        prior.validate()?;
        if reps < 2 {
            return Err(Error::InvalidParameter(
                "Bayesian degradation needs at least 2 replicates".into(),
            ));
        }
        if policies.is_empty() || policies.iter().any(|j| !(*j > 0.0)) {
            return Err(Error::InvalidParameter(
                "historical portfolio sizes must be > 0".into(),
            ));
        }
        let j_max = policies.iter().copied().fold(0.0, f64::max);
        let sampler = SeveritySampler::new(&self.model.severity)?;
        let per_rep: Vec<Vec<Result<Outcome>>> = (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                let hist = MarkedHistory::simulate(
                    &self.model,
                    &sampler,
                    j_max,
                    derive(self.seed, purpose::HISTORY, r),
                );
                policies
                    .iter()
                    .map(|&j| {
                        let h = hist
                            .as_ref()
                            .map_err(|e| Error::DegenerateData(e.to_string()))?
                            .level(j)?;
                        self.replicate(prior, &h, r)
                    })
                    .collect()
            })
            .collect();
        policies
            .iter()
            .enumerate()
            .map(|(l, &j)| {
                let mut d = Vec::with_capacity(reps);
                let (mut r1, mut r2, mut claims, mut warned, mut dropped) = (0.0, 0.0, 0.0, 0, 0);
                let mut sd = [0.0; 3];
                for rep in &per_rep {
                    match &rep[l] {
                        Ok(o) => {
                            d.push(o.d);
                            r1 += o.contract.contract.retention;
                            r2 += o.contract.contract.limit;
                            claims += o.claims as f64;
                            warned += usize::from(o.warned);
                            for k in 0..3 {
                                sd[k] += o.sd[k];
                            }
                        }
                        Err(_) => dropped += 1,
                    }
                }
                let k = d.len().max(1) as f64;
                let stats = DegradationStats::from_replicates(Method::Bayes, j, d, dropped)?;
                Ok(BayesReport {
                    prior: prior.name().to_string(),
                    history_policies: j,
                    mean_ratio: self.base.value + stats.mean,
                    mean_retention: r1 / k,
                    mean_limit: r2 / k,
                    mean_claims: claims / k,
                    posterior_sd: sd.map(|s| s / k),
                    chain_warnings: warned,
                    base: self.base,
                    stats,
                })
            })
            .collect()
    }
}

/// D(theta_0) = C(a_B; theta_0) - C(a_0; theta_0) over `reps` simulated
/// histories from a portfolio of `history_policies` policies.
pub fn bayes_degradation(
    model: &LossModel,
    prior: &PriorSpec,
    history_policies: f64,
    config: &CriterionConfig,
    options: &BayesOptions,
) -> Result<BayesReport> {
    let setup = BayesSetup::new(model, config, options.m, options.seed)?;
    Ok(setup
        .run_levels(prior, &[history_policies], options.reps)?
        .remove(0))
}

/// Point-mass posterior at the model's own parameters.
pub fn point_mass_draws(model: &LossModel, m: usize) -> Result<PosteriorDraws> {
    match model.severity {
        SeverityModel::GaussianApprox { .. } => {
            Err(bad("no point mass for the Gaussian surrogate"))
        }
        s => PosteriorDraws::point_mass(model.portfolio.intensity, &s, m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ks(a: &[f64], b: &[f64]) -> f64 {
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn point_mass_predictive_matches_plug_in() {
        for sev in [
            SeverityModel::Gamma {
                shape: 0.44,
                scale: 22.5,
            },
            SeverityModel::Lognormal {
                log_mean: 1.71,
                log_sd: 1.09,
            },
            SeverityModel::Pareto {
                shape: 3.6,
                scale: 26.0,
            },
        ] {
            let model = LossModel::new(PortfolioParams::default(), sev).unwrap();
            let m = 100_000;
            let draws = point_mass_draws(&model, m).unwrap();
            let pred = posterior_predictive_losses(&draws, &model.portfolio, m, 9).unwrap();
            let plug = model.simulate(m, 10).unwrap();
            let d = ks(pred.values(), plug.values());
            assert!(d < 0.01, "{sev:?}: KS {d}");
        }
    }

    #[test]
    fn point_mass_prior_has_no_degradation() {
        let model = LossModel::new(
            PortfolioParams::default(),
            SeverityModel::Gamma {
                shape: 0.44,
                scale: 22.5,
            },
        )
        .unwrap();
        let setup = BayesSetup::new(&model, &CriterionConfig::default(), 100_000, 3).unwrap();
        let draws = point_mass_draws(&model, 100_000).unwrap();
        let (d, _) = setup.degradation_for(&draws, 77).unwrap();
        assert!(d.abs() < 0.1, "{d}");
    }

    #[test]
    fn nested_levels_are_thinned() {
        let model = LossModel::new(
            PortfolioParams::default(),
            SeverityModel::Gamma {
                shape: 0.44,
                scale: 22.5,
            },
        )
        .unwrap();
        let sampler = SeveritySampler::new(&model.severity).unwrap();
        let h = MarkedHistory::simulate(&model, &sampler, 1e5, 4).unwrap();
        let big = h.level(1e5).unwrap();
        let small = h.level(1e3).unwrap();
        assert!(small.severities.iter().all(|y| big.severities.contains(y)));
        assert!((big.claim_count() as f64 - 5000.0).abs() < 300.0);
        assert!((small.claim_count() as f64 - 50.0).abs() < 30.0);
        assert_eq!(small.exposure, 1e3);
    }

    #[test]
    fn small_run_is_deterministic() {
        let model = LossModel::new(
            PortfolioParams::default(),
            SeverityModel::Lognormal {
                log_mean: 1.71,
                log_sd: 1.09,
            },
        )
        .unwrap();
        let opts = BayesOptions {
            m: 10_000,
            reps: 3,
            seed: 2,
        };
        let prior = PriorSpec::informative(Family::Lognormal).unwrap();
        let a = bayes_degradation(&model, &prior, 1e4, &CriterionConfig::default(), &opts).unwrap();
        let b = bayes_degradation(&model, &prior, 1e4, &CriterionConfig::default(), &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.stats.replicates.len(), 3);
    }
}
