use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use super::{ClaimHistory, LossModel, LossSample, PortfolioParams, SeedRecord, SeverityModel};
use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};
use crate::rng::{open_unit, stream};
use crate::special::GammaQuantileTable;

/// Above this mean the count falls back to `rand_distr`'s Poisson sampler.
const TABLE_LIMIT: f64 = 700.0;

/// Poisson counts drawn by inverting a tabulated CDF with one uniform per
/// draw, so counts under nearby means are coupled.
#[derive(Debug, Clone)]
pub struct PoissonCounts {
    lambda: f64,
    cdf: Vec<f64>,
    fallback: Option<Poisson<f64>>,
}

impl PoissonCounts {
    pub fn new(lambda: f64) -> Result<Self> {
        ensure_nonnegative("Poisson mean", lambda)?;
        if lambda == 0.0 {
            return Ok(Self {
                lambda,
                cdf: Vec::new(),
                fallback: None,
            });
        }
        if lambda > TABLE_LIMIT {
            let p = Poisson::new(lambda).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            return Ok(Self {
                lambda,
                cdf: Vec::new(),
                fallback: Some(p),
            });
        }
        let mut cdf = Vec::with_capacity((lambda + 12.0 * lambda.sqrt() + 40.0) as usize);
        let mut p = (-lambda).exp();
        let mut acc = p;
        let mut k = 0.0;
        cdf.push(acc);
        while k < lambda || p > 1e-17 {
            k += 1.0;
            p *= lambda / k;
            acc += p;
            cdf.push(acc);
        }
        Ok(Self {
            lambda,
            cdf,
            fallback: None,
        })
    }

    pub fn mean(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.lambda == 0.0 {
            return 0;
        }
        if let Some(p) = &self.fallback {
            return p.sample(rng) as u64;
        }
        let u = open_unit(rng);
        let k = self.cdf.partition_point(|c| *c < u);
        if k < self.cdf.len() {
            return k as u64;
        }
        // beyond the table: continue the recursion (probability < 1e-17)
        let mut k = self.cdf.len() as f64 - 1.0;
        let mut p = poisson_pmf(self.lambda, k);
        let mut acc = *self.cdf.last().unwrap_or(&0.0);
        while acc < u && p > 0.0 {
            k += 1.0;
            p *= self.lambda / k;
            acc += p;
        }
        k as u64
    }
}

fn poisson_pmf(lambda: f64, k: f64) -> f64 {
    (k * lambda.ln() - lambda - statrs::function::gamma::ln_gamma(k + 1.0)).exp()
}

/// Inverse-transform sampler for one claim severity.
///
/// Each draw is a fixed transform of the underlying uniforms (or standard
/// normals), so two samplers with different parameters fed the same stream
/// produce coupled draws.
#[derive(Debug, Clone)]
pub enum SeveritySampler {
    Gamma {
        table: GammaQuantileTable,
        scale: f64,
    },
    Lognormal {
        log_mean: f64,
        log_sd: f64,
    },
    Pareto {
        inv_shape: f64,
        scale: f64,
    },
}

impl SeveritySampler {
    pub fn new(model: &SeverityModel) -> Result<Self> {
        model.validate()?;
        match *model {
            SeverityModel::Gamma { shape, scale } => Ok(SeveritySampler::Gamma {
                table: GammaQuantileTable::new(shape),
                scale,
            }),
            SeverityModel::Lognormal { log_mean, log_sd } => {
                Ok(SeveritySampler::Lognormal { log_mean, log_sd })
            }
            SeverityModel::Pareto { shape, scale } => Ok(SeveritySampler::Pareto {
                inv_shape: 1.0 / shape,
                scale,
            }),
            SeverityModel::GaussianApprox { .. } => Err(Error::InvalidParameter(
                "the Gaussian surrogate models totals, not claim severities".into(),
            )),
        }
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SeveritySampler::Gamma { table, scale } => scale * table.quantile(open_unit(rng)),
            SeveritySampler::Lognormal { log_mean, log_sd } => {
                let z: f64 = rng.sample(StandardNormal);
                (log_mean + log_sd * z).exp()
            }
            SeveritySampler::Pareto { inv_shape, scale } => {
                scale * (-open_unit(rng).ln() * inv_shape).exp_m1()
            }
        }
    }
}

/// `count` i.i.d. claim severities.
pub fn sample_severity<R: Rng + ?Sized>(
    model: &SeverityModel,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let sampler = SeveritySampler::new(model)?;
    Ok((0..count).map(|_| sampler.draw(rng)).collect())
}

/// `m` compound Poisson totals (Normal draws clamped at zero for the
/// Gaussian surrogate), sorted ascending.
///
/// Total `i` uses its own stream derived from `(seed, i)`: the result is
/// independent of the thread count, and samples simulated under different
/// parameters with the same seed share their random numbers.
pub fn simulate_total_losses(
    portfolio: &PortfolioParams,
    model: &SeverityModel,
    m: usize,
    seed: u64,
) -> Result<LossSample> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "simulation count m must be >= 1".into(),
        ));
    }
    let values: Vec<f64> = match *model {
        SeverityModel::GaussianApprox { mean, sd } => {
            model.validate()?;
            (0..m)
                .into_par_iter()
                .map(|i| {
                    let z: f64 = stream(seed, i as u64).sample(StandardNormal);
                    (mean + sd * z).max(0.0)
                })
                .collect()
        }
        _ => {
            portfolio.validate()?;
            let counts = PoissonCounts::new(portfolio.expected_claims())?;
            let sampler = SeveritySampler::new(model)?;
            (0..m)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream(seed, i as u64);
                    let n = counts.sample(&mut rng);
                    let mut total = 0.0;
                    for _ in 0..n {
                        total += sampler.draw(&mut rng);
                    }
                    total
                })
                .collect()
        }
    };
    let model = LossModel {
        portfolio: *portfolio,
        severity: *model,
    };
    LossSample::from_values(
        values,
        SeedRecord {
            seed,
            model: Some(model),
        },
    )
}

/// Claim history over `policies * horizon` policy-years.
pub fn simulate_history<R: Rng + ?Sized>(
    intensity: f64,
    model: &SeverityModel,
    policies: u64,
    horizon: f64,
    rng: &mut R,
) -> Result<ClaimHistory> {
    if policies == 0 {
        return Err(Error::InvalidParameter(
            "history policy count must be >= 1".into(),
        ));
    }
    ensure_positive("horizon", horizon)?;
    simulate_history_exposure(
        intensity,
        &SeveritySampler::new(model)?,
        policies as f64 * horizon,
        rng,
    )
}

/// Claim history over an arbitrary exposure, reusing a prepared sampler.
pub fn simulate_history_exposure<R: Rng + ?Sized>(
    intensity: f64,
    sampler: &SeveritySampler,
    exposure: f64,
    rng: &mut R,
) -> Result<ClaimHistory> {
    ensure_nonnegative("intensity", intensity)?;
    let n = PoissonCounts::new(intensity * exposure)?.sample(rng);
    let severities = (0..n)
        .map(|_| sampler.draw(rng).max(f64::MIN_POSITIVE))
        .collect();
    ClaimHistory::new(severities, exposure)
}
