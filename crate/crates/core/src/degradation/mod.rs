//! Degradation D = C(a_hat, theta) - C(a_opt, theta): how much worse a
//! contract optimised under estimated parameters performs under the model
//! it is judged by.
//!
//! Estimated by nested bootstrap ([`bootstrap`]) and approximated by the
//! large-sample formulas in [`asymptotic`]: E D = tr(Q Sigma)/n for smooth
//! criteria and a half-normal type limit of order 1/sqrt(n) for VaR.

pub mod asymptotic;
pub mod bootstrap;
pub mod fisher;
pub mod samplesize;

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

pub use asymptotic::{
    asymptotic_smooth, asymptotic_var, criterion_hessian_blocks, fd_hessian_blocks,
    quantile_gradient, var_coefficients, AsymptoticInputs, HessianBlocks, VarAsymptotics,
};
pub use bootstrap::{
    bootstrap_degradation, BootstrapOptions, BootstrapReport, BootstrapSetup, Coupling,
};
pub use fisher::{fisher_sigma, poisson_sigma_per_exposure};
pub use samplesize::{sample_size_for_rmse, SampleSizeOptions, SampleSizeResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bootstrap,
    AsymptoticSmooth,
    AsymptoticVar,
    Bayes,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bootstrap => "bootstrap",
            Method::AsymptoticSmooth => "asymptotic-smooth",
            Method::AsymptoticVar => "asymptotic-var",
            Method::Bayes => "bayes",
        })
    }
}

/// Mean, standard deviation and replicates of D at history size `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationStats {
    pub method: Method,
    pub n: f64,
    pub mean: f64,
    pub sd: f64,
    pub replicates: Vec<f64>,
    /// Replicates that failed (fit, optimizer or infeasible contract).
    pub dropped: usize,
}

impl DegradationStats {
    pub fn from_replicates(
        method: Method,
        n: f64,
        replicates: Vec<f64>,
        dropped: usize,
    ) -> Result<Self> {
        if replicates.is_empty() {
            return Err(Error::AllReplicatesFailed(dropped));
        }
        let k = replicates.len() as f64;
        let mean = replicates.iter().sum::<f64>() / k;
        let sd = if replicates.len() > 1 {
            (replicates.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            method,
            n,
            mean,
            sd,
            replicates,
            dropped,
        })
    }

    /// Moments without replicates, for the closed-form methods.
    pub fn from_moments(method: Method, n: f64, mean: f64, sd: f64) -> Self {
        Self {
            method,
            n,
            mean,
            sd,
            replicates: Vec::new(),
            dropped: 0,
        }
    }

    /// sqrt(E D^2) over the replicates.
    pub fn rmse(&self) -> f64 {
        if self.replicates.is_empty() {
            return (self.mean * self.mean + self.sd * self.sd).sqrt();
        }
        (self.replicates.iter().map(|d| d * d).sum::<f64>() / self.replicates.len() as f64).sqrt()
    }
}

/// Least-squares slope of log E[D] against log n.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<f64> {
    if let Some((n, m)) = points.iter().find(|(n, m)| !(*n > 0.0 && *m > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs positive n and mean, got ({n}, {m})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if points.len() < 2 || sxx <= 1e-24 {
        return Err(Error::InvalidParameter(
            "rate fit needs at least two distinct n".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slopes_of_exact_power_laws() {
        let half: Vec<(f64, f64)> = [50.0, 500.0, 5000.0]
            .iter()
            .map(|n: &f64| (*n, 3.0 / n.sqrt()))
            .collect();
        assert!((rate_fit(&half).unwrap() + 0.5).abs() < 1e-12);
        let one: Vec<(f64, f64)> = [10.0, 1e4].iter().map(|n: &f64| (*n, 2.0 / n)).collect();
        assert!((rate_fit(&one).unwrap() + 1.0).abs() < 1e-12);
        assert!(rate_fit(&[(10.0, 1.0)]).is_err());
        assert!(rate_fit(&[(10.0, 1.0), (10.0, 2.0)]).is_err());
        assert!(rate_fit(&[(10.0, 1.0), (20.0, 0.0)]).is_err());
    }

    #[test]
    fn stats_from_replicates() {
        let s = DegradationStats::from_replicates(Method::Bootstrap, 10.0, vec![1.0, 2.0, 3.0], 1)
            .unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, 1.0);
        assert!((s.rmse() - (14.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(DegradationStats::from_replicates(Method::Bayes, 1.0, vec![], 4).is_err());
    }
}
