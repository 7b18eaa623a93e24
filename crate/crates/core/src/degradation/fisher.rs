//! Asymptotic covariance of the maximum-likelihood estimates.
//!
//! Sigma is the inverse Fisher information per expected claim, so
//! sqrt(n)(theta_hat - theta) -> N(0, Sigma) with n the expected claim
//! count of the history. Frequency and severity blocks are independent.

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::loss::{LossModel, SeverityModel};
use crate::special::trigamma;

/// Fisher information of one severity observation.
pub fn severity_information(model: &SeverityModel) -> Result<Matrix2<f64>> {
    model.validate()?;
    Ok(match *model {
        SeverityModel::Gamma { shape: a, scale: b } => {
            Matrix2::new(trigamma(a), 1.0 / b, 1.0 / b, a / (b * b))
        }
        SeverityModel::Lognormal { log_sd: s, .. } => {
            Matrix2::new(1.0 / (s * s), 0.0, 0.0, 2.0 / (s * s))
        }
        SeverityModel::Pareto { shape: a, scale: b } => {
            let off = -1.0 / (b * (a + 1.0));
            Matrix2::new(1.0 / (a * a), off, off, a / (b * b * (a + 2.0)))
        }
        SeverityModel::GaussianApprox { .. } => {
            return Err(Error::InvalidParameter(
                "the Gaussian surrogate has no claim-level likelihood".into(),
            ))
        }
    })
}

/// Var(mu_hat) per unit exposure: exposure * Var(N / exposure) = mu.
pub fn poisson_sigma_per_exposure(intensity: f64) -> f64 {
    intensity
}

/// Sigma for theta = (intensity, severity parameters), per expected claim.
/// With n expected claims the exposure is n / mu, so Var(mu_hat) = mu^2 / n.
pub fn fisher_sigma(model: &LossModel) -> Result<DMatrix<f64>> {
    model.validate()?;
    let info = severity_information(&model.severity)?;
    let inv = info
        .try_inverse()
        .ok_or(Error::Singular("severity Fisher information"))?;
    let mu = model.portfolio.intensity;
    let mut s = DMatrix::zeros(3, 3);
    s[(0, 0)] = mu * mu;
    for i in 0..2 {
        for j in 0..2 {
            s[(i + 1, j + 1)] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
        }
    }
    Ok(s)
}
