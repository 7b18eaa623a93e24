//! Smallest history size whose bootstrap RMSE of D meets a target.

use serde::{Deserialize, Serialize};

use super::bootstrap::{BootstrapSetup, Coupling};
use crate::criterion::CriterionConfig;
use crate::error::{Error, Result};
use crate::loss::LossModel;

#[derive(Debug, Clone, Copy)]
pub struct SampleSizeOptions {
    /// Target for sqrt(E D^2), in criterion units (0.25 for "25%").
    pub target: f64,
    pub n_min: f64,
    pub n_max: f64,
    pub reps: usize,
    pub m: usize,
    pub seed: u64,
    /// Bisection steps on log n after the end points.
    pub max_steps: usize,
}

impl Default for SampleSizeOptions {
    fn default() -> Self {
        Self {
            target: 0.25,
            n_min: 50.0,
            n_max: 200_000.0,
            reps: 30,
            m: 50_000,
            seed: 1,
            max_steps: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeResult {
    pub n: f64,
    pub rmse: f64,
    /// Every (n, RMSE) evaluated, in order.
    pub trace: Vec<(f64, f64)>,
}

/// Bisection on log n; returns the smallest tested n meeting the target.
/// All evaluations share one seed so RMSE(n) is a smooth function of n.
pub fn sample_size_for_rmse(
    model: &LossModel,
    config: &CriterionConfig,
    opts: &SampleSizeOptions,
) -> Result<SampleSizeResult> {
    if !(opts.target > 0.0 && opts.target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target must lie in (0, 1), got {}",
            opts.target
        )));
    }
    if !(opts.n_min > 0.0 && opts.n_max > opts.n_min) {
        return Err(Error::InvalidParameter("need 0 < n_min < n_max".into()));
    }
    let setup = BootstrapSetup::new(model, config, opts.m, opts.seed, Coupling::Common)?;
    let mut trace = Vec::new();
    let mut rmse_at = |n: f64| -> Result<f64> {
        let r = setup.run(n, opts.reps)?.stats.rmse();
        trace.push((n, r));
        Ok(r)
    };
    let r_hi = rmse_at(opts.n_max)?;
    if r_hi > opts.target {
        return Err(Error::BudgetExhausted {
            n_max: opts.n_max,
            rmse: r_hi,
            target: opts.target,
        });
    }
    let r_lo = rmse_at(opts.n_min)?;
    if r_lo <= opts.target {
        return Ok(SampleSizeResult {
            n: opts.n_min,
            rmse: r_lo,
            trace,
        });
    }
    let (mut lo, mut hi, mut best) = (opts.n_min, opts.n_max, r_hi);
    for _ in 0..opts.max_steps {
        if hi / lo < 1.05 {
            break;
        }
        let mid = (lo * hi).sqrt().round();
        let r = rmse_at(mid)?;
        if r <= opts.target {
            hi = mid;
            best = r;
        } else {
            lo = mid;
        }
    }
    Ok(SampleSizeResult {
        n: hi,
        rmse: best,
        trace,
    })
}
