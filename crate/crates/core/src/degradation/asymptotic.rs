//! Large-sample approximations of D.
//!
//! Smooth criteria (CVaR): with Q = 1/2 C_at' C_aa^-1 C_at,
//!   E D = tr(Q Sigma) / n,  sd D = sqrt(2 tr(Q Sigma Q Sigma)) / n.
//! VaR criterion: sqrt(n) D -> {h1 (-V)+ + h2 V} sqrt(g' Sigma g), V ~ N(0,1),
//! with h1 = (1 + beta C) C / a1, h2 = C^2 K(1 - eps) / a1 and g the gradient
//! of x_eps in theta, giving
//!   E D = h1 sqrt(g' Sigma g) / sqrt(2 pi n),
//!   Var D = {(1 - 1/pi) h1^2 - 2 h1 h2 + 2 h2^2} g' Sigma g / (2 n).
//! The variance uses E[(-V)+ V] = -1/2. The often quoted form
//! {(1 - 1/pi) h1^2 + 2 h1 h2 + 2 h2^2} g' Sigma g / (4 n) is available as
//! [`VarAsymptotics::quoted_variance`]; it does not match the limit law.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::cell::RefCell;
use std::f64::consts::PI;

use super::{fisher_sigma, DegradationStats, Method};
use crate::criterion::{CriterionConfig, CriterionEvaluator, LayerContract};
use crate::error::{Error, Result};
use crate::loss::{LossModel, LossSample};
use crate::optimize::{optimize_with, OptimResult};
use crate::premium::KFunction;

/// Second-derivative blocks of C(a, theta) at (a_opt, theta).
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBlocks {
    /// d2C / da da (2 x 2, symmetric).
    pub caa: DMatrix<f64>,
    /// d2C / da dtheta (2 x n_theta).
    pub cat: DMatrix<f64>,
    /// Relative change of the Richardson-extrapolated blocks between the
    /// two finest step pairs.
    pub stability: f64,
}

impl HessianBlocks {
    pub fn min_eigenvalue(&self) -> f64 {
        self.caa
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn raw_blocks<F>(
    f: &mut F,
    a: [f64; 2],
    theta: &[f64],
    ha: [f64; 2],
    ht: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)>
where
    F: FnMut([f64; 2], &[f64]) -> Result<f64>,
{
    let nt = theta.len();
    let shift = |d: usize, s: f64| {
        let mut p = a;
        p[d] += s * ha[d];
        p
    };
    let shift_t = |j: usize, s: f64| {
        let mut t = theta.to_vec();
        t[j] += s * ht[j];
        t
    };
    let f0 = f(a, theta)?;
    let mut caa = DMatrix::zeros(2, 2);
    for d in 0..2 {
        caa[(d, d)] =
            (f(shift(d, 1.0), theta)? - 2.0 * f0 + f(shift(d, -1.0), theta)?) / (ha[d] * ha[d]);
    }
    let corner = |s0: f64, s1: f64| [a[0] + s0 * ha[0], a[1] + s1 * ha[1]];
    let off =
        (f(corner(1.0, 1.0), theta)? - f(corner(1.0, -1.0), theta)? - f(corner(-1.0, 1.0), theta)?
            + f(corner(-1.0, -1.0), theta)?)
            / (4.0 * ha[0] * ha[1]);
    caa[(0, 1)] = off;
    caa[(1, 0)] = off;
    let mut cat = DMatrix::zeros(2, nt);
    for d in 0..2 {
        for j in 0..nt {
            let (tp, tm) = (shift_t(j, 1.0), shift_t(j, -1.0));
            let v = f(shift(d, 1.0), &tp)? - f(shift(d, 1.0), &tm)? - f(shift(d, -1.0), &tp)?
                + f(shift(d, -1.0), &tm)?;
            cat[(d, j)] = v / (4.0 * ha[d] * ht[j]);
        }
    }
    Ok((caa, cat))
}

/// Central-difference blocks at steps h, h/2 and h/4, Richardson
/// extrapolated from the two finest levels. `f` should use common random
/// numbers across theta so that the differences are smooth.
pub fn fd_hessian_blocks<F>(
    mut f: F,
    a: [f64; 2],
    theta: &[f64],
    steps_a: [f64; 2],
    steps_theta: &[f64],
) -> Result<HessianBlocks>
where
    F: FnMut([f64; 2], &[f64]) -> Result<f64>,
{
    if steps_theta.len() != theta.len() {
        return Err(Error::InvalidParameter(
            "one theta step per parameter is required".into(),
        ));
    }
    let mut levels = Vec::with_capacity(3);
    for s in [1.0, 0.5, 0.25] {
        let ha = [steps_a[0] * s, steps_a[1] * s];
        let ht: Vec<f64> = steps_theta.iter().map(|h| h * s).collect();
        levels.push(raw_blocks(&mut f, a, theta, ha, &ht)?);
    }
    let rich = |c: &(DMatrix<f64>, DMatrix<f64>), fi: &(DMatrix<f64>, DMatrix<f64>)| {
        ((&fi.0 * 4.0 - &c.0) / 3.0, (&fi.1 * 4.0 - &c.1) / 3.0)
    };
    let coarse = rich(&levels[0], &levels[1]);
    let fine = rich(&levels[1], &levels[2]);
    let num = (&fine.0 - &coarse.0)
        .norm()
        .max((&fine.1 - &coarse.1).norm());
    let den = fine.0.norm().max(fine.1.norm()).max(f64::MIN_POSITIVE);
    let caa = (&fine.0 + fine.0.transpose()) * 0.5;
    Ok(HessianBlocks {
        caa,
        cat: fine.1,
        stability: num / den,
    })
}

/// Blocks of the criterion on Monte Carlo samples, every perturbed theta
/// simulated with the same seed. Steps are `rel_step` times each coordinate.
pub fn criterion_hessian_blocks(
    model: &LossModel,
    a_opt: &LayerContract,
    config: &CriterionConfig,
    m: usize,
    seed: u64,
    rel_step: f64,
) -> Result<HessianBlocks> {
    let theta = model.theta();
    let cache: RefCell<Vec<(Vec<f64>, LossSample)>> = RefCell::new(Vec::new());
    let f = |a: [f64; 2], t: &[f64]| -> Result<f64> {
        let hit = cache.borrow().iter().position(|(k, _)| k.as_slice() == t);
        let idx = match hit {
            Some(i) => i,
            None => {
                let s = model.with_theta(t)?.simulate(m, seed)?;
                cache.borrow_mut().push((t.to_vec(), s));
                cache.borrow().len() - 1
            }
        };
        let c = cache.borrow();
        let ev = CriterionEvaluator::new(&c[idx].1, config)?;
        ev.ratio(&LayerContract::new(a[0], a[1])?)
    };
    let steps_a = [
        rel_step * a_opt.retention.max(1.0),
        rel_step * a_opt.limit.max(1.0),
    ];
    let steps_t: Vec<f64> = theta.iter().map(|t| rel_step * t.abs().max(1e-3)).collect();
    fd_hessian_blocks(f, [a_opt.retention, a_opt.limit], &theta, steps_a, &steps_t)
}

/// Inputs of the smooth-criterion formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticInputs {
    pub sigma: DMatrix<f64>,
    pub caa: DMatrix<f64>,
    pub cat: DMatrix<f64>,
}

impl AsymptoticInputs {
    /// Q = 1/2 C_at' C_aa^-1 C_at; fails unless C_aa is positive definite.
    pub fn q_matrix(&self) -> Result<DMatrix<f64>> {
        let min = self
            .caa
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::IndefiniteHessian(min));
        }
        let inv = self
            .caa
            .clone()
            .try_inverse()
            .ok_or(Error::Singular("C_aa"))?;
        let q = self.cat.transpose() * inv * &self.cat * 0.5;
        Ok((&q + q.transpose()) * 0.5)
    }
}

/// tr(Q Sigma)/n and sqrt(2 tr(Q Sigma Q Sigma))/n.
pub fn trace_moments(q: &DMatrix<f64>, sigma: &DMatrix<f64>, n: f64) -> (f64, f64) {
    let qs = q * sigma;
    let mean = qs.trace() / n;
    let sd = (2.0 * (&qs * &qs).trace()).max(0.0).sqrt() / n;
    (mean, sd)
}

pub fn asymptotic_smooth(inputs: &AsymptoticInputs, n: f64) -> Result<DegradationStats> {
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!("n must be > 0, got {n}")));
    }
    let (mean, sd) = trace_moments(&inputs.q_matrix()?, &inputs.sigma, n);
    Ok(DegradationStats::from_moments(
        Method::AsymptoticSmooth,
        n,
        mean,
        sd,
    ))
}

/// Optimum, blocks and Sigma for the smooth formulas on one model.
pub fn smooth_inputs(
    model: &LossModel,
    config: &CriterionConfig,
    m: usize,
    seed: u64,
    rel_step: f64,
) -> Result<(AsymptoticInputs, OptimResult, HessianBlocks)> {
    let sample = model.simulate(m, seed)?;
    let opt = optimize_with(&CriterionEvaluator::new(&sample, config)?)?;
    let blocks = criterion_hessian_blocks(model, &opt.contract, config, m, seed, rel_step)?;
    let inputs = AsymptoticInputs {
        sigma: fisher_sigma(model)?,
        caa: blocks.caa.clone(),
        cat: blocks.cat.clone(),
    };
    Ok((inputs, opt, blocks))
}

/// Gradient of the simulated x_eps in theta by central differences with
/// common random numbers.
pub fn quantile_gradient(
    model: &LossModel,
    eps: f64,
    m: usize,
    seed: u64,
    rel_step: f64,
) -> Result<Vec<f64>> {
    let theta = model.theta();
    let mut g = Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        let h = rel_step * theta[j].abs().max(1e-3);
        let mut tp = theta.clone();
        let mut tm = theta.clone();
        tp[j] += h;
        tm[j] -= h;
        let qp = model.with_theta(&tp)?.simulate(m, seed)?.quantile(eps)?;
        let qm = model.with_theta(&tm)?.simulate(m, seed)?.quantile(eps)?;
        g.push((qp - qm) / (2.0 * h));
    }
    Ok(g)
}

/// h1 = (1 + beta C) C / a1 and h2 = C^2 K(1 - eps) / a1.
pub fn var_coefficients(
    ratio: f64,
    retention: f64,
    cost_of_capital: f64,
    k_tail: f64,
) -> Result<(f64, f64)> {
    if !(retention > 0.0) {
        return Err(Error::InvalidParameter(
            "VaR asymptotics need a positive retention a1".into(),
        ));
    }
    Ok((
        (1.0 + cost_of_capital * ratio) * ratio / retention,
        ratio * ratio * k_tail / retention,
    ))
}

/// Limit law of D under the VaR criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct VarAsymptotics {
    pub h1: f64,
    pub h2: f64,
    /// g' Sigma g.
    pub quantile_variance: f64,
    pub k_tail: f64,
    pub gradient: Vec<f64>,
    pub optimum: Option<OptimResult>,
}

impl VarAsymptotics {
    pub fn from_parts(h1: f64, h2: f64, gradient: &[f64], sigma: &DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != gradient.len() || sigma.ncols() != gradient.len() {
            return Err(Error::InvalidParameter(
                "gradient and Sigma dimensions differ".into(),
            ));
        }
        let g = DVector::from_column_slice(gradient);
        let qv = (g.transpose() * sigma * &g)[(0, 0)];
        Ok(Self {
            h1,
            h2,
            quantile_variance: qv,
            k_tail: f64::NAN,
            gradient: gradient.to_vec(),
            optimum: None,
        })
    }

    pub fn mean(&self, n: f64) -> f64 {
        self.h1 * self.quantile_variance.sqrt() / (2.0 * PI * n).sqrt()
    }

    /// Variance of the limit law.
    pub fn variance(&self, n: f64) -> f64 {
        let (h1, h2) = (self.h1, self.h2);
        ((1.0 - 1.0 / PI) * h1 * h1 - 2.0 * h1 * h2 + 2.0 * h2 * h2) * self.quantile_variance
            / (2.0 * n)
    }

    pub fn quoted_variance(&self, n: f64) -> f64 {
        let (h1, h2) = (self.h1, self.h2);
        ((1.0 - 1.0 / PI) * h1 * h1 + 2.0 * h1 * h2 + 2.0 * h2 * h2) * self.quantile_variance
            / (4.0 * n)
    }

    /// One draw of {h1 (-V)+ + h2 V} sqrt(g' Sigma g / n).
    pub fn sample<R: Rng + ?Sized>(&self, n: f64, rng: &mut R) -> f64 {
        let v: f64 = rng.sample(StandardNormal);
        (self.h1 * (-v).max(0.0) + self.h2 * v) * (self.quantile_variance / n).sqrt()
    }

    pub fn stats(&self, n: f64) -> DegradationStats {
        DegradationStats::from_moments(
            Method::AsymptoticVar,
            n,
            self.mean(n),
            self.variance(n).sqrt(),
        )
    }
}

/// VaR limit law at the simulated optimum of `model`.
pub fn asymptotic_var(
    model: &LossModel,
    config: &CriterionConfig,
    m: usize,
    seed: u64,
) -> Result<VarAsymptotics> {
    let sample = model.simulate(m, seed)?;
    let opt = optimize_with(&CriterionEvaluator::new(&sample, config)?)?;
    let k_tail =
        KFunction::new(&config.principle, &opt.contract, &sample)?.eval(1.0 - config.level);
    let (h1, h2) = var_coefficients(
        opt.value,
        opt.contract.retention,
        config.cost_of_capital,
        k_tail,
    )?;
    let g = quantile_gradient(model, config.level, m, seed, 1e-2)?;
    let mut out = VarAsymptotics::from_parts(h1, h2, &g, &fisher_sigma(model)?)?;
    out.k_tail = k_tail;
    out.optimum = Some(opt);
    Ok(out)
}
