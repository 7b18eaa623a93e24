//! Posterior samplers for the claim intensity and severity parameters.
//!
//! Poisson and Lognormal posteriors are drawn exactly. The Gamma shape and
//! the Pareto scale use a random-walk Metropolis-Hastings chain on the log
//! scale, tuned during burn-in; the conjugate parameter is then drawn from
//! its closed-form conditional. Where that conjugate parameter can be
//! integrated out in closed form (Gamma under both priors, Pareto under the
//! informative prior), the chain targets the resulting marginal, which
//! mixes much faster than alternating updates.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::io::Write;
use std::path::Path;

use super::prior::{pareto_shape_log_kernel, GammaHyper, PriorSpec, SeverityHyper};
use crate::error::{Error, Result};
use crate::loss::{fit_severity, ClaimHistory, Family, SeverityModel};
use crate::rng::{fork, SimRng};
use crate::special::trigamma;

pub const BURN_IN: usize = 1000;
const ADAPT_BATCH: usize = 50;
const TARGET_ACCEPTANCE: f64 = 0.35;
/// Data size above which the Pareto log-likelihood is interpolated.
const SPLINE_MIN_N: usize = 256;

/// Chain health summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// Acceptance rate of the tuned random walk after burn-in.
    pub acceptance: Option<f64>,
    /// Final random-walk step on the log scale.
    pub step: Option<f64>,
    /// Batch-means effective sample size of the sampled coordinate.
    pub effective_size: f64,
    pub geweke_z: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityPosterior {
    pub family: Family,
    /// Parameters in [`SeverityModel`] order.
    pub draws: Vec<[f64; 2]>,
    pub diagnostics: ChainDiagnostics,
}

impl SeverityPosterior {
    pub fn mean(&self) -> [f64; 2] {
        mean_sd(&self.draws).0
    }

    pub fn sd(&self) -> [f64; 2] {
        mean_sd(&self.draws).1
    }
}

fn mean_sd(draws: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let k = draws.len().max(1) as f64;
    let mut m = [0.0; 2];
    for d in draws {
        m[0] += d[0] / k;
        m[1] += d[1] / k;
    }
    let mut v = [0.0; 2];
    for d in draws {
        v[0] += (d[0] - m[0]).powi(2);
        v[1] += (d[1] - m[1]).powi(2);
    }
    let den = (k - 1.0).max(1.0);
    (m, [(v[0] / den).sqrt(), (v[1] / den).sqrt()])
}

/// Joint posterior draws of (mu, severity parameters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub mu: Vec<f64>,
    pub severity: SeverityPosterior,
}

impl PosteriorDraws {
    /// Every draw equal to the given parameters.
    pub fn point_mass(mu: f64, model: &SeverityModel, m: usize) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            mu: vec![mu; m],
            severity: SeverityPosterior {
                family: model.family(),
                draws: vec![model.params(); m],
                diagnostics: ChainDiagnostics::default(),
            },
        })
    }

    pub fn len(&self) -> usize {
        self.mu.len().min(self.severity.draws.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One row per draw: mu and the two severity parameters.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let names = match self.severity.family {
            Family::Lognormal => ["log_mean", "log_sd"],
            _ => ["shape", "scale"],
        };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["draw", "mu", names[0], names[1]])?;
        for (i, (mu, p)) in self.mu.iter().zip(&self.severity.draws).enumerate() {
            w.write_record([
                i.to_string(),
                mu.to_string(),
                p[0].to_string(),
                p[1].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn gamma_draw<R: Rng + ?Sized>(h: GammaHyper, rng: &mut R) -> Result<f64> {
    Ok(Gamma::new(h.shape, h.scale)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(rng))
}

fn draws_of<R: Rng + ?Sized>(h: GammaHyper, m: usize, rng: &mut R) -> Result<Vec<f64>> {
    let g = Gamma::new(h.shape, h.scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((0..m).map(|_| g.sample(rng)).collect())
}

/// Posterior of mu after `claims` claims over `exposure`: Gamma(a0 + n,
/// b0 / (b0 A + 1)) under a Gamma(a0, b0) prior, Gamma(n + 1/2, 1/A) under
/// Jeffreys.
pub fn poisson_posterior(prior: &PriorSpec, claims: usize, exposure: f64) -> Result<GammaHyper> {
    prior.validate()?;
    crate::error::ensure_positive("exposure", exposure)?;
    let n = claims as f64;
    Ok(match prior {
        PriorSpec::Jeffreys => GammaHyper::new(n + 0.5, 1.0 / exposure),
        PriorSpec::Conjugate(h) => {
            let GammaHyper { shape, scale } = h.frequency;
            GammaHyper::new(shape + n, scale / (scale * exposure + 1.0))
        }
    })
}

pub fn sample_posterior_poisson<R: Rng + ?Sized>(
    prior: &PriorSpec,
    history: &ClaimHistory,
    m: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    draws_of(
        poisson_posterior(prior, history.claim_count(), history.exposure)?,
        m,
        rng,
    )
}

/// Conditional posterior of the Gamma rate 1/scale given the shape:
/// Gamma(r0 + a n, 1 / (sum y + 1/s0)) under a Gamma(r0, s0) prior on the
/// rate, Gamma(a n, 1 / sum y) under Jeffreys.
pub fn gamma_rate_posterior(rate_prior: Option<GammaHyper>, shape: f64, y: &[f64]) -> GammaHyper {
    gamma_rate_posterior_from_sum(rate_prior, shape, y.iter().sum(), y.len())
}

fn gamma_rate_posterior_from_sum(
    rate_prior: Option<GammaHyper>,
    shape: f64,
    sum: f64,
    n: usize,
) -> GammaHyper {
    let n = n as f64;
    match rate_prior {
        Some(h) => GammaHyper::new(h.shape + shape * n, 1.0 / (sum + 1.0 / h.scale)),
        None => GammaHyper::new(shape * n, 1.0 / sum),
    }
}

/// Conditional posterior of the Pareto shape given the scale b:
/// Gamma(a0 + n, 1 / (sum log(1 + y/b) + 1/s0)). Under Jeffreys this is
/// Gamma(n + 1, 1 / sum log(1 + y/b)) times the prior's shape kernel.
pub fn pareto_shape_posterior(
    shape_prior: Option<GammaHyper>,
    scale: f64,
    y: &[f64],
) -> GammaHyper {
    let s: f64 = y.iter().map(|v| (v / scale).ln_1p()).sum();
    pareto_shape_posterior_from_sum(shape_prior, s, y.len())
}

fn pareto_shape_posterior_from_sum(
    shape_prior: Option<GammaHyper>,
    s: f64,
    n: usize,
) -> GammaHyper {
    let n = n as f64;
    match shape_prior {
        Some(h) => GammaHyper::new(h.shape + n, 1.0 / (s + 1.0 / h.scale)),
        None => GammaHyper::new(n + 1.0, 1.0 / s),
    }
}

/// Normal-inverse-Gamma posterior of (xi, 1/sigma^2) for log-claims.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NigPosterior {
    pub xi: f64,
    pub kappa: f64,
    pub precision: GammaHyper,
}

/// Conjugate update; `None` is the sigma^-2 prior, giving xi | sigma^2 ~
/// N(mean log y, sigma^2 / n) and 1/sigma^2 ~ Gamma((n-1)/2, 2 / S) with S
/// the centred sum of squares.
pub fn lognormal_posterior(
    hyper: Option<(f64, f64, GammaHyper)>,
    y: &[f64],
) -> Result<NigPosterior> {
    let n = y.len() as f64;
    let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mean = logs.iter().sum::<f64>() / n;
    let ss: f64 = logs.iter().map(|l| (l - mean).powi(2)).sum();
    match hyper {
        Some((xi0, kappa0, h)) => {
            let rate =
                1.0 / h.scale + 0.5 * ss + kappa0 * n / (2.0 * (kappa0 + n)) * (mean - xi0).powi(2);
            Ok(NigPosterior {
                xi: (n * mean + kappa0 * xi0) / (kappa0 + n),
                kappa: kappa0 + n,
                precision: GammaHyper::new(h.shape + n / 2.0, 1.0 / rate),
            })
        }
        None => {
            if y.len() < 2 || !(ss > 0.0) {
                return Err(Error::DegenerateData(
                    "lognormal posterior needs two distinct claims".into(),
                ));
            }
            Ok(NigPosterior {
                xi: mean,
                kappa: n,
                precision: GammaHyper::new((n - 1.0) / 2.0, 2.0 / ss),
            })
        }
    }
}

/// Random walk on one log-scale coordinate with burn-in step tuning.
struct LogWalk {
    step: f64,
    accepted: usize,
    proposed: usize,
}

impl LogWalk {
    fn new(step: f64) -> Self {
        Self {
            step,
            accepted: 0,
            proposed: 0,
        }
    }

    /// One update of `u` with log target `lp` (value at `u` cached in `cur`).
    fn update<R: Rng + ?Sized, F: FnMut(f64) -> f64>(
        &mut self,
        u: &mut f64,
        cur: &mut f64,
        lp: &mut F,
        rng: &mut R,
    ) {
        let z: f64 = rng.sample(StandardNormal);
        let prop = *u + self.step * z;
        let lq = lp(prop);
        self.proposed += 1;
        if lq.is_finite() && (lq >= *cur || rng.random::<f64>().ln() < lq - *cur) {
            *u = prop;
            *cur = lq;
            self.accepted += 1;
        }
    }

    fn rate(&self) -> f64 {
        self.accepted as f64 / self.proposed.max(1) as f64
    }

    fn adapt(&mut self) {
        self.step *= (2.0 * (self.rate() - TARGET_ACCEPTANCE)).exp();
        self.accepted = 0;
        self.proposed = 0;
    }
}

/// Runs burn-in with tuning, then `m` iterations; `record` sees the state
/// after each kept iteration.
fn run_chain<R, F, G>(
    u0: f64,
    step0: f64,
    m: usize,
    mut lp: F,
    mut record: G,
    rng: &mut R,
) -> ChainDiagnostics
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
    G: FnMut(f64, &mut R),
{
    let mut walk = LogWalk::new(step0);
    let mut u = u0;
    let mut cur = lp(u);
    for i in 0..BURN_IN {
        walk.update(&mut u, &mut cur, &mut lp, rng);
        if (i + 1) % ADAPT_BATCH == 0 {
            walk.adapt();
        }
    }
    walk.accepted = 0;
    walk.proposed = 0;
    let mut trace = Vec::with_capacity(m);
    for _ in 0..m {
        walk.update(&mut u, &mut cur, &mut lp, rng);
        trace.push(u);
        record(u, rng);
    }
    chain_diagnostics(&trace, Some(walk.rate()), Some(walk.step))
}

fn chain_diagnostics(
    trace: &[f64],
    acceptance: Option<f64>,
    step: Option<f64>,
) -> ChainDiagnostics {
    let mut warnings = Vec::new();
    if let Some(a) = acceptance {
        if !(0.05..=0.95).contains(&a) {
            warnings.push(format!(
                "Metropolis-Hastings acceptance {a:.3} outside [0.05, 0.95]"
            ));
        }
    }
    ChainDiagnostics {
        acceptance,
        step,
        effective_size: effective_size(trace),
        geweke_z: geweke_z(trace),
        warnings,
    }
}

fn batch_means(x: &[f64], batches: usize) -> Vec<f64> {
    let b = x.len() / batches;
    (0..batches)
        .map(|i| x[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64)
        .collect()
}

fn variance(x: &[f64]) -> f64 {
    let k = x.len() as f64;
    let m = x.iter().sum::<f64>() / k;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1.0)
}

/// n var(x) / (b var(batch means)) with batches of size about sqrt(n).
pub fn effective_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 16 {
        return n as f64;
    }
    let batches = (n as f64).sqrt() as usize;
    let b = n / batches;
    let vb = variance(&batch_means(&x[..batches * b], batches));
    let vx = variance(x);
    if !(vb > 0.0) {
        return n as f64;
    }
    (n as f64 * vx / (b as f64 * vb)).min(n as f64)
}

/// Geweke statistic comparing the first 10% and last 50% of a chain, with
/// batch-means standard errors. `None` for chains shorter than 200.
pub fn geweke_z(x: &[f64]) -> Option<f64> {
    if x.len() < 200 {
        return None;
    }
    let n = x.len();
    let a = &x[..n / 10];
    let b = &x[n / 2..];
    let se2 = |s: &[f64]| {
        let bm = batch_means(s, 20);
        variance(&bm) / 20.0
    };
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let den = (se2(a) + se2(b)).sqrt();
    if den > 0.0 {
        Some((ma - mb) / den)
    } else {
        Some(0.0)
    }
}

/// S(b) = sum log(1 + y/b), tabulated as a cubic Hermite spline in log b
/// for large samples.
struct LogShiftSum<'a> {
    y: &'a [f64],
    table: Option<(f64, f64, Vec<f64>, Vec<f64>)>,
}

impl<'a> LogShiftSum<'a> {
    fn new(y: &'a [f64], centre: f64) -> Self {
        let mut me = Self { y, table: None };
        if y.len() > SPLINE_MIN_N {
            let (h, half) = (0.02, 4.0);
            let v0 = centre.ln() - half;
            let k = (2.0 * half / h) as usize + 1;
            let mut vals = Vec::with_capacity(k);
            let mut ders = Vec::with_capacity(k);
            for i in 0..k {
                let (s, d) = me.direct(v0 + i as f64 * h);
                vals.push(s);
                ders.push(d);
            }
            me.table = Some((v0, h, vals, ders));
        }
        me
    }

    /// S and dS/dlog b at log b = v.
    fn direct(&self, v: f64) -> (f64, f64) {
        let b = v.exp();
        let mut s = 0.0;
        let mut d = 0.0;
        for &y in self.y {
            s += (y / b).ln_1p();
            d -= y / (b + y);
        }
        (s, d)
    }

    fn eval_log(&self, v: f64) -> f64 {
        if let Some((v0, h, vals, ders)) = &self.table {
            let t = (v - v0) / h;
            if t >= 0.0 && t < (vals.len() - 1) as f64 {
                let i = t as usize;
                let s = t - i as f64;
                let (p0, p1) = (vals[i], vals[i + 1]);
                let (m0, m1) = (ders[i] * h, ders[i + 1] * h);
                let s2 = s * s;
                let s3 = s2 * s;
                return (2.0 * s3 - 3.0 * s2 + 1.0) * p0
                    + (s3 - 2.0 * s2 + s) * m0
                    + (-2.0 * s3 + 3.0 * s2) * p1
                    + (s3 - s2) * m1;
            }
        }
        self.direct(v).0
    }
}

fn check_claims(y: &[f64]) -> Result<()> {
    if y.len() < 2 {
        return Err(Error::DegenerateData(format!(
            "posterior needs at least 2 claims, got {}",
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "claim severities must be > 0, found {bad}"
        )));
    }
    Ok(())
}

fn severity_hyper(prior: &PriorSpec, family: Family) -> Result<Option<SeverityHyper>> {
    match prior {
        PriorSpec::Jeffreys => Ok(None),
        PriorSpec::Conjugate(h) if h.severity.family() == family => Ok(Some(h.severity)),
        PriorSpec::Conjugate(h) => Err(Error::InvalidParameter(format!(
            "prior is for {} severities, data model is {family}",
            h.severity.family()
        ))),
    }
}

/// `m` posterior draws of the severity parameters after a burn-in of
/// [`BURN_IN`] iterations (no thinning).
pub fn sample_posterior_severity<R: Rng + ?Sized>(
    family: Family,
    prior: &PriorSpec,
    y: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<SeverityPosterior> {
    prior.validate()?;
    check_claims(y)?;
    if m == 0 {
        return Err(Error::InvalidParameter(
            "posterior draw count m must be >= 1".into(),
        ));
    }
    let hyper = severity_hyper(prior, family)?;
    let n = y.len() as f64;
    match family {
        Family::Lognormal => {
            let nig = lognormal_posterior(
                hyper.map(|h| match h {
                    SeverityHyper::Lognormal {
                        xi0,
                        kappa0,
                        precision,
                    } => (xi0, kappa0, precision),
                    _ => unreachable!(),
                }),
                y,
            )?;
            let g = Gamma::new(nig.precision.shape, nig.precision.scale)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let draws = (0..m)
                .map(|_| {
                    let tau = g.sample(rng);
                    let z: f64 = rng.sample(StandardNormal);
                    [nig.xi + z / (tau * nig.kappa).sqrt(), 1.0 / tau.sqrt()]
                })
                .collect();
            Ok(SeverityPosterior {
                family,
                draws,
                diagnostics: ChainDiagnostics {
                    effective_size: m as f64,
                    ..Default::default()
                },
            })
        }
        Family::Gamma => {
            let (shape_prior, rate_prior) = match hyper {
                Some(SeverityHyper::Gamma { shape, rate }) => (Some(shape), Some(rate)),
                _ => (None, None),
            };
            let sum: f64 = y.iter().sum();
            let sum_log: f64 = y.iter().map(|v| v.ln()).sum();
            // log p(a | y) with the rate integrated out, plus the log-scale Jacobian.
            let lp = |u: f64| -> f64 {
                let a = u.exp();
                let (prior_term, r_shape, r_rate) = match (shape_prior, rate_prior) {
                    (Some(sp), Some(rp)) => {
                        (sp.log_kernel(a), rp.shape + a * n, sum + 1.0 / rp.scale)
                    }
                    _ => (
                        0.5 * (a * trigamma(a) - 1.0).max(f64::MIN_POSITIVE).ln(),
                        a * n,
                        sum,
                    ),
                };
                prior_term + ln_gamma(r_shape) - r_shape * r_rate.ln() - n * ln_gamma(a)
                    + (a - 1.0) * sum_log
                    + u
            };
            let start = match fit_severity(Family::Gamma, y) {
                Ok(SeverityModel::Gamma { shape, .. }) => shape,
                _ => {
                    let mean = sum / n;
                    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    (mean * mean / var).clamp(1e-3, 1e3)
                }
            };
            let step0 = 2.4 / (n * start * (start * trigamma(start) - 1.0).max(1e-12)).sqrt();
            let mut draws = Vec::with_capacity(m);
            let mut rec = |u: f64, rng: &mut R| {
                let a = u.exp();
                let post = gamma_rate_posterior_from_sum(rate_prior, a, sum, y.len());
                let rate = gamma_draw(post, rng).unwrap_or(f64::NAN);
                draws.push([a, 1.0 / rate]);
            };
            let diagnostics = run_chain(start.ln(), step0.min(1.0), m, lp, &mut rec, rng);
            if draws.iter().any(|d| !(d[1].is_finite() && d[1] > 0.0)) {
                return Err(Error::DegenerateData(
                    "gamma posterior produced an invalid scale".into(),
                ));
            }
            Ok(SeverityPosterior {
                family,
                draws,
                diagnostics,
            })
        }
        Family::Pareto => {
            let (shape_prior, scale_prior) = match hyper {
                Some(SeverityHyper::Pareto { shape, scale }) => (Some(shape), Some(scale)),
                _ => (None, None),
            };
            let (a_start, b_start) = match fit_severity(Family::Pareto, y) {
                Ok(SeverityModel::Pareto { shape, scale }) if shape < 1e3 => (shape, scale),
                _ => {
                    let mean = y.iter().sum::<f64>() / n;
                    (3.0, 2.0 * mean)
                }
            };
            let b_start = scale_prior.map_or(b_start, |p| p.mean());
            let s_fn = LogShiftSum::new(y, b_start);
            let step0 = 2.4 / n.sqrt();
            let mut draws = Vec::with_capacity(m);
            let diagnostics = if let (Some(sp), Some(bp)) = (shape_prior, scale_prior) {
                // shape integrated out
                let lp = |v: f64| -> f64 {
                    let s = s_fn.eval_log(v);
                    let rate = s + 1.0 / sp.scale;
                    bp.log_kernel(v.exp()) - n * v - s - (sp.shape + n) * rate.ln() + v
                };
                let mut rec = |v: f64, rng: &mut R| {
                    let post = pareto_shape_posterior_from_sum(Some(sp), s_fn.eval_log(v), y.len());
                    draws.push([gamma_draw(post, rng).unwrap_or(f64::NAN), v.exp()]);
                };
                run_chain(b_start.ln(), step0, m, lp, &mut rec, rng)
            } else {
                // Gibbs: independence MH for the shape, random walk on log scale.
                let mut a = a_start;
                let mut walk = LogWalk::new(step0);
                let mut v = b_start.ln();
                let mut s_cur = s_fn.eval_log(v);
                let mut a_acc = 0usize;
                let mut trace = Vec::with_capacity(m);
                for it in 0..BURN_IN + m {
                    let prop = pareto_shape_posterior_from_sum(None, s_cur, y.len());
                    let cand = gamma_draw(prop, rng)?;
                    let log_r = pareto_shape_log_kernel(cand) - pareto_shape_log_kernel(a);
                    if log_r >= 0.0 || rng.random::<f64>().ln() < log_r {
                        a = cand;
                        a_acc += usize::from(it >= BURN_IN);
                    }
                    let mut lp = |w: f64| -n * w - (a + 1.0) * s_fn.eval_log(w);
                    let mut cur = lp(v);
                    walk.update(&mut v, &mut cur, &mut lp, rng);
                    s_cur = s_fn.eval_log(v);
                    if it < BURN_IN {
                        if (it + 1) % ADAPT_BATCH == 0 {
                            walk.adapt();
                        }
                        if it + 1 == BURN_IN {
                            walk.accepted = 0;
                            walk.proposed = 0;
                        }
                    } else {
                        trace.push(v);
                        draws.push([a, v.exp()]);
                    }
                }
                let mut d = chain_diagnostics(&trace, Some(walk.rate()), Some(walk.step));
                let shape_rate = a_acc as f64 / m as f64;
                if shape_rate < 0.05 {
                    d.warnings.push(format!(
                        "shape independence sampler acceptance {shape_rate:.3}"
                    ));
                }
                d
            };
            if draws.iter().any(|d| !(d[0].is_finite() && d[0] > 0.0)) {
                return Err(Error::DegenerateData(
                    "pareto posterior produced an invalid shape".into(),
                ));
            }
            Ok(SeverityPosterior {
                family,
                draws,
                diagnostics,
            })
        }
        Family::GaussianApprox => Err(Error::InvalidParameter(
            "no posterior for the Gaussian surrogate".into(),
        )),
    }
}

/// Independent posterior draws of mu and the severity parameters.
pub fn sample_posterior<R: Rng + ?Sized>(
    prior: &PriorSpec,
    family: Family,
    history: &ClaimHistory,
    m: usize,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    let mut rng_mu = fork(rng);
    let mut rng_sev = SimRng::seed_from_u64(rng.random());
    let mu = sample_posterior_poisson(prior, history, m, &mut rng_mu)?;
    let severity = sample_posterior_severity(family, prior, &history.severities, m, &mut rng_sev)?;
    Ok(PosteriorDraws { mu, severity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::prior::ConjugateHyper;
    use crate::loss::sample_severity;
    use crate::rng::stream;

    #[test]
    fn poisson_conjugate_arithmetic() {
        let prior = PriorSpec::informative(Family::Gamma).unwrap();
        let p = poisson_posterior(&prior, 50, 1000.0).unwrap();
        assert_eq!(p.shape, 50.25);
        assert!((p.scale - 0.2 / 201.0).abs() < 1e-18);
        assert!((p.mean() - 0.05).abs() < 1e-3);
        let p0 = poisson_posterior(&prior, 0, 1000.0).unwrap();
        assert!((p0.mean() - 0.25 * 0.2 / 201.0).abs() < 1e-15);
        let j = poisson_posterior(&PriorSpec::Jeffreys, 7, 10.0).unwrap();
        assert_eq!((j.shape, j.scale), (7.5, 0.1));
        let big = poisson_posterior(&prior, 500_000, 1e7).unwrap();
        assert!((big.mean() / 0.05 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn lognormal_closed_forms() {
        let y = [1f64.exp(), 2f64.exp(), 3f64.exp()];
        let j = lognormal_posterior(None, &y).unwrap();
        assert!((j.xi - 2.0).abs() < 1e-12);
        assert_eq!(j.precision.shape, 1.0);
        assert!((j.precision.scale - 1.0).abs() < 1e-12);
        let mut rng = stream(1, 0);
        let post = sample_posterior_severity(
            Family::Lognormal,
            &PriorSpec::Jeffreys,
            &y,
            200_000,
            &mut rng,
        )
        .unwrap();
        // xi | y is Student-t around 2, heavy tailed with 2 d.o.f.
        let med = {
            let mut xs: Vec<f64> = post.draws.iter().map(|d| d[0]).collect();
            xs.sort_by(f64::total_cmp);
            xs[xs.len() / 2]
        };
        assert!((med - 2.0).abs() < 0.02);

        let h = GammaHyper::new(8.0, 0.1);
        let c = lognormal_posterior(Some((2.0, 100.0, h)), &y).unwrap();
        assert!((c.xi - (6.0 + 200.0) / 103.0).abs() < 1e-12);
        assert_eq!(c.kappa, 103.0);
        assert_eq!(c.precision.shape, 9.5);
        // 1/b0 + S/2 + kappa0 n / (2 (kappa0 + n)) (ybar - xi0)^2, ybar = xi0
        assert!((1.0 / c.precision.scale - 11.0).abs() < 1e-12);
    }

    #[test]
    fn pareto_conditional_by_hand() {
        let y = [1.0, 3.0, 7.0];
        let p = pareto_shape_posterior(Some(GammaHyper::new(40.0, 0.1)), 1.0, &y);
        let s = 2f64.ln() + 4f64.ln() + 8f64.ln();
        assert_eq!(p.shape, 43.0);
        assert!((p.scale - 1.0 / (s + 10.0)).abs() < 1e-15);
        let j = pareto_shape_posterior(None, 1.0, &y);
        assert_eq!(j.shape, 4.0);
        assert!((j.scale - 1.0 / s).abs() < 1e-15);
    }

    #[test]
    fn gamma_rate_conditional_by_hand() {
        let y = [1.0, 2.0, 3.0];
        let p = gamma_rate_posterior(Some(GammaHyper::new(1.0, 0.1)), 0.5, &y);
        assert_eq!(p.shape, 2.5);
        assert!((p.scale - 1.0 / 16.0).abs() < 1e-15);
        let j = gamma_rate_posterior(None, 0.5, &y);
        assert_eq!((j.shape, j.scale), (1.5, 1.0 / 6.0));
    }

    #[test]
    fn gamma_informative_concentrates() {
        let model = SeverityModel::Gamma {
            shape: 0.44,
            scale: 22.5,
        };
        let mut rng = stream(11, 0);
        let y = sample_severity(&model, 5000, &mut rng).unwrap();
        let prior = PriorSpec::informative(Family::Gamma).unwrap();
        let post = sample_posterior_severity(Family::Gamma, &prior, &y, 20_000, &mut rng).unwrap();
        let mle = fit_severity(Family::Gamma, &y).unwrap().params();
        let mean = post.mean();
        assert!((mean[0] - 0.44).abs() < 0.03, "{mean:?}");
        assert!((mean[0] - mle[0]).abs() < 0.01, "{mean:?} vs {mle:?}");
        let acc = post.diagnostics.acceptance.unwrap();
        assert!((0.2..=0.5).contains(&acc), "{acc}");
        assert!(post.diagnostics.geweke_z.unwrap().abs() < 3.0);
    }

    #[test]
    fn pareto_spline_matches_direct() {
        let model = SeverityModel::Pareto {
            shape: 3.6,
            scale: 26.0,
        };
        let y = sample_severity(&model, 2000, &mut stream(2, 0)).unwrap();
        let s = LogShiftSum::new(&y, 26.0);
        for b in [5.0, 20.0, 26.3, 31.0, 500.0, 1e4] {
            let v = f64::ln(b);
            let direct = s.direct(v).0;
            assert!(
                (s.eval_log(v) - direct).abs() < 1e-6 * direct.max(1.0),
                "{b}"
            );
        }
    }

    #[test]
    fn pareto_chains_run() {
        let model = SeverityModel::Pareto {
            shape: 3.6,
            scale: 26.0,
        };
        let y = sample_severity(&model, 5000, &mut stream(3, 0)).unwrap();
        let mut rng = stream(3, 1);
        for prior in [
            PriorSpec::Jeffreys,
            PriorSpec::informative(Family::Pareto).unwrap(),
        ] {
            let post =
                sample_posterior_severity(Family::Pareto, &prior, &y, 20_000, &mut rng).unwrap();
            let m = post.mean();
            // mean claim size a/b stays near the data mean
            let data_mean = y.iter().sum::<f64>() / y.len() as f64;
            assert!(
                (m[1] / (m[0] - 1.0) / data_mean - 1.0).abs() < 0.1,
                "{prior:?} {m:?}"
            );
            let acc = post.diagnostics.acceptance.unwrap();
            assert!((0.15..=0.6).contains(&acc), "{acc}");
        }
    }

    #[test]
    fn mismatched_prior_rejected() {
        let prior = PriorSpec::Conjugate(ConjugateHyper {
            frequency: GammaHyper::new(1.0, 1.0),
            severity: SeverityHyper::reference(Family::Gamma).unwrap(),
        });
        let y = [1.0, 2.0, 3.0];
        assert!(
            sample_posterior_severity(Family::Pareto, &prior, &y, 10, &mut stream(0, 0)).is_err()
        );
        assert!(sample_posterior_severity(
            Family::Gamma,
            &PriorSpec::Jeffreys,
            &[1.0],
            10,
            &mut stream(0, 0)
        )
        .is_err());
    }

    #[test]
    fn csv_export() {
        let d = PosteriorDraws::point_mass(
            0.05,
            &SeverityModel::Gamma {
                shape: 0.44,
                scale: 22.5,
            },
            3,
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("draw,mu,shape,scale"));
    }
}
