//! C ABI over `reinsopt`.
//!
//! Samples live behind an opaque `ReinsSample` handle created by
//! `reins_simulate` or `reins_sample_from_values` and released with
//! `reins_sample_free`. Every fallible call returns a `ReinsStatus`; on
//! failure `reins_last_error_message` holds a description for the calling
//! thread until its next failing call. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use reinsopt::bayes::{bayes_degradation, BayesOptions, PriorSpec};
use reinsopt::criterion::{CriterionConfig, CriterionEvaluator, LayerContract, RiskMeasure};
use reinsopt::degradation::{bootstrap_degradation, BootstrapOptions, Coupling, DegradationStats};
use reinsopt::loss::{Family, LossModel, LossSample, PortfolioParams, SeedRecord, SeverityModel};
use reinsopt::optimize::{optimize_with, verify_contract, OptimResult};
use reinsopt::premium::{premium, PremiumPrinciple};
use reinsopt::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReinsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    InfiniteMoment = 3,
    NonPositiveSurplus = 4,
    TiltOverflow = 5,
    Infeasible = 6,
    DegenerateData = 7,
    NonConvergence = 8,
    Numerical = 9,
    Io = 10,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReinsFamily {
    Gamma = 0,
    Lognormal = 1,
    Pareto = 2,
    /// Normal model of the total; p1 = mean, p2 = sd.
    GaussianApprox = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReinsRiskMeasure {
    Var = 0,
    Cvar = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReinsPrinciple {
    Expected = 0,
    MixedEsscher = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReinsPrior {
    Informative = 0,
    Jeffreys = 1,
}

/// Portfolio and severity. Gamma and Pareto take (shape, scale), Lognormal
/// (log mean, log sd).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ReinsModel {
    pub family: ReinsFamily,
    pub p1: f64,
    pub p2: f64,
    pub policies: u64,
    pub intensity: f64,
    pub horizon: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ReinsCriterionConfig {
    pub insurer_loading: f64,
    pub reinsurer_loading: f64,
    pub cost_of_capital: f64,
    pub level: f64,
    pub tilt: f64,
    pub risk_measure: ReinsRiskMeasure,
    pub principle: ReinsPrinciple,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ReinsOptimum {
    pub retention: f64,
    /// Upper end of the layer, not its width.
    pub limit: f64,
    pub value: f64,
    pub evaluations: u64,
    pub converged: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ReinsDegradation {
    pub mean: f64,
    pub sd: f64,
    pub replicates: u64,
    pub dropped: u64,
    /// C at the optimum of the reference sample.
    pub base_ratio: f64,
}

/// Opaque sorted loss sample.
pub struct ReinsSample {
    inner: LossSample,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> ReinsStatus {
    match e {
        Error::InvalidParameter(_)
        | Error::InvalidLevel(_)
        | Error::OutOfSupport { .. }
        | Error::MissingLambda => ReinsStatus::InvalidParameter,
        Error::InfiniteMoment { .. } => ReinsStatus::InfiniteMoment,
        Error::NonPositiveSurplus(_) => ReinsStatus::NonPositiveSurplus,
        Error::TiltOverflow(_) => ReinsStatus::TiltOverflow,
        Error::AllInfeasible => ReinsStatus::Infeasible,
        Error::DegenerateData(_) | Error::EmptySample | Error::AllReplicatesFailed(_) => {
            ReinsStatus::DegenerateData
        }
        Error::NonConvergence { .. } | Error::BudgetExhausted { .. } => ReinsStatus::NonConvergence,
        Error::IndefiniteHessian(_) | Error::Singular(_) => ReinsStatus::Numerical,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Format(_) => ReinsStatus::Io,
    }
}

fn run<F: FnOnce() -> Result<(), Fail>>(f: F) -> ReinsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ReinsStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            ReinsStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            ReinsStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn put<T>(p: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    p.write(v);
    Ok(())
}

fn to_model(m: &ReinsModel) -> Result<LossModel, Error> {
    let family = match m.family {
        ReinsFamily::Gamma => Family::Gamma,
        ReinsFamily::Lognormal => Family::Lognormal,
        ReinsFamily::Pareto => Family::Pareto,
        ReinsFamily::GaussianApprox => Family::GaussianApprox,
    };
    let portfolio = PortfolioParams {
        policies: m.policies,
        intensity: m.intensity,
        horizon: m.horizon,
    };
    LossModel::new(portfolio, SeverityModel::from_params(family, [m.p1, m.p2])?)
}

fn to_config(c: &ReinsCriterionConfig) -> Result<CriterionConfig, Error> {
    let cfg = CriterionConfig {
        insurer_loading: c.insurer_loading,
        cost_of_capital: c.cost_of_capital,
        level: c.level,
        risk_measure: match c.risk_measure {
            ReinsRiskMeasure::Var => RiskMeasure::VaR,
            ReinsRiskMeasure::Cvar => RiskMeasure::CVaR,
        },
        principle: match c.principle {
            ReinsPrinciple::Expected => PremiumPrinciple::Expected {
                loading: c.reinsurer_loading,
            },
            ReinsPrinciple::MixedEsscher => PremiumPrinciple::MixedEsscher {
                loading: c.reinsurer_loading,
                tilt: c.tilt,
            },
        },
        price_of_risk: None,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn optimum(o: &OptimResult) -> ReinsOptimum {
    ReinsOptimum {
        retention: o.contract.retention,
        limit: o.contract.limit,
        value: o.value,
        evaluations: o.evaluations as u64,
        converged: o.converged,
    }
}

fn degradation(s: &DegradationStats, base: f64) -> ReinsDegradation {
    ReinsDegradation {
        mean: s.mean,
        sd: s.sd,
        replicates: s.replicates.len() as u64,
        dropped: s.dropped as u64,
        base_ratio: base,
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn reins_version() -> *const c_char {
    static V: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => c"",
        };
    V.as_ptr()
}

/// Message of the last failure on this thread, or an empty string. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn reins_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Defaults: gamma 0.1, gamma_r 0.2, beta 0, eps 0.01, omega 0.001, VaR,
/// expected premium.
#[no_mangle]
pub extern "C" fn reins_criterion_config_default() -> ReinsCriterionConfig {
    ReinsCriterionConfig {
        insurer_loading: 0.1,
        reinsurer_loading: 0.2,
        cost_of_capital: 0.0,
        level: 0.01,
        tilt: 0.001,
        risk_measure: ReinsRiskMeasure::Var,
        principle: ReinsPrinciple::Expected,
    }
}

/// Simulates `m` totals; on success `*out` owns a new sample.
///
/// # Safety
/// `model` must point to a valid `ReinsModel`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reins_simulate(
    model: *const ReinsModel,
    m: usize,
    seed: u64,
    out: *mut *mut ReinsSample,
) -> ReinsStatus {
    run(|| {
        let model = to_model(get(model, "model")?)?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let s = model.simulate(m, seed)?;
        put(
            out,
            Box::into_raw(Box::new(ReinsSample { inner: s })),
            "out",
        )
    })
}

/// Wraps `len` loss values (copied and sorted).
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reins_sample_from_values(
    values: *const f64,
    len: usize,
    out: *mut *mut ReinsSample,
) -> ReinsStatus {
    run(|| {
        if values.is_null() {
            return Err(Fail::Null("values"));
        }
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let v = std::slice::from_raw_parts(values, len).to_vec();
        let s = LossSample::from_values(
            v,
            SeedRecord {
                seed: 0,
                model: None,
            },
        )?;
        put(
            out,
            Box::into_raw(Box::new(ReinsSample { inner: s })),
            "out",
        )
    })
}

/// Releases a sample; null is ignored.
///
/// # Safety
/// `sample` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn reins_sample_free(sample: *mut ReinsSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Number of totals, 0 for null.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn reins_sample_len(sample: *const ReinsSample) -> usize {
    sample.as_ref().map_or(0, |s| s.inner.len())
}

/// Copies the sorted values into `buf`, which must hold `reins_sample_len`
/// doubles (`cap` is checked).
///
/// # Safety
/// `buf` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn reins_sample_copy_values(
    sample: *const ReinsSample,
    buf: *mut f64,
    cap: usize,
) -> ReinsStatus {
    run(|| {
        let s = get(sample, "sample")?;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let v = s.inner.values();
        if cap < v.len() {
            return Err(Error::InvalidParameter(format!(
                "buffer holds {cap} values, sample has {}",
                v.len()
            ))
            .into());
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// # Safety
/// `sample` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reins_sample_mean(
    sample: *const ReinsSample,
    out: *mut f64,
) -> ReinsStatus {
    run(|| put(out, get(sample, "sample")?.inner.mean(), "out"))
}

/// Empirical VaR at level `eps` (upper tail).
///
/// # Safety
/// `sample` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reins_sample_quantile(
    sample: *const ReinsSample,
    eps: f64,
    out: *mut f64,
) -> ReinsStatus {
    run(|| put(out, get(sample, "sample")?.inner.quantile(eps)?, "out"))
}

/// Criterion C for the layer ceding min(max(x - retention, 0), limit - retention).
/// `limit` is the upper end of the layer; (0, 0) means no reinsurance.
///
/// # Safety
/// Pointers must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reins_criterion_ratio(
    sample: *const ReinsSample,
    config: *const ReinsCriterionConfig,
    retention: f64,
    limit: f64,
    out: *mut f64,
) -> ReinsStatus {
    run(|| {
        let s = get(sample, "sample")?;
        let cfg = to_config(get(config, "config")?)?;
        let ev = CriterionEvaluator::new(&s.inner, &cfg)?;
        put(
            out,
            ev.ratio(&LayerContract::new(retention, limit)?)?,
            "out",
        )
    })
}

/// Reinsurance premium of the layer under the configured principle.
///
/// # Safety
/// Pointers must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reins_premium(
    sample: *const ReinsSample,
    config: *const ReinsCriterionConfig,
    retention: f64,
    limit: f64,
    out: *mut f64,
) -> ReinsStatus {
    run(|| {
        let s = get(sample, "sample")?;
        let cfg = to_config(get(config, "config")?)?;
        put(
            out,
            premium(
                &cfg.principle,
                &s.inner,
                &LayerContract::new(retention, limit)?,
            )?,
            "out",
        )
    })
}

/// Nelder-Mead optimum of the criterion.
///
/// # Safety
/// Pointers must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reins_optimize(
    sample: *const ReinsSample,
    config: *const ReinsCriterionConfig,
    out: *mut ReinsOptimum,
) -> ReinsStatus {
    run(|| {
        let s = get(sample, "sample")?;
        let cfg = to_config(get(config, "config")?)?;
        let o = optimize_with(&CriterionEvaluator::new(&s.inner, &cfg)?)?;
        put(out, optimum(&o), "out")
    })
}

/// Grid-and-bisection optimum, for cross-checking `reins_optimize`.
///
/// # Safety
/// Pointers must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reins_verify(
    sample: *const ReinsSample,
    config: *const ReinsCriterionConfig,
    out: *mut ReinsOptimum,
) -> ReinsStatus {
    run(|| {
        let s = get(sample, "sample")?;
        let cfg = to_config(get(config, "config")?)?;
        put(out, optimum(&verify_contract(&s.inner, &cfg)?), "out")
    })
}

/// Nested bootstrap of D with histories of `n` expected claims.
///
/// # Safety
/// Pointers must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reins_bootstrap(
    model: *const ReinsModel,
    config: *const ReinsCriterionConfig,
    n: f64,
    reps: usize,
    m: usize,
    seed: u64,
    out: *mut ReinsDegradation,
) -> ReinsStatus {
    run(|| {
        let model = to_model(get(model, "model")?)?;
        let cfg = to_config(get(config, "config")?)?;
        let opts = BootstrapOptions {
            n,
            reps,
            m,
            seed,
            coupling: Coupling::Common,
        };
        let r = bootstrap_degradation(&model, &cfg, &opts)?;
        put(out, degradation(&r.stats, r.base.value), "out")
    })
}

/// Bayesian D for a historical portfolio of `history_policies` policies.
///
/// # Safety
/// Pointers must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reins_bayes(
    model: *const ReinsModel,
    config: *const ReinsCriterionConfig,
    prior: ReinsPrior,
    history_policies: f64,
    reps: usize,
    m: usize,
    seed: u64,
    out: *mut ReinsDegradation,
) -> ReinsStatus {
    run(|| {
        let model = to_model(get(model, "model")?)?;
        let cfg = to_config(get(config, "config")?)?;
        let spec = match prior {
            ReinsPrior::Informative => PriorSpec::informative(model.severity.family())?,
            ReinsPrior::Jeffreys => PriorSpec::Jeffreys,
        };
        let r = bayes_degradation(
            &model,
            &spec,
            history_policies,
            &cfg,
            &BayesOptions { m, reps, seed },
        )?;
        put(out, degradation(&r.stats, r.base.value), "out")
    })
}
