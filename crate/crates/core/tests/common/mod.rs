//! Strategies and invariant checks shared by the property suite and the
//! acceptance run.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use reinsopt::bayes::{
    gamma_rate_posterior, lognormal_posterior, pareto_shape_posterior, poisson_posterior,
    GammaHyper, NigPosterior, PriorSpec,
};
use reinsopt::criterion::{
    risk_retained, CriterionConfig, CriterionEvaluator, LayerContract, RiskMeasure,
};
use reinsopt::degradation::{BootstrapSetup, Coupling};
use reinsopt::loss::{Family, LossModel, LossSample, PortfolioParams, SeedRecord, SeverityModel};
use reinsopt::optimize::{optimize_contract, penalised_objective, verify_contract};
use reinsopt::premium::{KFunction, PremiumPrinciple};
use statrs::function::gamma::ln_gamma;

pub type Check = Result<(), TestCaseError>;

pub fn sample_of(mut v: Vec<f64>) -> LossSample {
    v.iter_mut().for_each(|x| *x = x.abs());
    LossSample::from_values(
        v,
        SeedRecord {
            seed: 0,
            model: None,
        },
    )
    .unwrap()
}

pub fn reference(family: Family) -> SeverityModel {
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

pub fn model(family: Family) -> LossModel {
    let p = PortfolioParams {
        policies: 1000,
        intensity: 0.05,
        horizon: 1.0,
    };
    LossModel::new(p, reference(family)).unwrap()
}

pub fn config(p: PremiumPrinciple, measure: RiskMeasure, level: f64) -> CriterionConfig {
    CriterionConfig {
        insurer_loading: 0.1,
        cost_of_capital: 0.0,
        level,
        risk_measure: measure,
        principle: p,
        price_of_risk: None,
    }
}

pub fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        Just(Family::Gamma),
        Just(Family::Lognormal),
        Just(Family::Pareto)
    ]
}

pub fn measure() -> impl Strategy<Value = RiskMeasure> {
    prop_oneof![Just(RiskMeasure::VaR), Just(RiskMeasure::CVaR)]
}

pub fn principle() -> impl Strategy<Value = PremiumPrinciple> {
    prop_oneof![
        (0.15..0.7f64).prop_map(|loading| PremiumPrinciple::Expected { loading }),
        (0.15..0.7f64, 0.0..0.006f64)
            .prop_map(|(loading, tilt)| PremiumPrinciple::MixedEsscher { loading, tilt }),
    ]
}

pub fn losses() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1500.0f64, 20..400)
}

pub fn contract() -> impl Strategy<Value = LayerContract> {
    (0.0..1200.0f64, 0.0..600.0f64).prop_map(|(a1, w)| LayerContract::new(a1, a1 + w).unwrap())
}

pub fn k_nonnegative(v: Vec<f64>, c: LayerContract, p: PremiumPrinciple) -> Check {
    let s = sample_of(v);
    let k = KFunction::new(&p, &c, &s).unwrap();
    for j in 0..=200 {
        let u = j as f64 / 200.0;
        prop_assert!(k.eval(u) >= -1e-12, "K({u}) = {}", k.eval(u));
    }
    prop_assert_eq!(k.eval(1.0), 0.0);
    // K(0) = E W - 1, up to the trapezoid error of the tabulated K
    prop_assert!(
        (k.eval(0.0) - p.loading()).abs() < 1e-3 * p.loading(),
        "K(0) = {}",
        k.eval(0.0)
    );
    Ok(())
}

pub fn slow_growth(c: LayerContract, x1: f64, dx: f64) -> Check {
    let x2 = x1 + dx;
    let (i1, i2) = (c.ceded(x1), c.ceded(x2));
    prop_assert!(0.0 <= i1 && i1 <= x1);
    prop_assert!(0.0 <= i2 - i1 && i2 - i1 <= dx + 1e-12);
    prop_assert!(x2 - i2 >= x1 - i1 - 1e-12);
    Ok(())
}

pub fn cvar_dominates_var(v: Vec<f64>, c: LayerContract, level: f64, p: PremiumPrinciple) -> Check {
    let s = sample_of(v);
    let var = risk_retained(&s, &c, &config(p, RiskMeasure::VaR, level)).unwrap();
    let cvar = risk_retained(&s, &c, &config(p, RiskMeasure::CVaR, level)).unwrap();
    prop_assert!(cvar >= var - 1e-9, "{cvar} < {var}");
    Ok(())
}

pub fn deterministic_by_seed(f: Family, seed: u64, m: usize) -> Check {
    let model = model(f);
    let a = model.simulate(m, seed).unwrap();
    let b = model.simulate(m, seed).unwrap();
    prop_assert_eq!(a.values(), b.values());
    prop_assert_eq!(a.len(), m);
    prop_assert!(a.values().windows(2).all(|w| w[0] <= w[1]));
    prop_assert!(a.values().iter().all(|x| *x >= 0.0));
    Ok(())
}

pub fn optimiser_matches_grid(
    f: Family,
    seed: u64,
    p: PremiumPrinciple,
    measure: RiskMeasure,
) -> Check {
    let s = model(f).simulate(5000, seed).unwrap();
    let cfg = config(p, measure, 0.01);
    let nm = optimize_contract(&s, &cfg).unwrap();
    let grid = verify_contract(&s, &cfg).unwrap();
    prop_assert!(
        (nm.value - grid.value).abs() <= 0.05,
        "NM {} grid {}",
        nm.value,
        grid.value
    );
    prop_assert!(nm.contract.retention <= nm.contract.limit);

    let ev = CriterionEvaluator::new(&s, &cfg).unwrap();
    let start = penalised_objective(&ev)([s.mean(), s.quantile(0.01).unwrap() - s.mean()]);
    prop_assert!(nm.value <= start.min(ev.ratio(&LayerContract::none()).unwrap()) + 1e-9);
    Ok(())
}

pub fn degradation_nonnegative(
    f: Family,
    seed: u64,
    n: f64,
    p: PremiumPrinciple,
    measure: RiskMeasure,
) -> Check {
    let cfg = config(p, measure, 0.01);
    let setup = BootstrapSetup::new(&model(f), &cfg, 3000, seed, Coupling::Common).unwrap();
    let r = setup.run(n, 2).unwrap();
    for d in &r.stats.replicates {
        prop_assert!(*d >= -1e-3, "D = {d}");
    }
    Ok(())
}

// Conjugate updates: log(prior x likelihood) - log(posterior) must not
// depend on the parameter.

pub fn poisson_conjugate(claims: usize, exposure: f64, a0: f64, b0: f64) -> Check {
    let n = claims as f64;
    let mut hyper = match PriorSpec::informative(Family::Gamma).unwrap() {
        PriorSpec::Conjugate(h) => h,
        PriorSpec::Jeffreys => unreachable!(),
    };
    hyper.frequency = GammaHyper::new(a0, b0);
    let post = poisson_posterior(&PriorSpec::Conjugate(hyper), claims, exposure).unwrap();
    let unnorm = |mu: f64| (a0 - 1.0) * mu.ln() - mu / b0 + n * mu.ln() - mu * exposure;
    constant_ratio(unnorm, |mu| gamma_log(post, mu), post.mean())?;

    let jeff = poisson_posterior(&PriorSpec::Jeffreys, claims, exposure).unwrap();
    let unnorm = |mu: f64| -0.5 * mu.ln() + n * mu.ln() - mu * exposure;
    constant_ratio(unnorm, |mu| gamma_log(jeff, mu), jeff.mean())
}

pub fn gamma_rate_conjugate(y: Vec<f64>, shape: f64, r0: f64, s0: f64) -> Check {
    let sum: f64 = y.iter().sum();
    let n = y.len() as f64;
    let post = gamma_rate_posterior(Some(GammaHyper::new(r0, s0)), shape, &y);
    let unnorm = |r: f64| (r0 - 1.0) * r.ln() - r / s0 + n * shape * r.ln() - r * sum;
    constant_ratio(unnorm, |r| gamma_log(post, r), post.mean())?;
    let flat = gamma_rate_posterior(None, shape, &y);
    let unnorm = |r: f64| -r.ln() + n * shape * r.ln() - r * sum;
    constant_ratio(unnorm, |r| gamma_log(flat, r), flat.mean())
}

pub fn pareto_shape_conjugate(y: Vec<f64>, b: f64, a0: f64, s0: f64) -> Check {
    let n = y.len() as f64;
    // log-likelihood in the shape a, dropping terms free of a
    let loglik = |a: f64| n * a.ln() - a * y.iter().map(|v| (1.0 + v / b).ln()).sum::<f64>();
    let post = pareto_shape_posterior(Some(GammaHyper::new(a0, s0)), b, &y);
    let unnorm = |a: f64| (a0 - 1.0) * a.ln() - a / s0 + loglik(a);
    constant_ratio(unnorm, |a| gamma_log(post, a), post.mean())?;
    // without a prior the returned Gamma is the likelihood itself
    let bare = pareto_shape_posterior(None, b, &y);
    constant_ratio(loglik, |a| gamma_log(bare, a), bare.mean())
}

pub fn normal_inverse_gamma_conjugate(y: Vec<f64>, xi0: f64, k0: f64, a0: f64, s0: f64) -> Check {
    let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    if logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() <= 1e-6 {
        return Ok(());
    }
    let loglik = |x: f64, t: f64| {
        logs.iter()
            .map(|l| 0.5 * t.ln() - 0.5 * t * (l - x).powi(2))
            .sum::<f64>()
    };

    let post = lognormal_posterior(Some((xi0, k0, GammaHyper::new(a0, s0))), &y).unwrap();
    let prior = NigPosterior {
        xi: xi0,
        kappa: k0,
        precision: GammaHyper::new(a0, s0),
    };
    let unnorm = |x: f64, t: f64| nig_log(prior, x, t) + loglik(x, t);
    constant_ratio_2d(unnorm, |x, t| nig_log(post, x, t), post)?;

    // sigma^-2 prior: 1/tau in (xi, tau)
    let flat = lognormal_posterior(None, &y).unwrap();
    let unnorm = |x: f64, t: f64| -t.ln() + loglik(x, t);
    constant_ratio_2d(unnorm, |x, t| nig_log(flat, x, t), flat)
}

fn gamma_log(h: GammaHyper, x: f64) -> f64 {
    (h.shape - 1.0) * x.ln() - x / h.scale - h.shape * h.scale.ln() - ln_gamma(h.shape)
}

// xi | tau ~ N(xi, 1/(kappa tau)), tau ~ Gamma(shape, scale), up to constants
fn nig_log(h: NigPosterior, x: f64, t: f64) -> f64 {
    0.5 * t.ln() - 0.5 * h.kappa * t * (x - h.xi).powi(2) + (h.precision.shape - 1.0) * t.ln()
        - t / h.precision.scale
}

fn constant_ratio<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(a: F, b: G, centre: f64) -> Check {
    let pts = [0.5, 0.8, 1.0, 1.3, 2.0].map(|k| k * centre);
    let base = a(pts[0]) - b(pts[0]);
    for x in pts {
        let d = a(x) - b(x) - base;
        prop_assert!(
            d.abs() <= 1e-7 * (1.0 + a(x).abs()),
            "log ratio drifts by {d} at {x}"
        );
    }
    Ok(())
}

fn constant_ratio_2d<F: Fn(f64, f64) -> f64, G: Fn(f64, f64) -> f64>(
    a: F,
    b: G,
    at: NigPosterior,
) -> Check {
    let t0 = at.precision.mean();
    let sx = 1.0 / (at.kappa * t0).sqrt();
    let base = a(at.xi, t0) - b(at.xi, t0);
    for (dx, kt) in [(-1.0, 0.7), (0.5, 1.0), (1.5, 1.4), (0.0, 0.5), (-2.0, 1.2)] {
        let (x, t) = (at.xi + dx * sx, kt * t0);
        let d = a(x, t) - b(x, t) - base;
        prop_assert!(
            d.abs() <= 1e-7 * (1.0 + a(x, t).abs()),
            "log ratio drifts by {d} at ({x}, {t})"
        );
    }
    Ok(())
}

/// Runs `check` on `cases` inputs from a fixed-seed generator; `Err`
/// carries the minimal failing case.
pub fn run_cases<S: Strategy>(
    cases: u32,
    strategy: S,
    check: impl Fn(S::Value) -> Check,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, check).map_err(|e| e.to_string())
}
