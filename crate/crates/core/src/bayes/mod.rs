//! Bayesian treatment of parameter uncertainty: priors, posterior
//! samplers, posterior-predictive totals and the degradation of contracts
//! optimised on the predictive distribution.

pub mod posterior;
pub mod predictive;
pub mod prior;

pub use posterior::{
    effective_size, gamma_rate_posterior, geweke_z, lognormal_posterior, pareto_shape_posterior,
    poisson_posterior, sample_posterior, sample_posterior_poisson, sample_posterior_severity,
    ChainDiagnostics, NigPosterior, PosteriorDraws, SeverityPosterior,
};
pub use predictive::{
    bayes_degradation, point_mass_draws, posterior_predictive_losses, BayesOptions, BayesReport,
    BayesSetup,
};
pub use prior::{
    jeffreys_logdensity, ConjugateHyper, GammaHyper, PriorSpec, PriorTarget, SeverityHyper,
};
