//! Optimal one-layer reinsurance under a risk-over-surplus criterion, and
//! the degradation of that optimum caused by parameter estimation error.
//!
//! The pipeline: simulate compound Poisson totals ([`loss`]), price a layer
//! ([`premium`]), evaluate the criterion C = risk / expected surplus
//! ([`criterion`]), minimise it ([`optimize`]), then measure how much worse
//! a contract optimised under estimated parameters performs under the truth,
//! by nested bootstrap, asymptotic formulas ([`degradation`]) or posterior
//! prediction ([`bayes`]).

pub mod bayes;
pub mod criterion;
pub mod degradation;
pub mod error;
pub mod experiments;
pub mod loss;
pub mod optimize;
pub mod premium;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
