//! Reinsurance premium principles, the market-factor weight W(u) and the
//! K-function K(u) = int_u^1 (W(v) - 1) dv.
//!
//! The market factor is taken comonotone with the ceded loss, Z = I(X), so
//! M(Z) = (1 + gamma_r) e^(omega Z) / E e^(omega Z) and W is a deterministic
//! transform of the loss quantile. omega = 0 gives the expected principle.

use serde::{Deserialize, Serialize};

use crate::criterion::LayerContract;
use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};
use crate::loss::LossSample;

/// Largest allowed omega * (a2 - a1).
pub const TILT_GUARD: f64 = 500.0;

/// Trapezoid grid size for K.
pub const K_GRID: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "principle", rename_all = "snake_case", deny_unknown_fields)]
pub enum PremiumPrinciple {
    /// pi_I = (1 + loading) E I(X)
    Expected { loading: f64 },
    /// pi_I = (1 + loading) E{I e^(tilt I)} / E e^(tilt I)
    MixedEsscher { loading: f64, tilt: f64 },
}

impl Default for PremiumPrinciple {
    fn default() -> Self {
        PremiumPrinciple::Expected { loading: 0.2 }
    }
}

impl PremiumPrinciple {
    pub fn loading(&self) -> f64 {
        match *self {
            PremiumPrinciple::Expected { loading }
            | PremiumPrinciple::MixedEsscher { loading, .. } => loading,
        }
    }

    pub fn tilt(&self) -> f64 {
        match *self {
            PremiumPrinciple::Expected { .. } => 0.0,
            PremiumPrinciple::MixedEsscher { tilt, .. } => tilt,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PremiumPrinciple::Expected { .. } => "expected",
            PremiumPrinciple::MixedEsscher { .. } => "mixed_esscher",
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("reinsurer loading", self.loading())?;
        ensure_nonnegative("tilt", self.tilt())
    }

    fn guard(&self, contract: &LayerContract) -> Result<()> {
        let t = self.tilt() * contract.width();
        if t > TILT_GUARD {
            Err(Error::TiltOverflow(t))
        } else {
            Ok(())
        }
    }
}

/// Premium for an arbitrary vector of ceded amounts (equally weighted).
pub fn premium_of_ceded(principle: &PremiumPrinciple, ceded: &[f64]) -> Result<f64> {
    principle.validate()?;
    if ceded.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = ceded.len() as f64;
    let load = 1.0 + principle.loading();
    let omega = principle.tilt();
    if omega == 0.0 {
        return Ok(load * ceded.iter().sum::<f64>() / n);
    }
    let top = ceded.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut a, mut b) = (0.0, 0.0);
    for &c in ceded {
        let e = (omega * (c - top)).exp();
        a += e;
        b += c * e;
    }
    Ok(load * b / a)
}

/// Monte Carlo premium of the layer over the sample.
pub fn premium(
    principle: &PremiumPrinciple,
    sample: &LossSample,
    contract: &LayerContract,
) -> Result<f64> {
    principle.guard(contract)?;
    let ceded: Vec<f64> = sample.values().iter().map(|x| contract.ceded(*x)).collect();
    premium_of_ceded(principle, &ceded)
}

/// Empirical quantile F^-1(u) = X_(ceil(u m)), with u = 0 giving the minimum.
pub(crate) fn empirical_inverse(sample: &LossSample, u: f64) -> f64 {
    let m = sample.len();
    let k = crate::loss::snapped_ceil(u * m as f64).clamp(1, m);
    sample.values()[k - 1]
}

fn check_unit(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::OutOfSupport {
            what: "probability level",
            value: u,
        })
    }
}

/// Normaliser E e^(omega (I - w)) with w the layer width.
fn tilt_normaliser(omega: f64, sample: &LossSample, contract: &LayerContract) -> f64 {
    let w = contract.width();
    sample
        .values()
        .iter()
        .map(|x| (omega * (contract.ceded(*x) - w)).exp())
        .sum::<f64>()
        / sample.len() as f64
}

/// W(u) = E{M(Z) | F(X) = u}.
pub fn w_function(
    principle: &PremiumPrinciple,
    contract: &LayerContract,
    sample: &LossSample,
    u: f64,
) -> Result<f64> {
    principle.validate()?;
    principle.guard(contract)?;
    check_unit(u)?;
    let load = 1.0 + principle.loading();
    let omega = principle.tilt();
    if omega == 0.0 {
        return Ok(load);
    }
    let norm = tilt_normaliser(omega, sample, contract);
    let i = contract.ceded(empirical_inverse(sample, u));
    Ok(load * (omega * (i - contract.width())).exp() / norm)
}

/// K(u) for a single level; builds a [`KFunction`] table when tilted.
pub fn k_function(
    principle: &PremiumPrinciple,
    contract: &LayerContract,
    sample: &LossSample,
    u: f64,
) -> Result<f64> {
    check_unit(u)?;
    Ok(KFunction::new(principle, contract, sample)?.eval(u))
}

/// K tabulated on a uniform grid by the trapezoid rule, interpolated
/// linearly in between. The expected principle is exact: K(u) = gamma_r (1 - u).
#[derive(Debug, Clone)]
pub struct KFunction {
    linear: Option<f64>,
    table: Vec<f64>,
}

impl KFunction {
    pub fn new(
        principle: &PremiumPrinciple,
        contract: &LayerContract,
        sample: &LossSample,
    ) -> Result<Self> {
        principle.validate()?;
        principle.guard(contract)?;
        let load = 1.0 + principle.loading();
        let omega = principle.tilt();
        if omega == 0.0 {
            return Ok(Self {
                linear: Some(principle.loading()),
                table: Vec::new(),
            });
        }
        let norm = tilt_normaliser(omega, sample, contract);
        let w = contract.width();
        let g: Vec<f64> = (0..=K_GRID)
            .map(|j| {
                let u = j as f64 / K_GRID as f64;
                let i = contract.ceded(empirical_inverse(sample, u));
                load * (omega * (i - w)).exp() / norm - 1.0
            })
            .collect();
        let h = 1.0 / K_GRID as f64;
        let mut table = vec![0.0; K_GRID + 1];
        for j in (0..K_GRID).rev() {
            table[j] = table[j + 1] + 0.5 * h * (g[j] + g[j + 1]);
        }
        Ok(Self {
            linear: None,
            table,
        })
    }

    pub fn eval(&self, u: f64) -> f64 {
        if let Some(r) = self.linear {
            return r * (1.0 - u);
        }
        let u = u.clamp(0.0, 1.0);
        if u == 1.0 {
            return 0.0;
        }
        let pos = u * K_GRID as f64;
        let j = (pos.floor() as usize).min(K_GRID - 1);
        let t = pos - j as f64;
        self.table[j] * (1.0 - t) + self.table[j + 1] * t
    }
}
