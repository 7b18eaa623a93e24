use super::{CriterionConfig, LayerContract, RiskMeasure};
use crate::error::{Error, Result};
use crate::loss::LossSample;
use crate::premium::{PremiumPrinciple, TILT_GUARD};

/// Above this omega * (max X - min X) the tilted prefix sums could
/// overflow and the evaluator sums directly instead.
const PREFIX_TILT_LIMIT: f64 = 600.0;

/// The pieces of the criterion at one contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionValue {
    pub risk: f64,
    pub premium: f64,
    pub ceded_mean: f64,
    pub surplus: f64,
}

impl CriterionValue {
    pub fn ratio(&self) -> Result<f64> {
        if self.surplus <= 0.0 {
            Err(Error::NonPositiveSurplus(self.surplus))
        } else {
            Ok(self.risk / self.surplus)
        }
    }
}

struct TiltPrefix {
    base: f64,
    exp: Vec<f64>,
    x_exp: Vec<f64>,
}

/// Criterion evaluation in O(log m) per contract from prefix sums of the
/// sorted sample (and of e^(omega x), x e^(omega x) for the tilted premium).
pub struct CriterionEvaluator<'a> {
    sample: &'a LossSample,
    config: CriterionConfig,
    prefix: Vec<f64>,
    tilt: Option<TiltPrefix>,
    q_index: usize,
    tail_start: usize,
    mean: f64,
}

impl<'a> CriterionEvaluator<'a> {
    pub fn new(sample: &'a LossSample, config: &CriterionConfig) -> Result<Self> {
        config.validate()?;
        let x = sample.values();
        let m = x.len();
        let mut prefix = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in x {
            acc += v;
            prefix.push(acc);
        }
        let omega = config.principle.tilt();
        let tilt = if omega > 0.0 && omega * (x[m - 1] - x[0]) <= PREFIX_TILT_LIMIT {
            let base = x[0];
            let (mut e, mut xe) = (Vec::with_capacity(m + 1), Vec::with_capacity(m + 1));
            let (mut se, mut sxe) = (0.0, 0.0);
            e.push(0.0);
            xe.push(0.0);
            for v in x {
                let w = (omega * (v - base)).exp();
                se += w;
                sxe += v * w;
                e.push(se);
                xe.push(sxe);
            }
            Some(TiltPrefix {
                base,
                exp: e,
                x_exp: xe,
            })
        } else {
            None
        };
        Ok(Self {
            sample,
            config: *config,
            prefix,
            tilt,
            q_index: sample.quantile_index(config.level)?,
            tail_start: m - sample.tail_count(config.level)?,
            mean: acc / m as f64,
        })
    }

    pub fn sample(&self) -> &LossSample {
        self.sample
    }

    pub fn config(&self) -> &CriterionConfig {
        &self.config
    }

    /// The empirical x_eps used by the VaR criterion.
    pub fn x_eps(&self) -> f64 {
        self.sample.values()[self.q_index]
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    fn bounds(&self, c: &LayerContract) -> (usize, usize) {
        let x = self.sample.values();
        (
            x.partition_point(|v| *v <= c.retention),
            x.partition_point(|v| *v <= c.limit),
        )
    }

    /// Sum of I(X_i) over sorted indices [s, e).
    fn ceded_sum(&self, c: &LayerContract, lo: usize, hi: usize, s: usize, e: usize) -> f64 {
        let ms = lo.clamp(s, e);
        let me = hi.clamp(s, e);
        let mid = self.prefix[me] - self.prefix[ms] - c.retention * (me - ms) as f64;
        mid + c.width() * (e - me) as f64
    }

    pub fn evaluate(&self, c: &LayerContract) -> Result<CriterionValue> {
        let omega = self.config.principle.tilt();
        let w = c.width();
        if omega * w > TILT_GUARD {
            return Err(Error::TiltOverflow(omega * w));
        }
        let x = self.sample.values();
        let m = x.len();
        let (lo, hi) = self.bounds(c);
        let ceded_mean = self.ceded_sum(c, lo, hi, 0, m) / m as f64;
        let risk = match self.config.risk_measure {
            RiskMeasure::VaR => {
                let xe = x[self.q_index];
                xe - c.ceded(xe)
            }
            RiskMeasure::CVaR => {
                let t = self.tail_start;
                let k = (m - t) as f64;
                (self.prefix[m] - self.prefix[t] - self.ceded_sum(c, lo, hi, t, m)) / k
            }
        };
        let premium = match self.config.principle {
            PremiumPrinciple::Expected { loading } => (1.0 + loading) * ceded_mean,
            PremiumPrinciple::MixedEsscher { loading, tilt } => {
                (1.0 + loading) * self.tilted_mean(c, tilt, lo, hi)
            }
        };
        let surplus = self.config.insurer_loading * self.mean
            - (premium - ceded_mean)
            - self.config.cost_of_capital * risk;
        Ok(CriterionValue {
            risk,
            premium,
            ceded_mean,
            surplus,
        })
    }

    /// E{I e^(omega I)} / E e^(omega I), with all exponentials scaled by e^(-omega w).
    fn tilted_mean(&self, c: &LayerContract, omega: f64, lo: usize, hi: usize) -> f64 {
        if omega == 0.0 {
            let m = self.sample.len() as f64;
            return self.ceded_sum(c, lo, hi, 0, self.sample.len()) / m;
        }
        let x = self.sample.values();
        let m = x.len();
        let w = c.width();
        let above = (m - hi) as f64;
        let (mid_e, mid_xe) = match &self.tilt {
            Some(t) => {
                let scale = (omega * (t.base - c.limit)).exp();
                (
                    scale * (t.exp[hi] - t.exp[lo]),
                    scale * (t.x_exp[hi] - t.x_exp[lo]),
                )
            }
            None => x[lo..hi].iter().fold((0.0, 0.0), |(a, b), v| {
                let e = (omega * (v - c.limit)).exp();
                (a + e, b + v * e)
            }),
        };
        let a = lo as f64 * (-omega * w).exp() + mid_e + above;
        let b = mid_xe - c.retention * mid_e + above * w;
        b / a
    }

    pub fn ratio(&self, c: &LayerContract) -> Result<f64> {
        self.evaluate(c)?.ratio()
    }
}
