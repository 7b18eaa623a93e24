use super::{ClaimHistory, Family, SeverityModel};
use crate::error::{Error, Result};
use crate::special::{digamma, trigamma};

const MAX_ITER: usize = 200;
const SCORE_TOL: f64 = 1e-8;

/// Maximum-likelihood estimates (intensity, severity) from a claim history.
/// The intensity estimate is n / exposure.
pub fn fit_mle(family: Family, history: &ClaimHistory) -> Result<(f64, SeverityModel)> {
    let mu = history.claim_count() as f64 / history.exposure;
    Ok((mu, fit_severity(family, &history.severities)?))
}

pub fn fit_severity(family: Family, y: &[f64]) -> Result<SeverityModel> {
    if y.len() < 2 {
        return Err(Error::DegenerateData(format!(
            "need at least 2 claims, got {}",
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "severities must be > 0, found {bad}"
        )));
    }
    let first = y[0];
    if y.iter().all(|v| *v == first) {
        return Err(Error::DegenerateData(
            "all claim severities are equal".into(),
        ));
    }
    match family {
        Family::Gamma => fit_gamma(y),
        Family::Lognormal => fit_lognormal(y),
        Family::Pareto => fit_pareto(y),
        Family::GaussianApprox => Err(Error::InvalidParameter(
            "the Gaussian surrogate is not fitted from claims".into(),
        )),
    }
}

fn fit_lognormal(y: &[f64]) -> Result<SeverityModel> {
    let n = y.len() as f64;
    let m = y.iter().map(|v| v.ln()).sum::<f64>() / n;
    let v = y.iter().map(|v| (v.ln() - m).powi(2)).sum::<f64>() / n;
    Ok(SeverityModel::Lognormal {
        log_mean: m,
        log_sd: v.sqrt(),
    })
}

/// Shape from ln a - digamma(a) = ln(mean y) - mean(ln y) by Newton steps in
/// ln a, started at the method-of-moments estimate; scale = mean / shape.
fn fit_gamma(y: &[f64]) -> Result<SeverityModel> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let s = mean.ln() - y.iter().map(|v| v.ln()).sum::<f64>() / n;
    if !(s > 0.0) {
        return Err(Error::DegenerateData("no spread in log severities".into()));
    }
    let mut a = (mean * mean / var).clamp(1e-8, 1e8);
    for _ in 0..MAX_ITER {
        let f = a.ln() - digamma(a) - s;
        if f.abs() < SCORE_TOL * 1e-2 {
            return Ok(SeverityModel::Gamma {
                shape: a,
                scale: mean / a,
            });
        }
        let df = 1.0 - a * trigamma(a);
        let step = (-f / df).clamp(-2.0, 2.0);
        a *= step.exp();
    }
    Err(Error::NonConvergence {
        method: "gamma shape MLE",
        iterations: MAX_ITER,
    })
}

/// Lomax MLE. For fixed scale b the shape is n / sum ln(1 + y/b); the scale
/// solves the profile score
///   g(b) = -1 + (a(b) + 1)/n * sum y/(b + y) = 0,
/// searched over ln b. A finite maximum needs a sample coefficient of
/// variation above one; otherwise the likelihood increases towards the
/// exponential limit.
fn fit_pareto(y: &[f64]) -> Result<SeverityModel> {
    let n = y.len() as f64;
    let shape_at = |b: f64| n / y.iter().map(|v| (v / b).ln_1p()).sum::<f64>();
    let score = |t: f64| -> f64 {
        let b = t.exp();
        let a = shape_at(b);
        -1.0 + (a + 1.0) / n * y.iter().map(|v| v / (b + v)).sum::<f64>()
    };

    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let cv2 = var / (mean * mean);
    let none = || {
        Error::DegenerateData(
            "Lomax likelihood has no interior maximum (sample CV <= 1, exponential limit)".into(),
        )
    };
    if cv2 <= 1.0 {
        return Err(none());
    }
    // moment estimate: CV^2 = a / (a - 2), mean = b / (a - 1)
    let a0 = if cv2 > 1.0 + 1e-12 {
        2.0 * cv2 / (cv2 - 1.0)
    } else {
        1e6
    };
    let t0 = (mean * (a0 - 1.0))
        .ln()
        .clamp(mean.ln() - 30.0, mean.ln() + 30.0);
    // walk from the moment estimate until the score changes sign (+ below, - above)
    let (mut lo, mut hi) = (t0, t0);
    let g0 = score(t0);
    let mut step = 0.5;
    if g0 > 0.0 {
        loop {
            hi += step;
            if score(hi) <= 0.0 {
                break;
            }
            lo = hi;
            step *= 2.0;
            if hi > t0 + 60.0 {
                return Err(none());
            }
        }
    } else {
        loop {
            lo -= step;
            if score(lo) > 0.0 {
                break;
            }
            hi = lo;
            step *= 2.0;
            if lo < t0 - 60.0 {
                return Err(none());
            }
        }
    }
    let t = bisect_root(&score, lo, hi)?;
    let b = t.exp();
    Ok(SeverityModel::Pareto {
        shape: shape_at(b),
        scale: b,
    })
}

/// Root of a decreasing-through-zero function on [lo, hi]: Illinois
/// false position with bisection fallback.
fn bisect_root(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (mut flo, mut fhi) = (f(lo), f(hi));
    let mut side = 0i8;
    for _ in 0..MAX_ITER {
        let mut t = (lo * fhi - hi * flo) / (fhi - flo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let ft = f(t);
        if ft.abs() < SCORE_TOL || (hi - lo) < 1e-13 * (1.0 + t.abs()) {
            return Ok(t);
        }
        if (ft > 0.0) == (flo > 0.0) {
            lo = t;
            flo = ft;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            fhi = ft;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::NonConvergence {
        method: "Lomax scale MLE",
        iterations: MAX_ITER,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::sample_severity;
    use crate::rng::stream;

    #[test]
    fn intensity_is_count_over_exposure() {
        let h = ClaimHistory::new(
            vec![1.0; 50]
                .iter()
                .enumerate()
                .map(|(i, _)| 1.0 + i as f64)
                .collect(),
            1000.0,
        )
        .unwrap();
        let (mu, _) = fit_mle(Family::Lognormal, &h).unwrap();
        assert!((mu - 0.05).abs() < 1e-15);
    }

    #[test]
    fn lognormal_closed_form() {
        let y = [1f64.exp(), 2f64.exp(), 3f64.exp()];
        let SeverityModel::Lognormal { log_mean, log_sd } =
            fit_severity(Family::Lognormal, &y).unwrap()
        else {
            panic!()
        };
        assert!((log_mean - 2.0).abs() < 1e-12);
        assert!((log_sd - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_short_data() {
        assert!(matches!(
            fit_severity(Family::Gamma, &[2.0, 2.0, 2.0]),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            fit_severity(Family::Pareto, &[2.0]),
            Err(Error::DegenerateData(_))
        ));
        // CV < 1: no interior Lomax maximum
        assert!(matches!(
            fit_severity(Family::Pareto, &[1.0, 1.1, 0.9, 1.05]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn gamma_shape_recovered() {
        let y = sample_severity(
            &SeverityModel::Gamma {
                shape: 0.44,
                scale: 22.5,
            },
            100_000,
            &mut stream(2, 0),
        )
        .unwrap();
        let SeverityModel::Gamma { shape, scale } = fit_severity(Family::Gamma, &y).unwrap() else {
            panic!()
        };
        assert!((shape - 0.44).abs() < 0.02, "{shape}");
        assert!((scale - 22.5).abs() < 1.5, "{scale}");
    }

    #[test]
    fn gamma_score_vanishes() {
        let y = sample_severity(
            &SeverityModel::Gamma {
                shape: 3.0,
                scale: 2.0,
            },
            2000,
            &mut stream(4, 0),
        )
        .unwrap();
        let SeverityModel::Gamma { shape, .. } = fit_severity(Family::Gamma, &y).unwrap() else {
            panic!()
        };
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let s = mean.ln() - y.iter().map(|v| v.ln()).sum::<f64>() / n;
        assert!((shape.ln() - digamma(shape) - s).abs() < 1e-9);
    }

    #[test]
    fn pareto_recovered_and_stationary() {
        let y = sample_severity(
            &SeverityModel::Pareto {
                shape: 3.6,
                scale: 26.0,
            },
            100_000,
            &mut stream(8, 0),
        )
        .unwrap();
        let SeverityModel::Pareto { shape, scale } = fit_severity(Family::Pareto, &y).unwrap()
        else {
            panic!()
        };
        assert!((shape - 3.6).abs() < 0.25, "{shape}");
        assert!((scale - 26.0).abs() < 2.5, "{scale}");
        // the full log-likelihood is maximal in both coordinates
        let ll = |a: f64, b: f64| -> f64 {
            y.iter()
                .map(|v| a.ln() - b.ln() - (a + 1.0) * (v / b).ln_1p())
                .sum()
        };
        let l0 = ll(shape, scale);
        for (da, db) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-2), (0.0, -1e-2)] {
            assert!(ll(shape + da, scale + db) <= l0);
        }
    }
}
