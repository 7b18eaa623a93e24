//! Nelder-Mead minimisation of the criterion over (a1, a2 - a1), and a
//! grid-plus-bisection search used as an independent check.

use serde::{Deserialize, Serialize};

use crate::criterion::{CriterionConfig, CriterionEvaluator, LayerContract};
use crate::error::{Error, Result};
use crate::loss::LossSample;

/// Objective value assigned to infeasible contracts.
pub const PENALTY: f64 = 1e9;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when max - min of the simplex values < rel_tol (1 + |best|).
    pub rel_tol: f64,
    /// Offsets of the initial simplex vertices from the start.
    pub initial_step: [f64; 2],
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            rel_tol: 1e-6,
            initial_step: [1.0, 1.0],
        }
    }
}

/// Minimiser output for a generic objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub point: [f64; 2],
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder-Mead with reflection 1, expansion 2, contraction 0.5, shrink 0.5.
pub fn nelder_mead<F: FnMut([f64; 2]) -> f64>(
    mut f: F,
    start: [f64; 2],
    options: &NelderMeadOptions,
) -> Minimum {
    let mut evals = 0usize;
    let mut eval = |p: [f64; 2], evals: &mut usize| {
        *evals += 1;
        let v = f(p);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<([f64; 2], f64)> = vec![(start, eval(start, &mut evals))];
    for d in 0..2 {
        let mut p = start;
        p[d] += options.initial_step[d];
        simplex.push((p, eval(p, &mut evals)));
    }
    let lerp =
        |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[2].1);
        if worst - best < options.rel_tol * (1.0 + best.abs()) {
            return Minimum {
                point: simplex[0].0,
                value: best,
                evaluations: evals,
                converged: true,
            };
        }
        if evals >= options.max_evals {
            return Minimum {
                point: simplex[0].0,
                value: best,
                evaluations: evals,
                converged: false,
            };
        }
        let c = [
            (simplex[0].0[0] + simplex[1].0[0]) / 2.0,
            (simplex[0].0[1] + simplex[1].0[1]) / 2.0,
        ];
        let xw = simplex[2].0;
        let xr = lerp(c, xw, -1.0);
        let fr = eval(xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = lerp(c, xw, -2.0);
            let fe = eval(xe, &mut evals);
            simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[1].1 {
            simplex[2] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let xc = lerp(c, xr, 0.5);
            (xc, eval(xc, &mut evals))
        } else {
            let xc = lerp(c, xw, 0.5);
            (xc, eval(xc, &mut evals))
        };
        if fc < fr.min(worst) {
            simplex[2] = (xc, fc);
            continue;
        }
        let b = simplex[0].0;
        for v in simplex.iter_mut().skip(1) {
            let p = lerp(b, v.0, 0.5);
            *v = (p, eval(p, &mut evals));
        }
    }
}

/// Axis-aligned search box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

const GRID: usize = 50;
const PASSES: usize = 30;

/// 50 x 50 grid scan (edges included), then 30 passes of coordinate-wise
/// refinement: each pass tries +-h around the incumbent in every
/// coordinate and halves h.
pub fn grid_bisect_verify<F: FnMut([f64; 2]) -> f64>(mut f: F, bounds: &Bounds) -> Minimum {
    let mut evals = 0;
    let mut h = [0.0; 2];
    for d in 0..2 {
        h[d] = (bounds.upper[d] - bounds.lower[d]) / (GRID - 1) as f64;
    }
    let at = |d: usize, k: usize| {
        if k == GRID - 1 {
            bounds.upper[d]
        } else {
            bounds.lower[d] + h[d] * k as f64
        }
    };
    let mut best = ([bounds.lower[0], bounds.lower[1]], f64::INFINITY);
    for i in 0..GRID {
        for j in 0..GRID {
            let p = [at(0, i), at(1, j)];
            let v = f(p);
            evals += 1;
            if v < best.1 {
                best = (p, v);
            }
        }
    }
    for _ in 0..PASSES {
        for d in 0..2 {
            for s in [-1.0, 1.0] {
                let mut p = best.0;
                p[d] = (p[d] + s * h[d]).clamp(bounds.lower[d], bounds.upper[d]);
                let v = f(p);
                evals += 1;
                if v < best.1 {
                    best = (p, v);
                }
            }
            h[d] *= 0.5;
        }
    }
    Minimum {
        point: best.0,
        value: best.1,
        evaluations: evals,
        converged: true,
    }
}

/// Optimal contract and criterion value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub contract: LayerContract,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Relative offsets of the extra starts around (0.5, 0.4) x_eps.
const JITTER: [[f64; 2]; 3] = [[0.0, 0.0], [0.15, -0.1], [-0.15, 0.12]];
const MAX_RESTARTS: usize = 6;

/// Criterion in (a1, width) coordinates with penalties for infeasible points.
pub fn penalised_objective<'a>(ev: &'a CriterionEvaluator<'a>) -> impl Fn([f64; 2]) -> f64 + 'a {
    move |p: [f64; 2]| {
        if !(p[0] >= 0.0 && p[1] >= 0.0) {
            return PENALTY * (1.0 + (-p[0]).max(0.0) + (-p[1]).max(0.0));
        }
        match ev.ratio(&LayerContract {
            retention: p[0],
            limit: p[0] + p[1],
        }) {
            Ok(v) => v,
            Err(_) => PENALTY,
        }
    }
}

/// Minimises the criterion from jittered starts around (0.5 x_eps,
/// 0.4 x_eps); each run is restarted from its own best point until it stops
/// improving, and the best run is returned.
pub fn optimize_contract(sample: &LossSample, config: &CriterionConfig) -> Result<OptimResult> {
    let ev = CriterionEvaluator::new(sample, config)?;
    optimize_with(&ev)
}

pub fn optimize_with(ev: &CriterionEvaluator<'_>) -> Result<OptimResult> {
    let xe = ev.x_eps().max(f64::MIN_POSITIVE);
    let f = penalised_objective(ev);
    let opts = NelderMeadOptions {
        initial_step: [0.1 * xe, 0.1 * xe],
        ..Default::default()
    };
    let restart = NelderMeadOptions {
        initial_step: [0.02 * xe, 0.02 * xe],
        ..Default::default()
    };
    let mut total = 0;
    let mut best: Option<Minimum> = None;
    for j in JITTER {
        let start = [(0.5 + j[0]) * xe, (0.4 + j[1]) * xe];
        let mut run = nelder_mead(&f, start, &opts);
        total += run.evaluations;
        for _ in 0..MAX_RESTARTS {
            let again = nelder_mead(&f, run.point, &restart);
            total += again.evaluations;
            let improved = again.value < run.value - 1e-9 * (1.0 + run.value.abs());
            if again.value <= run.value {
                run = Minimum {
                    converged: again.converged,
                    ..again
                };
            }
            if !improved {
                break;
            }
        }
        if best.is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    if best.value >= PENALTY {
        return Err(Error::AllInfeasible);
    }
    Ok(OptimResult {
        contract: LayerContract {
            retention: best.point[0],
            limit: best.point[0] + best.point[1],
        },
        value: best.value,
        evaluations: total,
        converged: best.converged,
    })
}

/// Grid-plus-bisection optimum over a1 in [0, x_eps], a2 in [0, max X]
/// (infeasible a2 < a1 penalised). Working in (a1, a2) puts the VaR kink
/// a2 = x_eps on a grid axis.
pub fn verify_contract(sample: &LossSample, config: &CriterionConfig) -> Result<OptimResult> {
    let ev = CriterionEvaluator::new(sample, config)?;
    let f = |p: [f64; 2]| {
        if p[1] < p[0] {
            return PENALTY;
        }
        ev.ratio(&LayerContract {
            retention: p[0],
            limit: p[1],
        })
        .unwrap_or(PENALTY)
    };
    let b = Bounds {
        lower: [0.0, 0.0],
        upper: [ev.x_eps(), sample.max()],
    };
    let m = grid_bisect_verify(f, &b);
    if m.value >= PENALTY {
        return Err(Error::AllInfeasible);
    }
    Ok(OptimResult {
        contract: LayerContract {
            retention: m.point[0],
            limit: m.point[1],
        },
        value: m.value,
        evaluations: m.evaluations,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{simulate_total_losses, PortfolioParams, SeverityModel};

    #[test]
    fn quadratic_bowl() {
        let m = nelder_mead(
            |p| (p[0] - 3.0).powi(2) + (p[1] + 1.0).powi(2),
            [0.0, 0.0],
            &NelderMeadOptions {
                rel_tol: 1e-14,
                ..Default::default()
            },
        );
        assert!(
            (m.point[0] - 3.0).abs() < 1e-4 && (m.point[1] + 1.0).abs() < 1e-4,
            "{m:?}"
        );
        assert!(m.converged);
    }

    #[test]
    fn start_at_optimum() {
        let m = nelder_mead(
            |p| p[0] * p[0] + p[1] * p[1],
            [0.0, 0.0],
            &NelderMeadOptions {
                initial_step: [1e-4, 1e-4],
                ..Default::default()
            },
        );
        assert!(m.converged);
        assert!(m.evaluations < 40, "{}", m.evaluations);
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let m = nelder_mead(
            |p| (p[0] - 1e6).abs() + p[1].abs(),
            [0.0, 0.0],
            &NelderMeadOptions {
                max_evals: 20,
                ..Default::default()
            },
        );
        assert!(!m.converged);
        assert!(m.evaluations >= 20);
    }

    #[test]
    fn grid_monotone_and_flat() {
        let b = Bounds {
            lower: [1.0, -2.0],
            upper: [4.0, 5.0],
        };
        let m = grid_bisect_verify(|p| p[0] + 2.0 * p[1], &b);
        assert_eq!(m.point, [1.0, -2.0]);
        let m = grid_bisect_verify(|p| -p[0] - p[1], &b);
        assert_eq!(m.point, [4.0, 5.0]);
        let m = grid_bisect_verify(|_| 7.5, &b);
        assert_eq!(m.value, 7.5);
    }

    #[test]
    fn all_infeasible_detected() {
        let s = simulate_total_losses(
            &PortfolioParams::default(),
            &SeverityModel::Gamma {
                shape: 0.44,
                scale: 22.5,
            },
            2000,
            3,
        )
        .unwrap();
        // reinsurance so expensive and capital so dear that no contract has G > 0
        let cfg = CriterionConfig {
            cost_of_capital: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            optimize_contract(&s, &cfg),
            Err(Error::AllInfeasible)
        ));
    }

    #[test]
    fn optimizer_agrees_with_grid() {
        let s = simulate_total_losses(
            &PortfolioParams::default(),
            &SeverityModel::Gamma {
                shape: 0.44,
                scale: 22.5,
            },
            50_000,
            21,
        )
        .unwrap();
        let cfg = CriterionConfig::default();
        let nm = optimize_contract(&s, &cfg).unwrap();
        let gr = verify_contract(&s, &cfg).unwrap();
        assert!((nm.value - gr.value).abs() <= 0.05, "{nm:?} {gr:?}");
        assert!((nm.value - 12.46).abs() < 0.3);
    }
}
