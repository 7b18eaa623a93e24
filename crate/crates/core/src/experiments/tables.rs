use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::config::{ExperimentConfig, PrincipleKind};
use crate::bayes::{BayesSetup, PriorSpec};
use crate::criterion::{CriterionEvaluator, LayerContract, RiskMeasure};
use crate::degradation::{
    asymptotic::smooth_inputs, asymptotic_smooth, asymptotic_var, rate_fit, sample_size_for_rmse,
    BootstrapSetup, Coupling, SampleSizeOptions,
};
use crate::error::{Error, Result};
use crate::loss::{LossModel, SeverityModel};
use crate::optimize::{optimize_with, verify_contract};

/// Header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
            .map_err(|e| Error::Format(e.to_string()))
    }
}

fn f(v: f64) -> String {
    format!("{v}")
}

fn model_name(m: &LossModel) -> &'static str {
    m.severity.family().name()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableId {
    Reserves,
    Optima,
    LoadingsSweep,
    OmegaSweep,
    Bootstrap,
    Samplesize,
    BayesInformative,
    BayesJeffreys,
}

impl TableId {
    pub const ALL: [TableId; 8] = [
        TableId::Reserves,
        TableId::Optima,
        TableId::LoadingsSweep,
        TableId::OmegaSweep,
        TableId::Bootstrap,
        TableId::Samplesize,
        TableId::BayesInformative,
        TableId::BayesJeffreys,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableId::Reserves => "reserves",
            TableId::Optima => "optima",
            TableId::LoadingsSweep => "loadings-sweep",
            TableId::OmegaSweep => "omega-sweep",
            TableId::Bootstrap => "bootstrap",
            TableId::Samplesize => "samplesize",
            TableId::BayesInformative => "bayes-informative",
            TableId::BayesJeffreys => "bayes-jeffreys",
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TableId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown table '{s}'")))
    }
}

pub fn run_table(id: TableId, config: &ExperimentConfig) -> Result<Table> {
    config.validate()?;
    match id {
        TableId::Reserves => reserves(config),
        TableId::Optima => optima(config),
        TableId::LoadingsSweep => sweep(
            config,
            "loadings-sweep",
            "reinsurer_loading",
            &config.loading_grid,
        ),
        TableId::OmegaSweep => sweep(config, "omega-sweep", "tilt", &config.tilt_grid),
        TableId::Bootstrap => bootstrap(config),
        TableId::Samplesize => samplesize(config),
        TableId::BayesInformative => bayes(config, false),
        TableId::BayesJeffreys => bayes(config, true),
    }
}

fn reserves(c: &ExperimentConfig) -> Result<Table> {
    let mut header = vec![
        "model",
        "param1",
        "param2",
        "severity_mean",
        "severity_sd",
        "skewness",
    ];
    let names: Vec<String> = c
        .reserve_levels
        .iter()
        .map(|l| format!("reserve_{}", 1.0 - l))
        .collect();
    header.extend(names.iter().map(|s| s.as_str()));
    header.extend(["m", "seed"]);
    let mut t = Table::new("reserves", &header);
    for model in c.severity_models()? {
        let mo = model.severity.moments()?;
        let sample = model.simulate(c.m, c.seed)?;
        let p = model.severity.params();
        let skew = model.severity.skewness().map(f).unwrap_or_default();
        let mut row = vec![
            model_name(&model).into(),
            f(p[0]),
            f(p[1]),
            f(mo.mean),
            f(mo.sd),
            skew,
        ];
        for &l in &c.reserve_levels {
            row.push(f(sample.quantile(l)?));
        }
        row.extend([c.m.to_string(), c.seed.to_string()]);
        t.push(row);
    }
    Ok(t)
}

fn optima(c: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(
        "optima",
        &[
            "model",
            "principle",
            "a1",
            "width",
            "ratio",
            "verify_a1",
            "verify_width",
            "verify_ratio",
            "m",
            "seed",
        ],
    );
    for model in c.models_with_gaussian()? {
        let sample = model.simulate(c.m, c.seed)?;
        for k in PrincipleKind::ALL {
            let crit = c.criterion_with(k);
            let o = optimize_with(&CriterionEvaluator::new(&sample, &crit)?)?;
            let v = verify_contract(&sample, &crit)?;
            t.push(vec![
                model_name(&model).into(),
                k.name().into(),
                f(o.contract.retention),
                f(o.contract.width()),
                f(o.value),
                f(v.contract.retention),
                f(v.contract.width()),
                f(v.value),
                c.m.to_string(),
                c.seed.to_string(),
            ]);
        }
    }
    Ok(t)
}

fn sweep(c: &ExperimentConfig, name: &str, knob: &str, grid: &[f64]) -> Result<Table> {
    let mut t = Table::new(
        name,
        &[
            knob,
            "model",
            "principle",
            "a1",
            "width",
            "ratio",
            "m",
            "seed",
        ],
    );
    let models = c.models_with_gaussian()?;
    let samples: Vec<_> = models
        .iter()
        .map(|m| m.simulate(c.m, c.seed))
        .collect::<Result<_>>()?;
    for &g in grid {
        let mut cc = c.clone();
        let kind = if knob == "tilt" {
            cc.tilt = g;
            PrincipleKind::MixedEsscher
        } else {
            cc.reinsurer_loading = g;
            PrincipleKind::Expected
        };
        let crit = cc.criterion_with(kind);
        crit.validate()?;
        for (model, sample) in models.iter().zip(&samples) {
            let o = optimize_with(&CriterionEvaluator::new(sample, &crit)?)?;
            t.push(vec![
                f(g),
                model_name(model).into(),
                kind.name().into(),
                f(o.contract.retention),
                f(o.contract.width()),
                f(o.value),
                c.m.to_string(),
                c.seed.to_string(),
            ]);
        }
    }
    Ok(t)
}

fn bootstrap(c: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(
        "bootstrap",
        &[
            "model",
            "principle",
            "n",
            "mean_a1",
            "mean_a2",
            "mean_ratio",
            "base_ratio",
            "mean_d",
            "sd_d",
            "reps",
            "dropped",
            "m",
            "seed",
        ],
    );
    let crit = c.criterion();
    for model in c.severity_models()? {
        let setup = BootstrapSetup::new(&model, &crit, c.m, c.seed, Coupling::Common)?;
        for &n in &c.n_grid {
            let r = setup.run(n, c.reps)?;
            t.push(vec![
                model_name(&model).into(),
                c.principle.name().into(),
                f(n),
                f(r.mean_retention),
                f(r.mean_limit),
                f(r.mean_ratio),
                f(r.base.value),
                f(r.stats.mean),
                f(r.stats.sd),
                c.reps.to_string(),
                r.stats.dropped.to_string(),
                c.m.to_string(),
                c.seed.to_string(),
            ]);
        }
    }
    Ok(t)
}

fn samplesize(c: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(
        "samplesize",
        &[
            "model",
            "param1",
            "param2",
            "severity_sd",
            "target",
            "status",
            "n",
            "rmse",
            "reps",
            "m",
            "seed",
        ],
    );
    let models = match c.family {
        Some(_) => c.severity_models()?,
        None => vec![
            LossModel::new(
                c.portfolio(),
                SeverityModel::Gamma {
                    shape: 4.0,
                    scale: 2.5,
                },
            )?,
            LossModel::new(
                c.portfolio(),
                SeverityModel::Gamma {
                    shape: 0.44,
                    scale: 22.5,
                },
            )?,
        ],
    };
    let crit = c.criterion();
    for model in models {
        let p = model.severity.params();
        let sd = model.severity.moments()?.sd;
        for &target in &c.rmse_targets {
            let opts = SampleSizeOptions {
                target,
                n_max: c.n_max,
                reps: c.reps,
                m: c.m,
                seed: c.seed,
                ..Default::default()
            };
            let (status, n, rmse) = match sample_size_for_rmse(&model, &crit, &opts) {
                Ok(r) => ("ok".to_string(), f(r.n), f(r.rmse)),
                Err(Error::BudgetExhausted { rmse, .. }) => {
                    ("budget_exhausted".to_string(), String::new(), f(rmse))
                }
                Err(e) => return Err(e),
            };
            t.push(vec![
                model_name(&model).into(),
                f(p[0]),
                f(p[1]),
                f(sd),
                f(target),
                status,
                n,
                rmse,
                c.reps.to_string(),
                c.m.to_string(),
                c.seed.to_string(),
            ]);
        }
    }
    Ok(t)
}

fn bayes(c: &ExperimentConfig, jeffreys: bool) -> Result<Table> {
    let name = if jeffreys {
        "bayes-jeffreys"
    } else {
        "bayes-informative"
    };
    let mut t = Table::new(
        name,
        &[
            "model",
            "prior",
            "history_policies",
            "mean_claims",
            "mean_a1",
            "mean_a2",
            "mean_ratio",
            "base_ratio",
            "mean_d",
            "sd_d",
            "reps",
            "dropped",
            "chain_warnings",
            "m",
            "seed",
        ],
    );
    let crit = c.criterion();
    for model in c.severity_models()? {
        let prior = if jeffreys {
            PriorSpec::Jeffreys
        } else {
            PriorSpec::informative(model.severity.family())?
        };
        let setup = BayesSetup::new(&model, &crit, c.m, c.seed)?;
        for r in setup.run_levels(&prior, &c.history_policies, c.reps)? {
            t.push(vec![
                model_name(&model).into(),
                r.prior.clone(),
                f(r.history_policies),
                f(r.mean_claims),
                f(r.mean_retention),
                f(r.mean_limit),
                f(r.mean_ratio),
                f(r.base.value),
                f(r.stats.mean),
                f(r.stats.sd),
                c.reps.to_string(),
                r.stats.dropped.to_string(),
                r.chain_warnings.to_string(),
                c.m.to_string(),
                c.seed.to_string(),
            ]);
        }
    }
    Ok(t)
}

/// C as a function of a1 with a2 = x_eps, one curve per model. Points with
/// no positive surplus are flagged infeasible and left blank.
pub fn run_figure_sweep(config: &ExperimentConfig) -> Result<Table> {
    config.validate()?;
    let mut t = Table::new(
        "ratio-curve",
        &["model", "a1", "a2", "ratio", "feasible", "m", "seed"],
    );
    let crit = config.criterion();
    for model in config.models_with_gaussian()? {
        let sample = model.simulate(config.m, config.seed)?;
        let ev = CriterionEvaluator::new(&sample, &crit)?;
        let xe = ev.x_eps();
        let grid: Vec<f64> = if config.a1_grid.is_empty() {
            (0..40)
                .map(|i| xe * (0.5 + 0.5 * i as f64 / 39.0))
                .collect()
        } else {
            config.a1_grid.clone()
        };
        for a1 in grid {
            let a2 = xe.max(a1);
            let (ratio, ok) = match ev.ratio(&LayerContract::new(a1, a2)?) {
                Ok(v) => (f(v), "true"),
                Err(_) => (String::new(), "false"),
            };
            t.push(vec![
                model_name(&model).into(),
                f(a1),
                f(a2),
                ratio,
                ok.into(),
                config.m.to_string(),
                config.seed.to_string(),
            ]);
        }
    }
    Ok(t)
}

/// Bootstrap against the large-sample formulas for VaR and CVaR on each
/// severity model, with log-log slopes of E D in n.
pub fn run_asymptotics(config: &ExperimentConfig) -> Result<Table> {
    config.validate()?;
    let mut t = Table::new(
        "asymptotics",
        &[
            "model",
            "risk_measure",
            "n",
            "bootstrap_mean",
            "bootstrap_sd",
            "asymptotic_mean",
            "asymptotic_sd",
            "bootstrap_slope",
            "asymptotic_slope",
            "reps",
            "m",
            "seed",
        ],
    );
    for model in config.severity_models()? {
        for measure in [RiskMeasure::VaR, RiskMeasure::CVaR] {
            let mut crit = config.criterion();
            crit.risk_measure = measure;
            let setup =
                BootstrapSetup::new(&model, &crit, config.m, config.seed, Coupling::Common)?;
            let boot: Vec<_> = config
                .n_grid
                .iter()
                .map(|&n| setup.run(n, config.reps))
                .collect::<Result<Vec<_>>>()?;
            let asym: Vec<Option<(f64, f64)>> = match measure {
                RiskMeasure::VaR => {
                    let va = asymptotic_var(&model, &crit, config.m, config.seed)?;
                    config
                        .n_grid
                        .iter()
                        .map(|&n| Some((va.mean(n), va.variance(n).sqrt())))
                        .collect()
                }
                RiskMeasure::CVaR => {
                    match smooth_inputs(&model, &crit, config.m, config.seed, 1e-2) {
                        Ok((inputs, _, _)) => config
                            .n_grid
                            .iter()
                            .map(|&n| asymptotic_smooth(&inputs, n).ok().map(|s| (s.mean, s.sd)))
                            .collect(),
                        Err(_) => vec![None; config.n_grid.len()],
                    }
                }
            };
            let pts: Vec<(f64, f64)> = boot
                .iter()
                .map(|b| (b.stats.n, b.stats.mean))
                .filter(|p| p.1 > 0.0)
                .collect();
            let b_slope = rate_fit(&pts).map(f).unwrap_or_default();
            let apts: Vec<(f64, f64)> = config
                .n_grid
                .iter()
                .zip(&asym)
                .filter_map(|(n, a)| a.map(|a| (*n, a.0)))
                .collect();
            let a_slope = rate_fit(&apts).map(f).unwrap_or_default();
            for ((n, b), a) in config.n_grid.iter().zip(&boot).zip(&asym) {
                let (am, asd) = a.map_or((String::new(), String::new()), |a| (f(a.0), f(a.1)));
                t.push(vec![
                    model_name(&model).into(),
                    measure.to_string(),
                    f(*n),
                    f(b.stats.mean),
                    f(b.stats.sd),
                    am,
                    asd,
                    b_slope.clone(),
                    a_slope.clone(),
                    config.reps.to_string(),
                    config.m.to_string(),
                    config.seed.to_string(),
                ]);
            }
        }
    }
    Ok(t)
}

/// Run metadata written next to the CSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_seconds: f64,
    pub files: Vec<PathBuf>,
    pub config: ExperimentConfig,
}

pub fn write_table(dir: &Path, table: &Table) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.csv", table.name));
    std::fs::write(&path, table.to_csv()?)?;
    Ok(path)
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    files: Vec<PathBuf>,
    wall_seconds: f64,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let m = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        threads: rayon::current_num_threads(),
        wall_seconds,
        files,
        config: config.clone(),
    };
    let path = dir.join(format!("{}.manifest.json", command.replace(' ', "-")));
    std::fs::write(&path, serde_json::to_string_pretty(&m)?)?;
    Ok(path)
}
