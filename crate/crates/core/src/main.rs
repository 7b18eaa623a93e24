use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use reinsopt::bayes::{sample_posterior, PriorSpec};
use reinsopt::criterion::RiskMeasure;
use reinsopt::experiments::{
    run_asymptotics, run_figure_sweep, run_table, write_manifest, write_table, ExperimentConfig,
    PrincipleKind, Table, TableId,
};
use reinsopt::loss::io::SampleFormat;
use reinsopt::loss::{simulate_history, Family};
use reinsopt::optimize::{optimize_contract, verify_contract};
use reinsopt::rng::{derive, purpose, SimRng};
use reinsopt::{Error, Result};

/// Optimal reinsurance layers and their degradation under parameter error.
#[derive(Parser)]
#[command(name = "reinsopt", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// m = 1e6 and reps = 100 unless given explicitly.
    #[arg(long, global = true)]
    full_scale: bool,
    /// Simulated totals per sample.
    #[arg(long, global = true)]
    m: Option<usize>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Restrict to one severity family.
    #[arg(long, global = true)]
    family: Option<Family>,
    /// Two parameters of --family.
    #[arg(long, global = true, num_args = 2, allow_negative_numbers = true, value_names = ["P1", "P2"])]
    params: Option<Vec<f64>>,
    #[arg(long, global = true, value_enum)]
    principle: Option<Principle>,
    #[arg(long, global = true, value_enum)]
    measure: Option<Measure>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Principle {
    Expected,
    MixedEsscher,
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Var,
    Cvar,
}

#[derive(Clone, Copy, ValueEnum)]
enum Prior {
    Informative,
    Jeffreys,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Binary,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate total losses and write the sorted sample.
    Simulate {
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Optimise the layer for every model.
    Optimize {
        /// Also run the grid-and-bisection verifier.
        #[arg(long)]
        verify: bool,
    },
    /// Nested bootstrap of the degradation.
    Bootstrap {
        /// Expected claim counts of the simulated histories.
        #[arg(long, num_args = 1..)]
        n: Option<Vec<f64>>,
    },
    /// Bootstrap against the large-sample formulas.
    Asymptotics {
        #[arg(long, num_args = 1..)]
        n: Option<Vec<f64>>,
    },
    /// Bayesian degradation over historical portfolio sizes.
    Bayes {
        #[arg(long, value_enum, default_value = "informative")]
        prior: Prior,
        #[arg(long, num_args = 1..)]
        history_policies: Option<Vec<f64>>,
        /// Also export posterior draws for one simulated history.
        #[arg(long)]
        draws: bool,
    },
    /// Reproduce one table, or all of them.
    Table {
        /// reserves, optima, loadings-sweep, omega-sweep, bootstrap,
        /// samplesize, bayes-informative, bayes-jeffreys or all.
        id: String,
    },
    /// Criterion as a function of the retention.
    Sweep {
        #[arg(long, num_args = 1..)]
        a1: Option<Vec<f64>>,
    },
}

fn resolve(g: &Global) -> Result<ExperimentConfig> {
    let mut c = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if g.full_scale {
        c = c.full_scale();
    }
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(o) = &g.out {
        c.out = o.clone();
    }
    if let Some(m) = g.m {
        c.m = m;
    }
    if let Some(r) = g.reps {
        c.reps = r;
    }
    if let Some(f) = g.family {
        c.family = Some(f);
    }
    if let Some(p) = &g.params {
        c.params = Some([p[0], p[1]]);
    }
    if let Some(p) = g.principle {
        c.principle = match p {
            Principle::Expected => PrincipleKind::Expected,
            Principle::MixedEsscher => PrincipleKind::MixedEsscher,
        };
    }
    if let Some(m) = g.measure {
        c.risk_measure = match m {
            Measure::Var => RiskMeasure::VaR,
            Measure::Cvar => RiskMeasure::CVaR,
        };
    }
    c.validate()?;
    Ok(c)
}

fn emit(
    c: &ExperimentConfig,
    command: &str,
    tables: &[Table],
    mut extra: Vec<PathBuf>,
    start: Instant,
) -> Result<()> {
    let mut files = Vec::new();
    for t in tables {
        files.push(write_table(&c.out, t)?);
    }
    files.append(&mut extra);
    let manifest = write_manifest(
        &c.out,
        command,
        c,
        files.clone(),
        start.elapsed().as_secs_f64(),
    )?;
    for f in files.iter().chain(std::iter::once(&manifest)) {
        println!("{}", f.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut c = resolve(&cli.global)?;
    for w in c.criterion().warnings() {
        eprintln!("warning: {w}");
    }
    let start = Instant::now();
    match cli.command {
        Command::Simulate { format } => {
            let (fmt, ext) = match format {
                Format::Csv => (SampleFormat::Csv, "csv"),
                Format::Binary => (SampleFormat::Binary, "bin"),
            };
            std::fs::create_dir_all(&c.out)?;
            let mut files = Vec::new();
            for model in c.models_with_gaussian()? {
                let s = model.simulate(c.m, c.seed)?;
                let path = c
                    .out
                    .join(format!("losses-{}.{ext}", model.severity.family()));
                s.save(&path, fmt)?;
                eprintln!(
                    "{}: mean {:.3}, 99% {:.3}, 99.5% {:.3}",
                    model.severity.family(),
                    s.mean(),
                    s.quantile(0.01)?,
                    s.quantile(0.005)?
                );
                files.push(path);
            }
            emit(&c, "simulate", &[], files, start)
        }
        Command::Optimize { verify } => {
            let mut t = Table {
                name: "optimize".into(),
                header: [
                    "model",
                    "principle",
                    "method",
                    "a1",
                    "a2",
                    "ratio",
                    "evaluations",
                    "m",
                    "seed",
                ]
                .map(String::from)
                .to_vec(),
                rows: Vec::new(),
            };
            let crit = c.criterion();
            for model in c.models_with_gaussian()? {
                let s = model.simulate(c.m, c.seed)?;
                let mut runs = vec![("nelder_mead", optimize_contract(&s, &crit)?)];
                if verify {
                    runs.push(("grid_bisection", verify_contract(&s, &crit)?));
                }
                for (method, o) in runs {
                    t.rows.push(vec![
                        model.severity.family().to_string(),
                        c.principle.name().into(),
                        method.into(),
                        o.contract.retention.to_string(),
                        o.contract.limit.to_string(),
                        o.value.to_string(),
                        o.evaluations.to_string(),
                        c.m.to_string(),
                        c.seed.to_string(),
                    ]);
                }
            }
            emit(&c, "optimize", &[t], vec![], start)
        }
        Command::Bootstrap { n } => {
            if let Some(n) = n {
                c.n_grid = n;
            }
            c.validate()?;
            emit(
                &c,
                "bootstrap",
                &[run_table(TableId::Bootstrap, &c)?],
                vec![],
                start,
            )
        }
        Command::Asymptotics { n } => {
            if let Some(n) = n {
                c.n_grid = n;
            }
            c.validate()?;
            emit(&c, "asymptotics", &[run_asymptotics(&c)?], vec![], start)
        }
        Command::Bayes {
            prior,
            history_policies,
            draws,
        } => {
            if let Some(h) = history_policies {
                c.history_policies = h;
            }
            c.validate()?;
            let id = match prior {
                Prior::Informative => TableId::BayesInformative,
                Prior::Jeffreys => TableId::BayesJeffreys,
            };
            let table = run_table(id, &c)?;
            let mut extra = Vec::new();
            if draws {
                std::fs::create_dir_all(&c.out)?;
                let j = c.history_policies.iter().copied().fold(0.0, f64::max);
                for model in c.severity_models()? {
                    let family = model.severity.family();
                    let spec = match prior {
                        Prior::Informative => PriorSpec::informative(family)?,
                        Prior::Jeffreys => PriorSpec::Jeffreys,
                    };
                    let mut rng = SimRng::seed_from_u64(derive(c.seed, purpose::HISTORY, 0));
                    let policies = (j.round() as u64).max(1);
                    let h = simulate_history(
                        model.portfolio.intensity,
                        &model.severity,
                        policies,
                        c.horizon,
                        &mut rng,
                    )?;
                    let d = sample_posterior(&spec, family, &h, c.m, &mut rng)?;
                    for w in &d.severity.diagnostics.warnings {
                        eprintln!("warning: {family}: {w}");
                    }
                    let path = c
                        .out
                        .join(format!("posterior-{family}-{}.csv", spec.name()));
                    d.save_csv(&path)?;
                    extra.push(path);
                }
            }
            emit(&c, "bayes", &[table], extra, start)
        }
        Command::Table { id } => {
            let ids: Vec<TableId> = if id == "all" {
                TableId::ALL.to_vec()
            } else {
                vec![id.parse::<TableId>()?]
            };
            let tables = ids
                .iter()
                .map(|i| run_table(*i, &c))
                .collect::<Result<Vec<_>>>()?;
            emit(&c, &format!("table {id}"), &tables, vec![], start)
        }
        Command::Sweep { a1 } => {
            if let Some(a) = a1 {
                c.a1_grid = a;
            }
            c.validate()?;
            emit(&c, "sweep", &[run_figure_sweep(&c)?], vec![], start)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(match e {
                Error::InvalidParameter(_)
                | Error::InvalidLevel(_)
                | Error::Json(_)
                | Error::Format(_) => 2,
                _ => 1,
            })
        }
    }
}
