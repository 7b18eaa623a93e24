//! Configuration-driven experiment runner: tables, curves and the
//! comparison of bootstrap and large-sample degradation, written as CSV
//! with a JSON manifest per run.

mod config;
mod tables;

pub use config::{reference_severity, ExperimentConfig, PrincipleKind};
pub use tables::{
    run_asymptotics, run_figure_sweep, run_table, write_manifest, write_table, Manifest, Table,
    TableId,
};
