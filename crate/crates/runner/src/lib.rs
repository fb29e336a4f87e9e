//! Experiment orchestration for spinhydro: configuration, ensembles,
//! per-kind flows and the CSV/manifest artifacts they write.

pub mod artifacts;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod flows;
pub mod table;

use std::path::PathBuf;

pub use artifacts::{ArtifactSet, FileEntry, Manifest, MANIFEST_NAME};
pub use config::{parse_config, parse_config_as, render_config, validate_plan, DictChoice, ExperimentPlan, Kind};
pub use error::{Result, RunError};

/// Execution settings that do not affect results.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub threads: usize,
    /// Overrides `output_dir` of the plan.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { threads: 1, out_dir: None }
    }
}

/// Runs one plan to completion and writes its manifest.
pub fn run(plan: &ExperimentPlan, opts: &RunOptions) -> Result<Manifest> {
    validate_plan(plan)?;
    let dir = opts.out_dir.clone().unwrap_or_else(|| PathBuf::from(&plan.output_dir));
    let mut out = ArtifactSet::create(&dir, plan)?;
    ensemble::in_pool(opts.threads, || match plan.kind {
        Kind::Validate => flows::validate::run(plan, &mut out),
        Kind::Quench => flows::quench::run(plan, &mut out),
        Kind::Hydro | Kind::Sweep => flows::hydro::run(plan, &mut out),
        Kind::Oracle => flows::oracle::run(plan, &mut out),
        Kind::DumpDictionary => flows::dump::run(plan, &mut out),
    })??;
    out.finish()
}
