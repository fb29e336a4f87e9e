//! `spinhydro` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spinhydro_runner::{parse_config_as, run, validate_plan, Kind, RunError, RunOptions};

#[derive(Parser, Debug)]
#[command(name = "spinhydro", version, about = "Liouvillian extraction experiments on Heisenberg spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectra and reconstruction on an unquenched chain
    Validate(Common),
    /// Local quench: spectra and traces across the switch
    Quench(Common),
    /// Transport coefficients per window and dt_cg
    Hydro(Common),
    /// Hydro run with an explicit coarse-graining sweep
    Sweep(SweepArgs),
    /// Dense-matrix cross-checks on small chains
    Oracle(Common),
    /// Entry listing of the configured dictionaries
    DumpDictionary(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides [output] dir)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Base seed (overrides [ensemble] base_seed)
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for ensemble and window fits
    #[arg(long, value_name = "N", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=1024))]
    threads: u64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated dt_cg values (overrides [window] dt_cg)
    #[arg(long = "dt-cg", value_name = "LIST", value_delimiter = ',', num_args = 1..)]
    dt_cg: Option<Vec<f64>>,
}

fn execute(kind: Kind, common: &Common, dt_cg: Option<&[f64]>) -> Result<(), RunError> {
    let text = std::fs::read_to_string(&common.config).map_err(|e| RunError::io(&common.config, e))?;
    let mut plan = parse_config_as(&text, Some(kind))
        .map_err(|e| match e {
            RunError::Config(m) => RunError::Config(format!("{}: {m}", common.config.display())),
            other => other,
        })?;
    if let Some(seed) = common.seed {
        plan.base_seed = seed;
    }
    if let Some(list) = dt_cg {
        plan.dt_cg = list.to_vec();
    }
    validate_plan(&plan).map_err(|e| match e {
        RunError::Config(m) => RunError::Config(format!("after command-line overrides: {m}")),
        other => other,
    })?;
    let opts = RunOptions { threads: common.threads as usize, out_dir: common.out.clone() };
    let manifest = run(&plan, &opts)?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(&plan.output_dir));
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}: wrote {} files to {}", kind, manifest.files.len() + 1, dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Validate(c) => execute(Kind::Validate, c, None),
        Command::Quench(c) => execute(Kind::Quench, c, None),
        Command::Hydro(c) => execute(Kind::Hydro, c, None),
        Command::Sweep(s) => execute(Kind::Sweep, &s.common, s.dt_cg.as_deref()),
        Command::Oracle(c) => execute(Kind::Oracle, c, None),
        Command::DumpDictionary(c) => execute(Kind::DumpDictionary, c, None),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
