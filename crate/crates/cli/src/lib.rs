//! Command-line scenario runner for the `wlab` verification suites.

pub mod config;
pub mod report;
pub mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use config::{parse_grid, ConfigFile, Overrides, ScenarioConfig, ScenarioName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "wlab", version, about = "Run a verification scenario and emit a report")]
pub struct Cli {
    /// Suite to run; overrides the config file.
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioName>,
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Points per axis `N`, or `MxN` to also set the dimension.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(Option<usize>, usize)>,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Multiplies every tolerance.
    #[arg(long)]
    pub tol_scale: Option<f64>,
    /// Record wall time in the report (makes reports non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

/// Exit status: 0 when every check passes, 1 on failed checks, 2 on usage,
/// config or output errors.
pub fn run(cli: Cli) -> ExitCode {
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let cfg = ScenarioConfig::resolve(
        file,
        Overrides {
            scenario: cli.scenario,
            seed: cli.seed,
            grid: cli.grid,
            tol_scale: cli.tol_scale,
        },
    )?;
    let start = Instant::now();
    let mut report = scenarios::run_scenario(&cfg);
    if cli.timing {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    let text = match cli.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(report.all_pass())
}
