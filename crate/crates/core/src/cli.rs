//! Command-line front end: `run`, `sweep`, `oracle` and `validate`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{bundled, load_config, validate_scenario, ScenarioConfig, BUNDLED};
use crate::error::{Error, Result};
use crate::oracle::run_oracle_suite;
use crate::output::{write_sweep_csv, write_transcript_csv, OutputSet};
use crate::phase::{Accounting, Strategy};
use crate::sim::par::Execution;
use crate::sim::sweep::run_sweep;
use crate::sim::{run_scenario, ReportSummary};
use crate::spectrum::SensingMode;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "crsn",
    version,
    about = "Energy-efficient channel access for clustered CR sensor networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Expected,
    Sampled,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SensingArg {
    Paper,
    Strict,
}

#[derive(Debug, clap::Args)]
pub struct ScenarioArgs {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long, default_value = "table2")]
    pub config: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub periods: Option<usize>,
    /// Run a single strategy: proposed, c0_only, asa or average_allocation.
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<Strategy>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub sensing: Option<SensingArg>,
    /// Output directory.
    #[arg(long, default_value = "crsn-out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write its transcript.
    Run(ScenarioArgs),
    /// Reproduce a figure sweep.
    Sweep {
        /// Bundled figure scenario (fig1 to fig7); overrides `--config`.
        #[arg(long)]
        figure: Option<String>,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Seeds per sweep point.
        #[arg(long)]
        seeds: Option<usize>,
        /// Disable the thread pool.
        #[arg(long)]
        sequential: bool,
    },
    /// Cross-check the allocation solvers on random instances.
    Oracle {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Validate a scenario and list every violation.
    Validate {
        #[arg(long)]
        config: String,
    },
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse()
}

fn resolve_config(spec: &str) -> Result<ScenarioConfig> {
    let path = Path::new(spec);
    if path.exists() {
        load_config(path)
    } else if BUNDLED.iter().any(|(n, _)| *n == spec) {
        bundled(spec)
    } else {
        Err(Error::Config(format!(
            "{spec}: no such file or bundled scenario"
        )))
    }
}

impl ScenarioArgs {
    fn apply(&self, mut c: ScenarioConfig) -> ScenarioConfig {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(p) = self.periods {
            c.periods = p;
        }
        if let Some(s) = self.strategy {
            c.strategies = vec![s];
        }
        if let Some(m) = self.mode {
            c.accounting = match m {
                ModeArg::Expected => Accounting::Expected,
                ModeArg::Sampled => Accounting::Sampled,
            };
        }
        if let Some(s) = self.sensing {
            c.sensing = match s {
                SensingArg::Paper => SensingMode::Paper,
                SensingArg::Strict => SensingMode::Strict,
            };
        }
        c
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool_version: &'static str,
    command: &'static str,
    scenario: &'a str,
    scenario_digest: String,
    seed: u64,
    seeds: usize,
    periods: usize,
    strategies: Vec<&'static str>,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    summaries: Vec<ReportSummary>,
    config: &'a ScenarioConfig,
}

fn manifest<'a>(command: &'static str, c: &'a ScenarioConfig, outputs: &[&str]) -> Manifest<'a> {
    Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command,
        scenario: &c.name,
        scenario_digest: c.digest(),
        seed: c.seed,
        seeds: c.seeds,
        periods: c.periods,
        strategies: c.strategies.iter().map(|s| s.name()).collect(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        summaries: Vec::new(),
        config: c,
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

fn cmd_run(args: &ScenarioArgs, out: &mut dyn Write) -> Result<()> {
    let config = args.apply(resolve_config(&args.config)?);
    let report = validate_scenario(&config);
    if !report.is_empty() {
        return Err(Error::Config(report.to_string()));
    }
    let mut reports = Vec::with_capacity(config.strategies.len());
    for &s in &config.strategies {
        reports.push(run_scenario(&config, config.seed, s)?);
    }
    let mut csv = Vec::new();
    write_transcript_csv(&reports, &mut csv)?;
    let mut m = manifest("run", &config, &["transcript.csv"]);
    m.summaries = reports.iter().map(|r| r.summary()).collect();
    let mut set = OutputSet::new(&args.out)?;
    set.write("transcript.csv", &csv)?;
    set.write("manifest.json", &to_json(&m)?)?;
    set.commit();
    for s in &m.summaries {
        writeln!(
            out,
            "{:<20} total {:.6e} J  intra {:.6e} J  inter {:.6e} J  accesses {}",
            s.strategy.name(),
            s.total_j,
            s.intra_j,
            s.inter_j,
            s.accesses
        )
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    Ok(())
}

fn cmd_sweep(
    figure: Option<&str>,
    args: &ScenarioArgs,
    seeds: Option<usize>,
    sequential: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let base = match figure {
        Some(f) => bundled(f)?,
        None => resolve_config(&args.config)?,
    };
    let mut config = args.apply(base);
    if let Some(n) = seeds {
        config.seeds = n;
    }
    let execution = if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = run_sweep(&config, execution)?;
    let name = format!("{}.csv", config.name);
    let mut csv = Vec::new();
    write_sweep_csv(&result, &mut csv)?;
    let m = manifest("sweep", &config, &[&name]);
    let mut set = OutputSet::new(&args.out)?;
    set.write(&name, &csv)?;
    set.write("manifest.json", &to_json(&m)?)?;
    let written = set.commit();
    writeln!(out, "wrote {}", written[0].display()).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// Run a parsed command; returns the process exit status.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let res = match &cli.command {
        Command::Run(args) => cmd_run(args, out),
        Command::Sweep {
            figure,
            scenario,
            seeds,
            sequential,
        } => cmd_sweep(figure.as_deref(), scenario, *seeds, *sequential, out),
        Command::Oracle { instances, seed } => {
            let r = run_oracle_suite(*instances, *seed, Execution::Parallel);
            let _ = writeln!(
                out,
                "instances {}  tap gap {:.3e}  time-step gap {:.3e}  power gap {:.3e} W  slope gap {:.3e}  failures {}",
                r.instances,
                r.tap_max_rel_gap,
                r.time_step_max_rel_gap,
                r.power_max_abs_gap_w,
                r.slope_max_rel_gap,
                r.failures
            );
            if r.passed() {
                Ok(())
            } else {
                Err(Error::NumericalFailure(format!(
                    "{} oracle checks failed",
                    r.failures
                )))
            }
        }
        Command::Validate { config } => {
            let path = Path::new(config);
            let parsed = if path.exists() {
                std::fs::read_to_string(path)
                    .map_err(|e| Error::Io(e.to_string()))
                    .and_then(|t| ScenarioConfig::from_json(&t))
            } else {
                resolve_config(config)
            };
            parsed.and_then(|c| {
                let r = validate_scenario(&c);
                if r.is_empty() {
                    let _ = writeln!(out, "ok {}", c.digest());
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "{} violation(s)\n{r}",
                        r.violations.len()
                    )))
                }
            })
        }
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

/// Parse `args` and run; usage errors exit with status 2.
pub fn run_command<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => ExitCode::from(execute(cli, &mut std::io::stdout(), &mut std::io::stderr())),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_OK)
            }
        }
    }
}
