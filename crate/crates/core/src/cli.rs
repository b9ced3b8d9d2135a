//! `voisim` command line.
//!
//! Exit codes: 0 success, 1 simulation fault or failed check, 2 usage or
//! configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::batch::{run_batch_with_threads, BatchSummary, Stat};
use crate::error::{ConfigError, SimError};
use crate::export::{export_run, num, write_summary, ExportFormat};
use crate::model::Scenario;
use crate::policy::PolicySpec;
use crate::rng::GENERATOR;
use crate::scenario::{resolve_config, ScenarioConfig};
use crate::sim::{run_once, RunMetrics};
use crate::validation;

pub const OUT_DIR_ENV: &str = "VOISIM_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "voisim-out";

#[derive(Debug, Parser)]
#[command(name = "voisim", version, about = "Value-of-information transmission policies over erasure channels")]
pub struct Cli {
    /// More output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One simulation; writes the trace table (and optionally a plot).
    Run(RunArgs),
    /// Monte-Carlo batch over seeds for one or more policies.
    Batch(BatchArgs),
    /// Paired comparison of two or more policies on common seeds.
    Compare(BatchArgs),
    /// Fast self-checks.
    Validate(ValidateArgs),
    /// Print a scenario document (built-in or file) after validation.
    ShowScenario(ScenarioArg),
}

#[derive(Debug, Args)]
pub struct ScenarioArg {
    /// Built-in scenario name or path to a TOML document.
    #[arg(long, short = 's')]
    pub scenario: String,
}

#[derive(Debug, Args)]
pub struct Common {
    #[command(flatten)]
    pub scenario: ScenarioArg,
    /// Override the horizon N.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Output directory (defaults to the scenario's, then `voisim-out`).
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// voi | periodic:N[:phase] | random:p | always | never
    #[arg(long, short = 'p')]
    pub policy: Option<PolicySpec>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write an SVG trajectory plot.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub common: Common,
    /// Repeatable; replaces the scenario's policy list.
    #[arg(long = "policy", short = 'p')]
    pub policies: Vec<PolicySpec>,
    /// Number of seeds.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// First seed.
    #[arg(long)]
    pub seed_base: Option<u64>,
    /// Worker threads (all cores by default).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Multiplies every check's sample size.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

enum Failure {
    Config(ConfigError),
    Usage(String),
    Fault(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => Failure::Config(c),
            other => Failure::Fault(other.to_string()),
        }
    }
}

/// Runs the command line `args` (program name first), printing to `out` and
/// `err`, and returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Fault(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Run(args) => cmd_run(args, cli.verbose, out),
        Command::Batch(args) => cmd_batch(args, false, cli.verbose, out),
        Command::Compare(args) => cmd_batch(args, true, cli.verbose, out),
        Command::Validate(args) => cmd_validate(args, out),
        Command::ShowScenario(args) => {
            let config = resolve_config(&args.scenario)?;
            config.build()?;
            let _ = write!(out, "{}", config.to_toml());
            Ok(0)
        }
    }
}

fn load(common: &Common) -> Result<(ScenarioConfig, Scenario, PathBuf), Failure> {
    let config = resolve_config(&common.scenario.scenario)?;
    let mut scenario = config.build()?;
    if let Some(n) = common.horizon {
        scenario = scenario.with_horizon(n)?;
    }
    let dir = common
        .out
        .clone()
        .or_else(|| config.output.as_ref().and_then(|o| o.dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    Ok((config, scenario, dir))
}

fn file_stem(scenario: &str, policy: &PolicySpec) -> String {
    let policy: String = policy
        .to_string()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '-' })
        .collect();
    format!("{scenario}_{policy}")
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Fault(format!("cannot create {}: {e}", dir.display())))
}

/// The totals line printed by `run`, with the exported precision.
pub fn run_summary_line(m: &RunMetrics) -> String {
    let mut line = format!("scenario={} policy={} seed={} N={} TX={}", m.scenario, m.policy, m.seed, m.horizon, m.total_transmissions());
    for (l, mse) in m.total_mse.iter().enumerate() {
        line += &format!(" MSE_{}={}", l + 1, num(*mse));
    }
    for (l, pl) in m.losses.iter().enumerate() {
        line += &format!(" PL_{}={pl}", l + 1);
    }
    line += &format!(" PHI={}", num(m.phi));
    line
}

fn cmd_run(args: &RunArgs, verbose: u8, out: &mut dyn Write) -> Result<i32, Failure> {
    let (config, scenario, dir) = load(&args.common)?;
    let policy = match &args.policy {
        Some(p) => p.clone(),
        None => config.policies()?.into_iter().next().unwrap_or_else(PolicySpec::voi),
    };
    let seed = args.seed.unwrap_or_else(|| config.seeds()[0]);
    let metrics = run_once(&scenario, &policy, seed)?;

    create_dir(&dir)?;
    let stem = format!("{}_seed{seed}", file_stem(&scenario.name, &policy));
    let table = dir.join(format!("{stem}.csv"));
    export_run(&metrics, ExportFormat::Table, &table).map_err(|e| Failure::Fault(e.to_string()))?;
    let plot = args.plot || config.output.as_ref().is_some_and(|o| o.plot);
    let _ = writeln!(out, "{}", run_summary_line(&metrics));
    if verbose > 0 {
        let _ = writeln!(out, "rng={GENERATOR} trace={}", table.display());
    }
    if plot {
        let svg = dir.join(format!("{stem}.svg"));
        export_run(&metrics, ExportFormat::Plot, &svg).map_err(|e| Failure::Fault(e.to_string()))?;
        if verbose > 0 {
            let _ = writeln!(out, "plot={}", svg.display());
        }
    }
    Ok(0)
}

fn stat(s: &Stat) -> String {
    match s.std_err {
        Some(se) => format!("{} ± {}", num(s.mean), num(se)),
        None => format!("{} ± n/a", num(s.mean)),
    }
}

fn print_summary(summary: &BatchSummary, out: &mut dyn Write) {
    let _ = writeln!(out, "scenario={} seeds={}", summary.scenario, summary.seeds.len());
    for p in &summary.policies {
        let _ = writeln!(out, "policy {}", p.policy);
        let _ = writeln!(out, "  PHI  {}", stat(&p.phi));
        for (l, s) in p.total_mse.iter().enumerate() {
            let _ = writeln!(out, "  MSE_{} {}", l + 1, stat(s));
        }
        let _ = writeln!(out, "  TX   {}", stat(&p.transmissions));
        for (l, s) in p.losses.iter().enumerate() {
            let _ = writeln!(out, "  PL_{}  {}", l + 1, stat(s));
        }
    }
    for d in &summary.paired {
        let _ = writeln!(out, "paired {} - {}", d.policy, d.reference);
        let t = |s: &Stat| match s.t_statistic() {
            Some(t) => format!("{t:.3}"),
            None => "n/a".into(),
        };
        let _ = writeln!(out, "  dPHI {} t={}", stat(&d.phi), t(&d.phi));
        for (l, s) in d.total_mse.iter().enumerate() {
            let _ = writeln!(out, "  dMSE_{} {} t={}", l + 1, stat(s), t(s));
        }
        let _ = writeln!(out, "  dTX  {} t={}", stat(&d.transmissions), t(&d.transmissions));
    }
}

fn cmd_batch(args: &BatchArgs, compare: bool, verbose: u8, out: &mut dyn Write) -> Result<i32, Failure> {
    let (config, scenario, dir) = load(&args.common)?;
    let policies = if args.policies.is_empty() {
        let from_config = config.policies()?;
        if from_config.is_empty() {
            vec![PolicySpec::voi()]
        } else {
            from_config
        }
    } else {
        args.policies.clone()
    };
    if compare && policies.len() < 2 {
        return Err(Failure::Usage("compare needs at least two policies".into()));
    }
    let mut seeds = config.seeds();
    if args.seeds.is_some() || args.seed_base.is_some() {
        let base = args.seed_base.unwrap_or(seeds[0]);
        let count = args.seeds.unwrap_or(seeds.len());
        seeds = (0..count as u64).map(|i| base + i).collect();
    }
    if seeds.is_empty() {
        return Err(Failure::Usage("seed count must be at least 1".into()));
    }
    let summary = run_batch_with_threads(&scenario, &policies, &seeds, args.threads)?;
    print_summary(&summary, out);

    create_dir(&dir)?;
    let path = dir.join(format!("{}_{}.csv", scenario.name, if compare { "compare" } else { "batch" }));
    write_summary(&summary, &path).map_err(|e| Failure::Fault(e.to_string()))?;
    if verbose > 0 {
        let _ = writeln!(out, "rng={GENERATOR} summary={}", path.display());
    }
    Ok(0)
}

fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    if !(args.scale.is_finite() && args.scale > 0.0) {
        return Err(Failure::Usage(format!("--scale must be positive, got {}", args.scale)));
    }
    let checks = validation::run_all(args.scale);
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        let _ = writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(if ok { 0 } else { 1 })
}
