//! Driver for the `spt` binary: config parsing, commands and the
//! verification suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod suite;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{cmd_backtest, cmd_generate_panel, cmd_report, cmd_simulate, cmd_verify, print_checks, report_path};
use crate::config::{CommandKind, Overrides, RunConfig};
pub use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SPT_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "spt", version, about = "Functionally generated portfolios: simulate, verify, backtest")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides the config and the environment).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Simulation step override.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Path count override.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate market paths.
    Simulate,
    /// Run the property suite; exits 1 on any failed check.
    Verify,
    /// Backtest the configured strategies on a panel.
    Backtest,
    /// Print the tables of an existing report.
    Report {
        /// report.json to render; defaults to the one in the output directory.
        input: Option<PathBuf>,
    },
    /// Write the synthetic panel CSVs.
    GeneratePanel,
}

impl Command {
    fn kind(&self) -> CommandKind {
        match self {
            Command::Simulate => CommandKind::Simulate,
            Command::Verify => CommandKind::Verify,
            Command::Backtest => CommandKind::Backtest,
            Command::Report { .. } => CommandKind::Report,
            Command::GeneratePanel => CommandKind::GeneratePanel,
        }
    }

    fn from_kind(kind: CommandKind) -> Self {
        match kind {
            CommandKind::Simulate => Command::Simulate,
            CommandKind::Verify => Command::Verify,
            CommandKind::Backtest => Command::Backtest,
            CommandKind::Report => Command::Report { input: None },
            CommandKind::GeneratePanel => Command::GeneratePanel,
        }
    }
}

fn default_out(kind: CommandKind) -> PathBuf {
    let base = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from);
    match kind {
        CommandKind::Simulate => base.join("simulate"),
        CommandKind::Verify => base.join("verify"),
        CommandKind::Backtest | CommandKind::Report => base.join("backtest"),
        CommandKind::GeneratePanel => PathBuf::from("data/synthetic"),
    }
}

/// Runs one invocation, writing human-readable progress to `log`.
pub fn run(cli: Cli, log: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        out_dir: cli.out.clone(),
        dt: cli.dt,
        paths: cli.paths,
    });
    let command = match cli.command.or(cfg.command.map(Command::from_kind)) {
        Some(c) => c,
        None => return Err(CliError::Config("no command given on the command line or in the config".into())),
    };
    cfg.validate()?;
    let out = cfg.out_dir_or(&default_out(command.kind()));

    let pool = cfg
        .threads
        .map(|k| rayon::ThreadPoolBuilder::new().num_threads(k).build())
        .transpose()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let mut body = || dispatch(&command, &cfg, &out, log);
    match pool {
        Some(p) => p.install(body),
        None => body(),
    }
}

fn say(log: &mut (dyn Write + Send), msg: std::fmt::Arguments) {
    // Progress lines are best effort.
    let _ = log.write_fmt(msg);
    let _ = log.write_all(b"\n");
}

fn dispatch(command: &Command, cfg: &RunConfig, out: &std::path::Path, log: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match command {
        Command::Simulate => {
            let s = cmd_simulate(cfg, out)?;
            say(
                log,
                format_args!(
                    "{} paths to {}: mean excess growth {:.4}, min weight {:.3e}, {} clamp events",
                    s.paths.len(),
                    out.display(),
                    s.mean_excess_growth,
                    s.min_weight,
                    s.clamp_events
                ),
            );
        }
        Command::Verify => {
            let report = cmd_verify(cfg, out)?;
            let _ = print_checks(&report, &mut *log);
            let failed = report.failed();
            if failed > 0 {
                return Err(CliError::VerificationFailed { failed });
            }
            say(log, format_args!("all {} checks passed; details in {}", report.checks.len(), out.display()));
        }
        Command::Backtest => {
            let (doc, paths) = cmd_backtest(cfg, out)?;
            say(log, format_args!("{}", spt_core::data_io::render_tables(&doc)));
            say(log, format_args!("wrote {}", paths.json.display()));
        }
        Command::Report { input } => {
            let path = input.clone().unwrap_or_else(|| report_path(out));
            say(log, format_args!("{}", cmd_report(&path)?));
        }
        Command::GeneratePanel => {
            let files = cmd_generate_panel(cfg, out)?;
            say(log, format_args!("panel written to {}", files.prices.parent().unwrap_or(out).display()));
        }
    }
    Ok(())
}
