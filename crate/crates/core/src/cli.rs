//! Command-line front end. Data goes to files or stdout, diagnostics to
//! stderr. Exit codes: 0 success, 1 configuration error, 2 I/O error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::experiment::{run_sweep_to_file, Parallelism, Scenario};
use crate::routing::NetworkMode;

pub const THREADS_ENV: &str = "UOAN_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "uoan-sim",
    version,
    about = "Hybrid opto-acoustic underwater network simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML). Built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a setting, e.g. `--set optical.water_type=harbor`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured parameter sweep and write CSV plus manifest.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run one trial and print its record as JSON.
    Trial {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Export the routing graph of one trial as JSON.
    Graph {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Localize the nodes of one trial and print estimates as JSON.
    Localize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Ranging technology; defaults to every configured mode.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<NetworkMode>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without running anything.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_mode(s: &str) -> std::result::Result<NetworkMode, String> {
    match s {
        "optical" => Ok(NetworkMode::Optical),
        "acoustic" => Ok(NetworkMode::Acoustic),
        "hybrid" => Ok(NetworkMode::Hybrid),
        _ => Err(format!("unknown mode `{s}` (optical, acoustic, hybrid)")),
    }
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("experiment.seed={seed}"));
        }
        if let Some(trials) = self.trials {
            overrides.push(format!("experiment.trials={trials}"));
        }
        match &self.config {
            Some(path) => Config::from_file_with_overrides(path, &overrides),
            None => Config::from_toml_with_overrides("", &overrides),
        }
    }
}

/// Reads the worker cap from the environment.
pub fn parallelism_from_env() -> Result<Parallelism> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(Parallelism::Auto),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Parallelism::Threads(n)),
            _ => Err(Error::config(
                THREADS_ENV,
                format!("expected a positive integer, got `{v}`"),
            )),
        },
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct NodeEstimate {
    node: usize,
    truth: [f64; 3],
    estimate: Option<[f64; 3]>,
}

#[derive(Serialize)]
struct LocalizeReport {
    mode: NetworkMode,
    localized_fraction: f64,
    rmse_m: Option<f64>,
    rmse_all_m: f64,
    rounds: usize,
    nodes: Vec<NodeEstimate>,
}

fn dispatch(cmd: Command, stdout: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Sweep { common, out } => {
            let cfg = common.load()?;
            let par = parallelism_from_env()?;
            run_sweep_to_file(&cfg, &out, par)?;
        }
        Command::Trial { common, trial, out } => {
            let cfg = common.load()?;
            let record = Scenario::new(&cfg)?.run_trial(trial)?;
            emit(out.as_deref(), &json(&record)?, stdout)?;
        }
        Command::Graph { common, trial, out } => {
            let cfg = common.load()?;
            let sc = Scenario::new(&cfg)?;
            let dep = sc.deployment(trial)?;
            let g = sc.graph(&dep, cfg.experiment.routing_mode)?;
            let mut text = g.to_json()?;
            text.push('\n');
            emit(out.as_deref(), &text, stdout)?;
        }
        Command::Localize {
            common,
            trial,
            mode,
            out,
        } => {
            let cfg = common.load()?;
            let sc = Scenario::new(&cfg)?;
            let dep = sc.deployment(trial)?;
            let modes = match mode {
                Some(m) => vec![m],
                None => cfg.experiment.localization_modes.clone(),
            };
            let mut reports = Vec::new();
            for m in modes {
                let r = sc.localize(&dep, m, trial)?;
                let nodes = dep
                    .node_positions
                    .iter()
                    .enumerate()
                    .map(|(i, p)| NodeEstimate {
                        node: i,
                        truth: [p.x, p.y, p.z],
                        estimate: r.estimates.get(&i).map(|e| [e.x, e.y, e.z]),
                    })
                    .collect();
                reports.push(LocalizeReport {
                    mode: m,
                    localized_fraction: r.localized_fraction,
                    rmse_m: r.rmse,
                    rmse_all_m: r.rmse_all,
                    rounds: r.rounds,
                    nodes,
                });
            }
            emit(out.as_deref(), &json(&reports)?, stdout)?;
        }
        Command::Validate { common } => {
            let cfg = common.load()?;
            Scenario::new(&cfg)?;
            writeln!(stdout, "ok").map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
