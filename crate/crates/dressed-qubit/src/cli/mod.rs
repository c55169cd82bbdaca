//! Command-line front end: configuration handling, experiment dispatch and
//! artifact writing.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O error.

pub mod config;
pub mod experiments;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::{Config, ConfigError};
use experiments::{run_experiment, run_sweep, Curve, Outcome, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Simulator for a continuously driven spin-1 dressed-state qubit.
#[derive(Debug, Parser)]
#[command(name = "dressed-qubit", version, about, long_about = None)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment (default: the `experiment` key, `nv-full`).
    Run {
        /// Experiment name; overrides the `experiment` key.
        experiment: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the configured experiment over `sweep_param` × `sweep_values`
    /// (or replay the lower-bound table when `experiment = lower-bound`).
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Second-order and numerically exact dressed-level shifts.
    Stark {
        #[command(flatten)]
        common: Common,
    },
    /// Search for the drive-robust blue detuning.
    RobustPoint {
        #[command(flatten)]
        common: Common,
    },
    /// Dephasing budget and per-source decay curves.
    Budget {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file (flat `key = value`).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Base seed of the noise streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo trajectories.
    #[arg(long)]
    pub trajectories: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Model tier.
    #[arg(long, value_parser = ["lab", "ip", "dressed"])]
    pub tier: Option<String>,
    /// Also write a plotting script for the produced CSV files.
    #[arg(long)]
    pub emit_plot_script: bool,
}

/// Failure of a command, mapped onto an exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => format!("configuration error: {m}"),
            CliError::Numerical(m) => format!("numerical failure: {m}"),
            CliError::Io(m) => format!("I/O error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        if experiments::is_config_error(&e) {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Builds the effective configuration: defaults, then the file, then
/// `--set` overrides, then dedicated flags.
pub fn effective_config(common: &Common, experiment: Option<&str>) -> Result<Config, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            Config::parse(&text, &path.display().to_string())?
        }
        None => Config::default(),
    };
    for (i, s) in common.set.iter().enumerate() {
        cfg.apply_override(s, &format!("--set #{}", i + 1))?;
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", &seed.to_string(), "--seed")?;
    }
    if let Some(n) = common.trajectories {
        cfg.set("n_trajectories", &n.to_string(), "--trajectories")?;
    }
    if let Some(tier) = &common.tier {
        cfg.set("tier", tier, "--tier")?;
    }
    if let Some(exp) = experiment {
        cfg.set("experiment", exp, "experiment argument")?;
    }
    Ok(cfg)
}

fn csv_text(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Curve CSV (`t_us,p_mean,p_sem`).
pub fn curve_csv(c: &Curve) -> String {
    let header = ["t_us", "p_mean", "p_sem"].map(String::from);
    csv_text(
        &header,
        (0..c.t_us.len()).map(|k| vec![c.t_us[k].to_string(), c.p_mean[k].to_string(), c.p_sem[k].to_string()]),
    )
}

fn table_csv(t: &Table) -> String {
    csv_text(&t.header, t.rows.iter().cloned())
}

/// Summary record: `key: value` lines with tool identity, configuration hash,
/// every effective parameter and the results.
pub fn summary_text(cfg: &Config, command: &str, results: &[(String, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tool: {}", env!("CARGO_PKG_NAME"));
    let _ = writeln!(s, "version: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "command: {command}");
    let _ = writeln!(s, "config_hash: sha256:{}", cfg.hash());
    for (k, v) in cfg.entries() {
        let _ = writeln!(s, "param.{k}: {v}");
    }
    for (k, v) in results {
        let _ = writeln!(s, "{k}: {v}");
    }
    s
}

/// Generic matplotlib script plotting every CSV written by the run.
pub fn plot_script(files: &[String]) -> String {
    let list: String = files.iter().map(|f| format!("    \"{f}\",\n")).collect();
    format!(
        r#"#!/usr/bin/env python3
"""Plot the CSV files of this run: first column against every other column."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
FILES = [
{list}]


def is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


for name in FILES:
    with open(os.path.join(HERE, name), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    columns = [c for c in range(1, len(header)) if header[c] != "p_sem"
               and all(is_number(r[c]) for r in body if r[c] != "")]
    if not body or not columns:
        continue
    x = [float(r[0]) for r in body]
    fig, ax = plt.subplots()
    for c in columns:
        ax.plot(x, [float(r[c]) if r[c] != "" else float("nan") for r in body], label=header[c])
    if "p_sem" in header and "p_mean" in header:
        m, s = header.index("p_mean"), header.index("p_sem")
        lo = [float(r[m]) - float(r[s]) for r in body]
        hi = [float(r[m]) + float(r[s]) for r in body]
        ax.fill_between(x, lo, hi, alpha=0.3, label="±sem")
    ax.set_xlabel(header[0])
    ax.legend()
    fig.savefig(os.path.join(HERE, os.path.splitext(name)[0] + ".png"), dpi=150)
"#
    )
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| io_err(&path, e))
}

fn write_outcome(common: &Common, cfg: &Config, command: &str, outcome: &Outcome, extra: &[Table]) -> Result<(), CliError> {
    fs::create_dir_all(&common.out).map_err(|e| io_err(&common.out, e))?;
    let mut files = Vec::new();
    if let Some(c) = &outcome.curve {
        write_file(&common.out, "curve.csv", &curve_csv(c))?;
        files.push("curve.csv".to_string());
    }
    for t in outcome.tables.iter().chain(extra) {
        write_file(&common.out, &t.file, &table_csv(t))?;
        files.push(t.file.clone());
    }
    let mut results = outcome.results.clone();
    results.push(("files".into(), if files.is_empty() { "-".into() } else { files.join(" ") }));
    write_file(&common.out, "summary.txt", &summary_text(cfg, command, &results))?;
    if common.emit_plot_script {
        write_file(&common.out, "plot.py", &plot_script(&files))?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let (common, command, experiment) = match &cli.command {
        Command::Run { experiment, common } => (common, "run", experiment.as_deref()),
        Command::Sweep { common } => (common, "sweep", None),
        Command::Stark { common } => (common, "stark", Some("stark")),
        Command::RobustPoint { common } => (common, "robust-point", Some("robust-point")),
        Command::Budget { common } => (common, "budget", Some("budget")),
    };
    let cfg = effective_config(common, experiment)?;
    if command == "sweep" && !(cfg.text("sweep_param").is_empty() && cfg.text("experiment") == "lower-bound") {
        let table = run_sweep(&cfg)?;
        let outcome = Outcome {
            results: vec![("rows".into(), table.rows.len().to_string())],
            ..Outcome::default()
        };
        return write_outcome(common, &cfg, command, &outcome, &[table]);
    }
    let outcome = run_experiment(&cfg)?;
    write_outcome(common, &cfg, command, &outcome, &[])?;
    if cfg.bool("require_t2_crossing") && !matches!(outcome.t2, Some(crate::analytics::T2Estimate::Crossing(_))) {
        return Err(CliError::Numerical("no threshold crossing within the simulated horizon".into()));
    }
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
