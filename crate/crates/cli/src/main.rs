//! `hsc`: run, sweep, compare and plot haptic shared-control scenarios.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;

#[derive(Debug, Parser)]
#[command(name = "hsc", version, about = "Adaptive haptic shared-control simulator")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override a scenario value, e.g. `--set controller.epsilon=0.2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Suppress the summary printed on standard output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write `<name>.csv`, `<name>.json` and `<name>.metrics.json`.
    Run {
        /// Built-in name or path to a scenario TOML file.
        scenario: String,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        scenario: String,
        /// Dotted key to sweep.
        #[arg(long, default_value = "controller.epsilon")]
        key: String,
        /// Comma-separated values; defaults to the scenario's `[sweep]` table.
        #[arg(long)]
        values: Option<String>,
    },
    /// Run a scenario with adaptive and with fixed automation impedance.
    Compare {
        scenario: String,
        /// Use this scenario as-is for the second run instead of the fixed-impedance copy.
        #[arg(long)]
        baseline: Option<String>,
    },
    /// Render columns of a CSV log as stacked SVG panels.
    Plot {
        /// CSV log written by `run`, `sweep` or `compare`.
        log: PathBuf,
        /// Comma-separated columns for one panel. Repeat for more panels.
        #[arg(long = "panel", required = true)]
        panels: Vec<String>,
        /// Output file name inside `--out` (default: `<log stem>.svg`).
        #[arg(long)]
        output: Option<String>,
        /// Plot title (default: the log file name).
        #[arg(long)]
        title: Option<String>,
    },
    /// List the built-in scenarios.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = commands::Context {
        out: cli.global.out,
        overrides: cli.global.set,
        quiet: cli.global.quiet,
    };
    let result = match cli.command {
        Command::Run { scenario } => commands::run(&ctx, &scenario),
        Command::Sweep { scenario, key, values } => commands::sweep(&ctx, &scenario, &key, values.as_deref()),
        Command::Compare { scenario, baseline } => commands::compare(&ctx, &scenario, baseline.as_deref()),
        Command::Plot {
            log,
            panels,
            output,
            title,
        } => commands::plot(&ctx, &log, &panels, output.as_deref(), title.as_deref()),
        Command::List => commands::list(&ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(Failure::classify(&err))
        }
    }
}
