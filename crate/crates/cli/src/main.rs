use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shortcut_forge_cli::compare::compare_runs;
use shortcut_forge_cli::config::{load_config, output_dir};
use shortcut_forge_cli::error::{CliError, EXIT_MISMATCH};
use shortcut_forge_cli::scenario::execute;
use shortcut_forge_cli::sweep::{parse_values, run_all, sweep_configs, thread_cap, write_sweep};

#[derive(Parser)]
#[command(
    name = "shortcut-forge",
    version,
    about = "Run, compare and sweep shortcut-to-adiabaticity scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its time series and summary.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `output.dir` next to the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two run directories column by column.
    Compare { a: PathBuf, b: PathBuf },
    /// Run a scenario once per value of a configuration parameter.
    Sweep {
        config: PathBuf,
        /// Dotted path of the parameter, e.g. `system.delta`.
        #[arg(long)]
        param: String,
        /// Comma-separated values or a JSON array.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let dir = output_dir(&config, &cfg, out.as_deref());
            execute(&cfg)?.write(&dir)?;
            println!("{}", dir.display());
            Ok(0)
        }
        Command::Compare { a, b } => {
            let c = compare_runs(&a, &b)?;
            print!("{}", c.report());
            Ok(if c.passed() { 0 } else { EXIT_MISMATCH as u8 })
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let threads = thread_cap()?;
            let cfg = load_config(&config)?;
            let values = parse_values(&values)?;
            let configs = sweep_configs(&cfg, &param, &values)?;
            let runs = run_all(&configs, threads)?;
            let dir = output_dir(&config, &cfg, out.as_deref());
            write_sweep(&dir, &values, &runs)?;
            println!("{}", dir.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
