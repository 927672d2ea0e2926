use std::path::PathBuf;
use std::process::ExitCode;

use aurora_cli::{cmd_compare, cmd_eval, cmd_run, CliError, EvalOptions, RunOptions};
use aurora_qd::{Task, Variant};
use clap::{Parser, Subcommand};

/// Quality-diversity experiments on a simulated unicycle robot.
///
/// Exit status: 0 success, 1 configuration or input error, 2 run diverged.
#[derive(Parser)]
#[command(name = "aurora", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write snapshot, metrics and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// AURORA, HC-Nav, HC-Forw, HC-Turn or MeS.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also write SVG scatter plots.
        #[arg(long)]
        plot: bool,
    },
    /// Coverage curves of a snapshot projected into task descriptor spaces.
    Eval {
        snapshot: PathBuf,
        /// Comma-separated subset of nav,forw,turn (default: all in the snapshot).
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        thresholds: usize,
        #[arg(long)]
        plot: bool,
    },
    /// Per-seed total coverage and per-variant median/IQR across run manifests.
    Compare {
        /// Glob matching manifest.json files, e.g. 'runs/*/manifest.json'.
        pattern: String,
        #[arg(long)]
        task: String,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| CliError::Usage(e.to_string()))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            variant,
            threads,
            out_dir,
            plot,
        } => {
            let variant = variant.as_deref().map(parse::<Variant>).transpose()?;
            let manifest = cmd_run(&RunOptions {
                config,
                seed,
                variant,
                threads,
                out_dir,
                plot,
            })?;
            println!(
                "{} seed {}: {} entries after {} iterations ({} evaluations, {:.1}s) -> {}",
                manifest.variant,
                manifest.seed,
                manifest.final_container_size,
                manifest.iterations,
                manifest.evaluations,
                manifest.timings.wall_clock_seconds,
                manifest.config.output_dir.display()
            );
        }
        Command::Eval {
            snapshot,
            tasks,
            out_dir,
            thresholds,
            plot,
        } => {
            let tasks = tasks.iter().map(|t| parse::<Task>(t)).collect::<Result<_, _>>()?;
            let written = cmd_eval(&EvalOptions {
                snapshot,
                tasks,
                out_dir,
                n_thresholds: thresholds,
                plot,
            })?;
            for p in written {
                println!("{}", p.display());
            }
        }
        Command::Compare { pattern, task, out } => {
            let table = cmd_compare(&pattern, parse(&task)?)?;
            let csv = table.to_csv();
            match out {
                Some(path) => std::fs::write(&path, csv).map_err(|source| CliError::Io { path, source })?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aurora: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
