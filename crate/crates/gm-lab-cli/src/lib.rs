//! Command-line entry points for the experiment runner.
//!
//! Exit codes are the machine contract: 0 on success, 2 when a
//! theorem-backed bound check failed, 1 on any error. Stdout is
//! human-oriented; results live in the output CSV files.

pub mod config;
pub mod experiments;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use experiments::{run_config_text, Overrides};

#[derive(Parser, Debug)]
#[command(
    name = "gm-lab",
    version,
    about = "Batch experiment runner for the stochastic shadow Gierer-Meinhardt lab"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a flat key=value config file.
    Run {
        /// Path to the config file.
        config: PathBuf,
        /// Replace seeds.master from the config.
        #[arg(long, value_name = "N")]
        seed_override: Option<u64>,
        /// Replace output.dir from the config.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Worker thread count (falls back to GM_LAB_THREADS, then to the
        /// number of cores).
        #[arg(long, value_name = "N")]
        threads: Option<usize>,
    },
}

fn configure_threads(threads: Option<usize>) {
    let from_env = std::env::var("GM_LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = threads.or(from_env) {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized; --threads ignored");
        }
    }
}

/// Parses argv-style arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version through this path with code 0.
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match cli.command {
        Command::Run {
            config,
            seed_override,
            out,
            threads,
        } => {
            configure_threads(threads);
            let text = match std::fs::read_to_string(&config) {
                Ok(text) => text,
                Err(e) => {
                    eprintln!("error: cannot read config {}: {e}", config.display());
                    return 1;
                }
            };
            let overrides = Overrides {
                seed: seed_override,
                out_dir: out,
            };
            match run_config_text(&text, &overrides) {
                Ok(status) => status.exit_code(),
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
    }
}
