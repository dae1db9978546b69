use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adiacont::cli::{report, run, RunOptions};

#[derive(Parser)]
#[command(name = "adiacont", version, about = "Quasi-adiabatic continuation experiments on small spin lattices")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment from a config file.
    Run {
        /// gap-scan, filter-check, projector-check, pt-check, shell-decay,
        /// summability, lr-cone, boundary-diff, evolve-expectation,
        /// truncation-error or exact-transport.
        experiment: String,
        config: PathBuf,
        /// Output directory; overrides ADIACONT_OUT and output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compare every CSV against fixtures in this directory.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Write fresh fixtures before comparing.
        #[arg(long)]
        write_fixtures: bool,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.command {
        Command::Run { experiment, config, out, fixtures, write_fixtures } => {
            let opts = RunOptions { out, fixtures, write_fixtures };
            match run(&experiment, &config, &opts) {
                Ok(summary) => {
                    print!("{}", report(&summary));
                    ExitCode::from(summary.exit_code as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
