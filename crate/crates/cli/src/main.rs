use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use superpose_cli::{catalog_list, parse_config, run, CliError, Status};

#[derive(Parser)]
#[command(name = "superpose", about = "Jump-diffusion SDE / Fokker-Planck experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the built-in problems.
    Catalog,
    /// Print the version.
    Version,
}

fn run_cmd(
    config: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<Status, CliError> {
    let text = std::fs::read_to_string(&config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    if seed.is_some() {
        cfg.master_seed = seed;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    let dir = out
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set 'out'".into()))?;
    let outcome = run(&cfg, &dir)?;
    for c in &outcome.checks {
        println!("{} {} = {:.6e} (threshold {:.6e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    println!("wrote {}", dir.display());
    Ok(outcome.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Catalog => {
            print!("{}", catalog_list());
            ExitCode::SUCCESS
        }
        Command::Version => {
            println!("superpose {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => match run_cmd(config, out, seed, threads) {
            Ok(Status::Pass) => ExitCode::SUCCESS,
            Ok(Status::Fail) => ExitCode::from(1),
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
