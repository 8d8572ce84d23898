use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use gpe2::cli::{exit_code, output_dir, run, Subcommand, EXIT_VALIDATION};
use gpe2::config::parse_with_overrides;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Real ground state by normalized gradient flow
    Groundstate,
    /// Time evolution from the ground state or a Gaussian pair
    Evolve,
    /// Perturb-and-evolve orbital stability sweep
    Stability,
    /// Sharp Gagliardo-Nirenberg constant by shooting and by quotient ascent
    Gnconst,
    /// Compare the real and complex minimization problems
    Equivalence,
    /// Minimize from several random starts and compare the results
    Uniqueness,
    /// Admissibility margins of the parameters
    Check,
    /// Energies along the mass-preserving dilation of a Gaussian pair
    Probe,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Groundstate => Subcommand::Groundstate,
            Command::Evolve => Subcommand::Evolve,
            Command::Stability => Subcommand::Stability,
            Command::Gnconst => Subcommand::Gnconst,
            Command::Equivalence => Subcommand::Equivalence,
            Command::Uniqueness => Subcommand::Uniqueness,
            Command::Check => Subcommand::Check,
            Command::Probe => Subcommand::Probe,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gpe2",
    version,
    about = "Two-component Gross-Pitaevskii laboratory"
)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set model.gamma=2`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Ok(n) = std::env::var("GPE2_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .expect("thread pool is configured once");
            }
            _ => {
                eprintln!("error: GPE2_THREADS must be a positive integer, got `{n}`");
                return ExitCode::from(EXIT_VALIDATION as u8);
            }
        }
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    };
    let config = match parse_with_overrides(&text, &args.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    let out = output_dir(args.out.as_deref(), &config);
    match run(args.command.into(), &config, &out) {
        Ok(outcome) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.result).unwrap_or_default()
            );
            ExitCode::from(outcome.status as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
