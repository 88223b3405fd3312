use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dfs_teleport::experiments::{execute, exit_code, Invocation, Overrides, MIN_FIGURE_POINTS};
use dfs_teleport::protocol::{Convention, Strategy};

#[derive(Parser)]
#[command(
    name = "dfs-teleport",
    version,
    about = "Teleportation through a decoherence-free subspace"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, global = true, value_enum)]
    convention: Option<ConventionArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Full protocol report as JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Regenerate table 1, 2 or 3 as CSV.
    Table {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
    },
    /// Fidelity curve of figure 2 or 3, panel a-d, as CSV.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(2..=3))]
        which: u8,
        panel: char,
        #[arg(long, default_value_t = MIN_FIGURE_POINTS + 1)]
        points: usize,
    },
    /// Best measurement instant in the configured window, as JSON.
    Optimize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Average fidelity over a grid of measurement instants, as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    RetainPsi,
    RetainAll,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Physical,
    Paper,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let invocation = match cli.command {
        Command::Run { config } => Invocation::Run { config },
        Command::Table { which } => Invocation::Table { which },
        Command::Figure {
            which,
            panel,
            points,
        } => Invocation::Figure {
            which,
            panel,
            points,
        },
        Command::Optimize { config } => Invocation::Optimize { config },
        Command::Sweep { config } => Invocation::Sweep { config },
    };
    let overrides = Overrides {
        seed: cli.seed,
        strategy: cli.strategy.map(|s| match s {
            StrategyArg::RetainPsi => Strategy::RetainPsi,
            StrategyArg::RetainAll => Strategy::RetainAll,
        }),
        convention: cli.convention.map(|c| match c {
            ConventionArg::Physical => Convention::Physical,
            ConventionArg::Paper => Convention::Paper,
        }),
    };

    let artifact = match execute(&invocation, &overrides) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    match cli.out.or(artifact.config_output) {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, &artifact.text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{}", artifact.text),
    }
    ExitCode::SUCCESS
}
