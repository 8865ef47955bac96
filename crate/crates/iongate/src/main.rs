use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iongate::compare::{compare, write_comparison};
use iongate::{run, CliError, RunOptions, Scenario, Task};

/// Trapped-ion entangling-gate design: modes, gate design, error sweeps,
/// pulse trains and brute-force validation.
#[derive(Parser)]
#[command(name = "iongate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML, frequencies in Hz)
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: logical cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Figure recipe 1..5, overriding `figure_id`
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    figure: Option<u8>,
}

#[derive(Subcommand)]
enum Command {
    /// Normal-mode frequencies and participations
    Modes(Common),
    /// Single-pulse gate design and error budget
    Design(Common),
    /// Error budget over a sweep, with its optimum
    Sweep(Common),
    /// Multi-pulse gate at a fixed detuning and gate time
    PulseTrain(Common),
    /// Design a gate and integrate the full Hamiltonian
    Oracle(Common),
    /// Sweep plus SVG panels of a figure recipe
    Figure(Common),
    /// Ratios of t_g and eps_total between two result tables (second / first)
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cmd: Command) -> Result<(), CliError> {
    let (task, c) = match cmd {
        Command::Compare { first, second, out } => {
            let cmp = compare(&first, &second)?;
            std::fs::create_dir_all(&out).map_err(anyhow::Error::from)?;
            return write_comparison(&cmp, &out.join("comparison.csv"));
        }
        Command::Modes(c) => (Task::Modes, c),
        Command::Design(c) => (Task::Design, c),
        Command::Sweep(c) => (Task::Sweep, c),
        Command::PulseTrain(c) => (Task::PulseTrain, c),
        Command::Oracle(c) => (Task::Oracle, c),
        Command::Figure(c) => (Task::Figure, c),
    };
    let sc = Scenario::load(&c.scenario)?;
    let opts = RunOptions { out: c.out, jobs: c.jobs, figure: c.figure };
    for f in run(task, &sc, &opts)? {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            match code {
                3 => eprintln!("iongate: numerical failure: {e}"),
                _ => eprintln!("iongate: {e}"),
            }
            ExitCode::from(code)
        }
    }
}
