use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crp_core::harness::{execute, Command, EXIT_INPUT};

#[derive(Parser)]
#[command(name = "crp", version, about = "Online revenue maximization under an inventory constraint")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the hindsight optimum and check its KKT conditions
    Offline(Args),
    /// Run CR-Pursuit under a ratio rule and write the trace
    Run(Args),
    /// Measure total sales across a grid of pursued ratios
    Phi(Args),
    /// Drive baselines with the stopping adversary
    Adversary(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    let (command, args) = match cli.command {
        Cmd::Offline(a) => (Command::Offline, a),
        Cmd::Run(a) => (Command::Run, a),
        Cmd::Phi(a) => (Command::Phi, a),
        Cmd::Adversary(a) => (Command::Adversary, a),
    };
    match execute(command, &args.config, &args.out, args.seed) {
        Ok(report) => {
            print!("{}", crp_core::harness::describe(&report));
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
