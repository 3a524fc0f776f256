use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use maildust_core::threat::{self, Scheme};

#[derive(Parser)]
#[command(name = "maildust-threat", version, about = "Attacker tables and mail-provider attack simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Baseline,
    Maildust,
}

#[derive(Subcommand)]
enum Command {
    /// Print the access matrix and both detectability tables
    Matrix,
    /// Compromise some of a victim's mailboxes and trigger a recovery
    Simulate {
        /// Recovery addresses registered by the victim
        #[arg(long)]
        n: usize,
        /// Threshold; defaults to the server's default for n
        #[arg(long)]
        k: Option<usize>,
        /// Mailboxes the attacker can read
        #[arg(long)]
        compromised: usize,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Matrix => {
            print!("{}", maildust_cli::threat_overview());
            ExitCode::SUCCESS
        }
        Command::Simulate { n, k, compromised, scheme, seed } => {
            let k = k.unwrap_or_else(|| maildust_core::server::default_threshold(n));
            let (scheme, name) = match scheme {
                SchemeArg::Baseline => (Scheme::Baseline, "baseline"),
                SchemeArg::Maildust => (Scheme::Maildust, "maildust"),
            };
            match threat::simulate_scenario(n, k, compromised, scheme, seed) {
                Ok(report) => {
                    print!("{}", maildust_cli::attack_summary(n, k, compromised, name, &report));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("maildust-threat: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
