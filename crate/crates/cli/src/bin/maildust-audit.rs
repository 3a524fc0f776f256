use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use maildust_core::survey::{self, ROBUSTNESS_EXPONENTS};

#[derive(Parser)]
#[command(name = "maildust-audit", version, about = "Summaries of password-recovery survey data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Per-country mechanism counts and vulnerable percentages
    Summarize {
        #[arg(long)]
        input: PathBuf,
        /// Only this country
        #[arg(long)]
        country: Option<String>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Share of generated passwords above 2^10 .. 2^70 combinations
    Robustness {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
}

fn run(cli: Cli) -> Result<String, String> {
    match cli.command {
        Command::Summarize { input, country, format } => {
            let rows = survey::load_survey(&input).map_err(|e| e.to_string())?;
            let mut countries = survey::country_summary(&rows);
            let total = match &country {
                Some(name) => {
                    let found = countries
                        .keys()
                        .find(|c| c.eq_ignore_ascii_case(name))
                        .cloned()
                        .ok_or_else(|| format!("no analyzed sites for country {name:?}"))?;
                    countries.retain(|c, _| *c == found);
                    None
                }
                None => Some(survey::overall_summary(&rows).map_err(|e| e.to_string())?),
            };
            Ok(match format {
                Format::Table => maildust_cli::summary_table(&countries, total.as_ref()),
                Format::Json => {
                    let value = serde_json::json!({ "countries": countries, "total": total });
                    serde_json::to_string_pretty(&value).unwrap() + "\n"
                }
            })
        }
        Command::Robustness { input, format } => {
            let entries = survey::load_robustness(&input).map_err(|e| e.to_string())?;
            let curve = survey::robustness_distribution(&entries, &ROBUSTNESS_EXPONENTS)
                .map_err(|e| e.to_string())?;
            Ok(match format {
                Format::Table => maildust_cli::robustness_table(&ROBUSTNESS_EXPONENTS, &curve),
                Format::Json => {
                    let value: serde_json::Map<String, serde_json::Value> = ROBUSTNESS_EXPONENTS
                        .iter()
                        .zip(&curve)
                        .map(|(e, p)| (format!("2^{e}"), serde_json::json!(p)))
                        .collect();
                    serde_json::to_string_pretty(&value).unwrap() + "\n"
                }
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("maildust-audit: {e}");
            ExitCode::FAILURE
        }
    }
}
