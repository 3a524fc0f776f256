use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use maildust_transport::{http, ServerConfig};

#[derive(Parser)]
#[command(name = "maildust-server", version, about = "Account service with threshold password recovery")]
struct Cli {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
}

fn main() -> ExitCode {
    maildust_cli::init_logging();
    let cli = Cli::parse();
    let config = match ServerConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("maildust-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    let server = match config.build_server() {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("maildust-server: {e}");
            return ExitCode::FAILURE;
        }
    };

    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(config.listen).await?;
        log::info!("listening on {}", listener.local_addr()?);
        tokio::select! {
            r = http::serve(listener, server) => r,
            _ = tokio::signal::ctrl_c() => {
                log::info!("shutting down");
                Ok(())
            }
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("maildust-server: {e}");
            ExitCode::FAILURE
        }
    }
}
