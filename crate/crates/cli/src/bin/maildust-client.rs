use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maildust_core::client::{self, ClientError};
use maildust_core::envelope::RecoveryId;
use maildust_transport::{verify_login, MailboxesFile, VerifyError};

const EXIT_TRANSPORT: u8 = 3;

#[derive(Parser)]
#[command(name = "maildust-client", version, about = "Rebuild a recovered password from token mails")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect tokens from the configured mailboxes and print the password
    Recover {
        /// TOML file listing the mailboxes
        #[arg(long)]
        mailboxes: PathBuf,
        /// Use this recovery instead of the newest one found
        #[arg(long)]
        recovery_id: Option<RecoveryId>,
        /// Log in with the rebuilt password afterwards
        #[arg(long, requires_all = ["server", "user"])]
        verify: bool,
        #[arg(long)]
        server: Option<String>,
        #[arg(long)]
        user: Option<String>,
    },
}

fn main() -> ExitCode {
    maildust_cli::init_logging();
    // exit 2 means too few tokens here, so usage errors exit 1 instead of clap's 2
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let Command::Recover {
        mailboxes,
        recovery_id,
        verify,
        server,
        user,
    } = cli.command;

    let config = match MailboxesFile::load(&mailboxes).and_then(|f| f.mailbox_config()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("maildust-client: {e}");
            return ExitCode::FAILURE;
        }
    };
    let recovered = match client::recover_password(&config, recovery_id.as_ref()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("maildust-client: {e}");
            if let ClientError::AllMailboxesUnreachable(errors) = &e {
                for err in errors {
                    eprintln!("  {err}");
                }
            }
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    for err in &recovered.unreachable {
        log::warn!("{err}");
    }
    for w in &recovered.warnings {
        log::warn!("{}: unreadable token mail {:?}: {}", w.mailbox, w.subject, w.error);
    }
    log::info!(
        "recovery {} rebuilt from {} tokens (threshold {})",
        recovered.recovery_id,
        recovered.tokens_used,
        recovered.threshold
    );

    if verify {
        let (server, user) = (server.unwrap_or_default(), user.unwrap_or_default());
        match verify_login(&server, &user, &recovered.password) {
            Ok(true) => log::info!("login as {user} succeeded"),
            Ok(false) => {
                eprintln!("maildust-client: {server} rejected the rebuilt password for {user}");
                return ExitCode::FAILURE;
            }
            Err(e @ VerifyError::ServerUnreachable(_)) => {
                eprintln!("maildust-client: {e}");
                return ExitCode::from(EXIT_TRANSPORT);
            }
        }
    }
    println!("{}", recovered.password);
    ExitCode::SUCCESS
}
