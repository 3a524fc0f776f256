//! Network-facing pieces of maildust: SMTP and IMAP mail backends, the
//! TOML config files and the HTTP/JSON API.

pub mod config;
pub mod http;
mod imap_box;
mod smtp;
pub mod verify;

pub use config::{ConfigError, MailBackend, MailboxEntry, MailboxesFile, ServerConfig};
pub use imap_box::ImapMailbox;
pub use smtp::{SmtpMailTransport, SmtpSettings};
pub use verify::{verify_login, VerifyError};
