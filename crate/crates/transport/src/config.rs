//! TOML configuration for the server and for the client's mailbox list.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use maildust_core::client::MailboxConfig;
use maildust_core::fabric::{Mailbox, MailTransport, MaildirMailbox, MaildirTransport, SimProvider};
use maildust_core::password::StrengthClass;
use maildust_core::server::{LogStore, MaildustServer, MemoryStore, ServerSettings, StoreError, UserStore};
use serde::Deserialize;
use thiserror::Error;

use crate::imap_box::ImapMailbox;
use crate::smtp::{SmtpMailTransport, SmtpSettings};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot open store: {0}")]
    Store(#[from] StoreError),
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum MailBackend {
    Smtp(SmtpSettings),
    /// In-process simulated provider; mail never leaves the server.
    Sim,
    /// Local maildirs, one per recipient address under `root`.
    Maildir { root: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ServerConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    /// Record log; without it users live in memory only.
    pub store_path: Option<PathBuf>,
    #[serde(flatten)]
    pub settings: ServerSettings,
    pub mail: MailBackend,
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ServerConfig = toml::from_str(text)?;
        if config.settings.password_policy.strength() != StrengthClass::Strong {
            return Err(ConfigError::Invalid(
                "password_policy must generate Strong passwords".into(),
            ));
        }
        if config.settings.session_ttl_secs == 0 {
            return Err(ConfigError::Invalid("session_ttl_secs must be positive".into()));
        }
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml(&read(path.as_ref())?)
    }

    pub fn transport(&self) -> Result<Arc<dyn MailTransport>, ConfigError> {
        Ok(match &self.mail {
            MailBackend::Smtp(smtp) => Arc::new(
                SmtpMailTransport::new(smtp).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            ),
            MailBackend::Sim => Arc::new(SimProvider::new()),
            MailBackend::Maildir { root } => Arc::new(MaildirTransport::new(root)),
        })
    }

    pub fn store(&self) -> Result<Arc<dyn UserStore>, ConfigError> {
        Ok(match &self.store_path {
            Some(path) => Arc::new(LogStore::open(path)?),
            None => Arc::new(MemoryStore::new()),
        })
    }

    pub fn build_server(&self) -> Result<MaildustServer, ConfigError> {
        Ok(MaildustServer::builder(self.store()?, self.transport()?)
            .settings(self.settings.clone())
            .build())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase", deny_unknown_fields)]
pub enum MailboxEntry {
    Imap {
        address: String,
        host: String,
        #[serde(default = "default_imap_port")]
        port: u16,
        username: String,
        password: String,
        #[serde(default = "default_folder")]
        folder: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
    Maildir {
        address: String,
        path: PathBuf,
    },
}

fn default_imap_port() -> u16 {
    143
}

fn default_folder() -> String {
    "INBOX".into()
}

fn default_timeout() -> u64 {
    30
}

impl MailboxEntry {
    pub fn address(&self) -> &str {
        match self {
            MailboxEntry::Imap { address, .. } | MailboxEntry::Maildir { address, .. } => address,
        }
    }

    fn open(&self, base: &Path) -> Box<dyn Mailbox> {
        match self {
            MailboxEntry::Imap {
                address,
                host,
                port,
                username,
                password,
                folder,
                timeout_secs,
            } => Box::new(
                ImapMailbox::new(address, host, *port, username, password)
                    .folder(folder)
                    .timeout(Duration::from_secs(*timeout_secs)),
            ),
            MailboxEntry::Maildir { address, path } => {
                Box::new(MaildirMailbox::new(address, base.join(path)))
            }
        }
    }
}

/// The client's list of mailboxes, one `[[mailbox]]` table per address.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MailboxesFile {
    #[serde(rename = "mailbox", default)]
    pub mailboxes: Vec<MailboxEntry>,
    /// Relative maildir paths resolve against this; set to the file's directory by `load`.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl MailboxesFile {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: MailboxesFile = toml::from_str(text)?;
        if file.mailboxes.is_empty() {
            return Err(ConfigError::Invalid("no [[mailbox]] entries".into()));
        }
        let mut seen = HashSet::new();
        for entry in &file.mailboxes {
            if !seen.insert(entry.address().to_ascii_lowercase()) {
                return Err(ConfigError::Invalid(format!(
                    "mailbox {} listed twice",
                    entry.address()
                )));
            }
        }
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let mut file = Self::from_toml(&read(path.as_ref())?)?;
        file.base_dir = path
            .as_ref()
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(file)
    }

    pub fn mailbox_config(&self) -> Result<MailboxConfig, ConfigError> {
        let boxes = self.mailboxes.iter().map(|e| e.open(&self.base_dir)).collect();
        MailboxConfig::new(boxes).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn server_config_with_defaults() {
        let c = ServerConfig::from_toml(
            r#"
            [mail]
            backend = "smtp"
            host = "relay.example"
            from = "noreply@site.example"
            "#,
        )
        .unwrap();
        assert_eq!(c.listen, default_listen());
        assert_eq!(c.settings, ServerSettings::default());
        match c.mail {
            MailBackend::Smtp(s) => {
                assert_eq!(s.port, 25);
                assert_eq!(s.username, None);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn full_server_config() {
        let c = ServerConfig::from_toml(
            r#"
            listen = "0.0.0.0:9000"
            session_ttl_secs = 60
            store_path = "/var/lib/maildust/users.log"

            [password_policy]
            length = 20
            charset = "abcdefghijklmnopqrstuvwxyz0123456789"

            [mail]
            backend = "maildir"
            root = "/srv/mail"
            "#,
        )
        .unwrap();
        assert_eq!(c.listen.port(), 9000);
        assert_eq!(c.settings.session_ttl_secs, 60);
        assert_eq!(c.settings.password_policy.length(), 20);
        assert_eq!(c.mail, MailBackend::Maildir { root: "/srv/mail".into() });
    }

    #[test]
    fn rejects_weak_policy_and_unknown_backend() {
        let weak = r#"
            [password_policy]
            length = 8
            charset = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
            [mail]
            backend = "sim"
        "#;
        assert!(matches!(ServerConfig::from_toml(weak), Err(ConfigError::Invalid(_))));
        let pigeon = "[mail]\nbackend = \"pigeon\"\n";
        assert!(matches!(ServerConfig::from_toml(pigeon), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn mailbox_file() {
        let f = MailboxesFile::from_toml(
            r#"
            [[mailbox]]
            backend = "imap"
            address = "me@one.example"
            host = "imap.one.example"
            username = "me"
            password = "pw"

            [[mailbox]]
            backend = "maildir"
            address = "me@two.example"
            path = "mail/two"
            "#,
        )
        .unwrap();
        assert_eq!(f.mailboxes.len(), 2);
        assert!(matches!(&f.mailboxes[0], MailboxEntry::Imap { port: 143, folder, .. } if folder == "INBOX"));
        assert_eq!(f.mailbox_config().unwrap().entries().len(), 2);
    }

    #[test]
    fn mailbox_file_rejects_duplicates_and_empty() {
        let dup = r#"
            [[mailbox]]
            backend = "maildir"
            address = "a@x.example"
            path = "a"
            [[mailbox]]
            backend = "maildir"
            address = "A@x.example"
            path = "b"
        "#;
        assert!(matches!(MailboxesFile::from_toml(dup), Err(ConfigError::Invalid(_))));
        assert!(matches!(MailboxesFile::from_toml(""), Err(ConfigError::Invalid(_))));
    }
}
