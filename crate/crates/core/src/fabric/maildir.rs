//! Maildir delivery and reading, so a server and a client on one machine
//! can exchange tokens without a mail server.
//!
//! `MaildirTransport` delivers to `<root>/<address>/new/`. A
//! `MaildirMailbox` reads `new/` and `cur/` of a single maildir.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use mailparse::MailHeaderMap;

use super::{is_valid_address, MailError, MailTransport, Mailbox, ReceivedMail};
use crate::envelope::MailMessage;

static DELIVERY_SEQ: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct MaildirTransport {
    root: PathBuf,
}

impl MaildirTransport {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        MaildirTransport { root: root.into() }
    }

    pub fn maildir_for(&self, address: &str) -> PathBuf {
        self.root.join(address.to_ascii_lowercase())
    }
}

fn now_nanos() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
}

impl MailTransport for MaildirTransport {
    fn send(&self, message: &MailMessage) -> Result<(), MailError> {
        let fail = |reason: String| MailError::DeliveryFailed {
            to: message.to.clone(),
            reason,
        };
        if !is_valid_address(&message.to) {
            return Err(fail("invalid address".into()));
        }
        let dir = self.maildir_for(&message.to);
        for sub in ["tmp", "new", "cur"] {
            fs::create_dir_all(dir.join(sub)).map_err(|e| fail(e.to_string()))?;
        }
        let name = format!(
            "{:020}.{}_{}.maildust",
            now_nanos(),
            std::process::id(),
            DELIVERY_SEQ.fetch_add(1, Ordering::Relaxed)
        );
        let text = format!(
            "To: {}\nSubject: {}\nContent-Type: text/plain; charset=us-ascii\n\n{}",
            message.to, message.subject, message.body
        );
        let tmp = dir.join("tmp").join(&name);
        let mut file = fs::File::create(&tmp).map_err(|e| fail(e.to_string()))?;
        file.write_all(text.as_bytes())
            .and_then(|_| file.sync_all())
            .map_err(|e| fail(e.to_string()))?;
        fs::rename(&tmp, dir.join("new").join(&name)).map_err(|e| fail(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct MaildirMailbox {
    address: String,
    path: PathBuf,
}

impl MaildirMailbox {
    pub fn new(address: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        MaildirMailbox {
            address: address.into(),
            path: path.into(),
        }
    }
}

/// Ordering key from the leading timestamp of a maildir file name, falling
/// back to the file's mtime.
fn received_key(path: &Path) -> u64 {
    path.file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.split('.').next())
        .and_then(|stamp| stamp.parse::<u64>().ok())
        .or_else(|| {
            let modified = fs::metadata(path).ok()?.modified().ok()?;
            Some(modified.duration_since(UNIX_EPOCH).ok()?.as_nanos() as u64)
        })
        .unwrap_or(0)
}

/// Subject and decoded body of an RFC 5322 message.
pub fn parse_raw_mail(raw: &[u8], received: u64) -> Option<ReceivedMail> {
    let parsed = mailparse::parse_mail(raw).ok()?;
    let subject = parsed.headers.get_first_value("Subject").unwrap_or_default();
    let body = parsed.get_body().ok()?;
    Some(ReceivedMail {
        subject,
        body,
        received,
    })
}

impl Mailbox for MaildirMailbox {
    fn address(&self) -> &str {
        &self.address
    }

    fn fetch_messages(&self) -> Result<Vec<ReceivedMail>, MailError> {
        let unreachable = |reason: String| MailError::MailboxUnreachable {
            address: self.address.clone(),
            reason,
        };
        if !self.path.join("new").is_dir() && !self.path.join("cur").is_dir() {
            return Err(unreachable(format!("{} is not a maildir", self.path.display())));
        }
        let mut mails = Vec::new();
        for sub in ["new", "cur"] {
            let dir = self.path.join(sub);
            if !dir.is_dir() {
                continue;
            }
            for entry in fs::read_dir(&dir).map_err(|e| unreachable(e.to_string()))? {
                let path = entry.map_err(|e| unreachable(e.to_string()))?.path();
                if !path.is_file() {
                    continue;
                }
                let raw = fs::read(&path).map_err(|e| unreachable(e.to_string()))?;
                if let Some(mail) = parse_raw_mail(&raw, received_key(&path)) {
                    mails.push(mail);
                }
            }
        }
        Ok(mails)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{encode_token, RecoveryId, TokenEnvelope};
    use crate::fabric::fetch_tokens;

    #[test]
    fn deliver_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let transport = MaildirTransport::new(dir.path());
        let envelope = TokenEnvelope {
            version: 1,
            recovery_id: RecoveryId::from_random_bytes([5; 16]),
            share_index: 2,
            k: 2,
            n: 3,
            payload: b"abc".to_vec(),
        };
        transport
            .send(&MailMessage::token("Bob@Example.org", &envelope))
            .unwrap();
        transport
            .send(&MailMessage {
                to: "bob@example.org".into(),
                subject: "unrelated".into(),
                body: "hello\n".into(),
            })
            .unwrap();

        let mailbox = MaildirMailbox::new("bob@example.org", transport.maildir_for("bob@example.org"));
        let mails = mailbox.fetch_messages().unwrap();
        assert_eq!(mails.len(), 2);
        let token_mail = mails.iter().find(|m| m.subject.starts_with("MAILDUST")).unwrap();
        assert_eq!(token_mail.body, encode_token(&envelope));

        let report = fetch_tokens(&mailbox, None).unwrap();
        assert_eq!(report.tokens.len(), 1);
        assert_eq!(report.tokens[0].envelope, envelope);
    }

    #[test]
    fn missing_maildir_is_unreachable() {
        let dir = tempfile::tempdir().unwrap();
        let mailbox = MaildirMailbox::new("x@y.org", dir.path().join("nope"));
        assert!(matches!(
            mailbox.fetch_messages(),
            Err(MailError::MailboxUnreachable { .. })
        ));
    }

    #[test]
    fn invalid_recipient_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let transport = MaildirTransport::new(dir.path());
        let err = transport.send(&MailMessage {
            to: "../escape".into(),
            subject: "s".into(),
            body: "b".into(),
        });
        assert!(matches!(err, Err(MailError::DeliveryFailed { .. })));
    }
}
