//! Moving token mails: outbound transports, readable mailboxes and the
//! token harvesting that sits on top of them.

mod maildir;
mod sim;

pub use maildir::{parse_raw_mail, MaildirMailbox, MaildirTransport};
pub use sim::{AttackerView, SimMailbox, SimProvider};

use thiserror::Error;

use crate::envelope::{decode_token, parse_token_subject, EnvelopeError, MailMessage, RecoveryId, TokenEnvelope};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MailError {
    #[error("delivery to {to} failed: {reason}")]
    DeliveryFailed { to: String, reason: String },
    #[error("mailbox {address} unreachable: {reason}")]
    MailboxUnreachable { address: String, reason: String },
}

/// Outbound side: hands a message to a mail system.
pub trait MailTransport: Send + Sync {
    fn send(&self, message: &MailMessage) -> Result<(), MailError>;

    /// Withdraws token mails of a recovery that was rolled back, where the
    /// backend allows it. Relayed mail cannot be recalled, so the default
    /// does nothing.
    fn retract(&self, _recovery_id: &RecoveryId) {}
}

impl<T: MailTransport + ?Sized> MailTransport for std::sync::Arc<T> {
    fn send(&self, message: &MailMessage) -> Result<(), MailError> {
        (**self).send(message)
    }

    fn retract(&self, recovery_id: &RecoveryId) {
        (**self).retract(recovery_id)
    }
}

/// A mail as read back from a mailbox.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceivedMail {
    pub subject: String,
    pub body: String,
    /// Arrival ordering key; larger is newer. Only comparable within one backend.
    pub received: u64,
}

/// Inbound side: something that can list the mails in one mailbox.
pub trait Mailbox: Send + Sync {
    fn address(&self) -> &str;
    fn fetch_messages(&self) -> Result<Vec<ReceivedMail>, MailError>;
}

impl<T: Mailbox + ?Sized> Mailbox for Box<T> {
    fn address(&self) -> &str {
        (**self).address()
    }

    fn fetch_messages(&self) -> Result<Vec<ReceivedMail>, MailError> {
        (**self).fetch_messages()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedToken {
    pub envelope: TokenEnvelope,
    pub mailbox: String,
    pub received: u64,
}

/// A token-marked mail that could not be decoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchWarning {
    pub mailbox: String,
    pub subject: String,
    pub error: EnvelopeError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FetchReport {
    /// Newest first.
    pub tokens: Vec<FetchedToken>,
    pub warnings: Vec<FetchWarning>,
}

/// Normalizes transport line endings back to the envelope's LF form.
fn normalize_body(body: &str) -> String {
    let mut text = body.replace("\r\n", "\n");
    let trimmed = text.trim_end_matches('\n').len();
    text.truncate(trimmed);
    text.push('\n');
    text
}

/// Decodes every token mail in `mailbox`, optionally only those of one recovery.
pub fn fetch_tokens(
    mailbox: &dyn Mailbox,
    filter: Option<&RecoveryId>,
) -> Result<FetchReport, MailError> {
    let address = mailbox.address().to_string();
    let mut report = FetchReport::default();
    for mail in mailbox.fetch_messages()? {
        let subject_id = match parse_token_subject(&mail.subject) {
            None => continue,
            Some(parsed) => parsed,
        };
        let warn = |error| FetchWarning {
            mailbox: address.clone(),
            subject: mail.subject.clone(),
            error,
        };
        let subject_id = match subject_id {
            Ok(id) => id,
            Err(e) => {
                report.warnings.push(warn(e));
                continue;
            }
        };
        if filter.is_some_and(|f| *f != subject_id) {
            continue;
        }
        match decode_token(&normalize_body(&mail.body)) {
            Ok(envelope) if envelope.recovery_id != subject_id => {
                report.warnings.push(warn(EnvelopeError::Malformed(
                    "subject and body name different recoveries".into(),
                )));
            }
            Ok(envelope) => report.tokens.push(FetchedToken {
                envelope,
                mailbox: address.clone(),
                received: mail.received,
            }),
            Err(e) => report.warnings.push(warn(e)),
        }
    }
    report.tokens.sort_by_key(|t| std::cmp::Reverse(t.received));
    Ok(report)
}

/// Loose syntactic check for a mailbox address: `local@domain` with a
/// dot-separated domain of letters, digits and hyphens.
pub fn is_valid_address(address: &str) -> bool {
    let Some((local, domain)) = address.rsplit_once('@') else {
        return false;
    };
    let local_ok = !local.is_empty()
        && local.len() <= 64
        && local
            .chars()
            .all(|c| c.is_ascii_graphic() && !matches!(c, '@' | '<' | '>' | '(' | ')' | ',' | ';' | ':' | '\\' | '"' | '[' | ']'));
    let domain_ok = !domain.is_empty()
        && domain.len() <= 253
        && domain.split('.').all(|label| {
            !label.is_empty()
                && label.len() <= 63
                && !label.starts_with('-')
                && !label.ends_with('-')
                && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
        });
    local_ok && domain_ok
}
