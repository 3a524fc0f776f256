use std::time::Duration;

use lettre::message::header::{ContentTransferEncoding, ContentType};
use lettre::message::{Body, Mailbox as Address};
use lettre::transport::smtp::authentication::Credentials;
use lettre::{Message, SmtpTransport, Transport};
use maildust_core::envelope::{MailMessage, RecoveryId};
use maildust_core::fabric::{MailError, MailTransport};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmtpSettings {
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    /// Envelope and header sender.
    pub from: String,
    pub username: Option<String>,
    pub password: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_port() -> u16 {
    25
}

fn default_timeout() -> u64 {
    30
}

/// Plain SMTP submission; TLS is expected to be handled by the relay in front.
pub struct SmtpMailTransport {
    from: Address,
    relay: SmtpTransport,
}

impl SmtpMailTransport {
    pub fn new(settings: &SmtpSettings) -> Result<Self, MailError> {
        let from = settings.from.parse::<Address>().map_err(|e| MailError::DeliveryFailed {
            to: String::new(),
            reason: format!("invalid sender {:?}: {e}", settings.from),
        })?;
        let mut builder = SmtpTransport::builder_dangerous(&settings.host)
            .port(settings.port)
            .timeout(Some(Duration::from_secs(settings.timeout_secs)));
        if let (Some(user), Some(pass)) = (&settings.username, &settings.password) {
            builder = builder.credentials(Credentials::new(user.clone(), pass.clone()));
        }
        Ok(SmtpMailTransport {
            from,
            relay: builder.build(),
        })
    }

    fn build(&self, message: &MailMessage) -> Result<Message, String> {
        let to = message
            .to
            .parse::<Address>()
            .map_err(|e| format!("invalid recipient: {e}"))?;
        let body = Body::new_with_encoding(message.body.clone(), ContentTransferEncoding::SevenBit)
            .map_err(|_| "body is not 7-bit clean".to_string())?;
        Message::builder()
            .from(self.from.clone())
            .to(to)
            .subject(&message.subject)
            .header(ContentType::TEXT_PLAIN)
            .body(body)
            .map_err(|e| e.to_string())
    }
}

impl MailTransport for SmtpMailTransport {
    fn send(&self, message: &MailMessage) -> Result<(), MailError> {
        let failed = |reason: String| MailError::DeliveryFailed {
            to: message.to.clone(),
            reason,
        };
        let email = self.build(message).map_err(failed)?;
        self.relay.send(&email).map_err(|e| failed(e.to_string()))?;
        Ok(())
    }

    fn retract(&self, recovery_id: &RecoveryId) {
        log::warn!("cannot retract SMTP mails already sent for recovery {recovery_id}");
    }
}
