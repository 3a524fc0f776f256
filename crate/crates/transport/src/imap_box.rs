use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use maildust_core::envelope::SUBJECT_MARKER;
use maildust_core::fabric::{parse_raw_mail, MailError, Mailbox, ReceivedMail};

/// Reads token mails over plain IMAP. Fetches use BODY.PEEK so nothing is
/// marked as seen.
#[derive(Debug, Clone)]
pub struct ImapMailbox {
    address: String,
    host: String,
    port: u16,
    username: String,
    password: String,
    folder: String,
    timeout: Duration,
}

impl ImapMailbox {
    pub fn new(
        address: impl Into<String>,
        host: impl Into<String>,
        port: u16,
        username: impl Into<String>,
        password: impl Into<String>,
    ) -> Self {
        ImapMailbox {
            address: address.into(),
            host: host.into(),
            port,
            username: username.into(),
            password: password.into(),
            folder: "INBOX".into(),
            timeout: Duration::from_secs(30),
        }
    }

    pub fn folder(mut self, folder: impl Into<String>) -> Self {
        self.folder = folder.into();
        self
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn connect(&self) -> Result<TcpStream, String> {
        let addr = (self.host.as_str(), self.port)
            .to_socket_addrs()
            .map_err(|e| e.to_string())?
            .next()
            .ok_or_else(|| format!("{} does not resolve", self.host))?;
        let stream = TcpStream::connect_timeout(&addr, self.timeout).map_err(|e| e.to_string())?;
        stream.set_read_timeout(Some(self.timeout)).map_err(|e| e.to_string())?;
        stream.set_write_timeout(Some(self.timeout)).map_err(|e| e.to_string())?;
        Ok(stream)
    }

    fn fetch(&self) -> Result<Vec<ReceivedMail>, String> {
        let mut client = imap::Client::new(self.connect()?);
        client.read_greeting().map_err(|e| e.to_string())?;
        let mut session = client
            .login(&self.username, &self.password)
            .map_err(|(e, _)| format!("login failed: {e}"))?;
        session.select(&self.folder).map_err(|e| e.to_string())?;

        let mut seqs: Vec<u32> = session
            .search(format!("SUBJECT \"{SUBJECT_MARKER}\""))
            .map_err(|e| e.to_string())?
            .into_iter()
            .collect();
        seqs.sort_unstable();
        let mut mails = Vec::new();
        if !seqs.is_empty() {
            let set = seqs.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
            let fetches = session
                .fetch(set, "(BODY.PEEK[] INTERNALDATE)")
                .map_err(|e| e.to_string())?;
            for fetch in fetches.iter() {
                let Some(raw) = fetch.body() else { continue };
                // arrival second first, sequence number breaks ties
                let stamp = fetch
                    .internal_date()
                    .map_or(0, |d| d.timestamp().max(0) as u64);
                let received = stamp * 1_000_000 + u64::from(fetch.message);
                if let Some(mail) = parse_raw_mail(raw, received) {
                    mails.push(mail);
                }
            }
        }
        if let Err(e) = session.logout() {
            log::debug!("imap logout from {}: {e}", self.host);
        }
        Ok(mails)
    }
}

impl Mailbox for ImapMailbox {
    fn address(&self) -> &str {
        &self.address
    }

    fn fetch_messages(&self) -> Result<Vec<ReceivedMail>, MailError> {
        self.fetch().map_err(|reason| MailError::MailboxUnreachable {
            address: self.address.clone(),
            reason,
        })
    }
}
