#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

/// One message as accepted by [`SmtpCapture`].
#[derive(Debug, Clone)]
pub struct Captured {
    pub rcpt: Vec<String>,
    /// DATA content as defined by RFC 5321, without the <CRLF>.<CRLF> terminator.
    pub data: Vec<u8>,
}

/// Minimal SMTP server that accepts everything and records each message.
pub struct SmtpCapture {
    pub addr: SocketAddr,
    pub messages: Arc<Mutex<Vec<Captured>>>,
}

impl SmtpCapture {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let messages = Arc::new(Mutex::new(Vec::new()));
        let sink = Arc::clone(&messages);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let sink = Arc::clone(&sink);
                thread::spawn(move || smtp_session(stream, sink));
            }
        });
        SmtpCapture { addr, messages }
    }

    pub fn take(&self) -> Vec<Captured> {
        std::mem::take(&mut *self.messages.lock().unwrap())
    }
}

fn smtp_session(stream: TcpStream, sink: Arc<Mutex<Vec<Captured>>>) {
    let mut out = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    out.write_all(b"220 capture.local ESMTP\r\n").unwrap();
    let mut rcpt = Vec::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let upper = line.to_ascii_uppercase();
        let reply: &[u8] = if upper.starts_with("EHLO") || upper.starts_with("HELO") {
            b"250 capture.local\r\n"
        } else if upper.starts_with("RCPT TO:") {
            rcpt.push(line[8..].trim().trim_matches(['<', '>']).to_string());
            b"250 OK\r\n"
        } else if upper.starts_with("DATA") {
            out.write_all(b"354 end with <CRLF>.<CRLF>\r\n").unwrap();
            let mut data = Vec::new();
            loop {
                let mut raw = Vec::new();
                reader.read_until(b'\n', &mut raw).unwrap();
                if raw == b".\r\n" {
                    break;
                }
                // undo dot-stuffing
                if raw.starts_with(b"..") {
                    raw.remove(0);
                }
                data.extend_from_slice(&raw);
            }
            // the CRLF before the dot belongs to the terminator
            if data.ends_with(b"\r\n") {
                data.truncate(data.len() - 2);
            }
            sink.lock().unwrap().push(Captured {
                rcpt: std::mem::take(&mut rcpt),
                data,
            });
            b"250 queued\r\n"
        } else if upper.starts_with("QUIT") {
            out.write_all(b"221 bye\r\n").unwrap();
            return;
        } else {
            b"250 OK\r\n"
        };
        out.write_all(reply).unwrap();
    }
}

/// A stored message for [`FakeImap`]: raw RFC 5322 bytes and its INTERNALDATE.
#[derive(Debug, Clone)]
pub struct StoredMail {
    pub raw: Vec<u8>,
    pub internal_date: String,
}

/// Just enough IMAP4rev1 for LOGIN, SELECT, SEARCH SUBJECT, FETCH and LOGOUT.
/// Username to password and inbox.
pub type Accounts = Arc<Mutex<HashMap<String, (String, Vec<StoredMail>)>>>;

pub struct FakeImap {
    pub addr: SocketAddr,
    /// username -> (password, inbox)
    pub accounts: Accounts,
}

impl FakeImap {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let accounts = Arc::new(Mutex::new(HashMap::new()));
        let shared = Arc::clone(&accounts);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let shared = Arc::clone(&shared);
                thread::spawn(move || imap_session(stream, shared));
            }
        });
        FakeImap { addr, accounts }
    }

    pub fn add_account(&self, user: &str, password: &str) {
        self.accounts
            .lock()
            .unwrap()
            .insert(user.into(), (password.into(), Vec::new()));
    }

    pub fn deliver(&self, user: &str, raw: &[u8], internal_date: &str) {
        self.accounts
            .lock()
            .unwrap()
            .get_mut(user)
            .expect("unknown account")
            .1
            .push(StoredMail {
                raw: raw.to_vec(),
                internal_date: internal_date.into(),
            });
    }
}

fn unquote(s: &str) -> String {
    s.trim().trim_matches('"').replace("\\\"", "\"").replace("\\\\", "\\")
}

fn subject_of(raw: &[u8]) -> String {
    let text = String::from_utf8_lossy(raw);
    text.lines()
        .take_while(|l| !l.trim().is_empty())
        .find_map(|l| l.strip_prefix("Subject:"))
        .unwrap_or_default()
        .trim()
        .to_string()
}

fn imap_session(stream: TcpStream, accounts: Accounts) {
    let mut out = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    out.write_all(b"* OK fake imap ready\r\n").unwrap();
    let mut user: Option<String> = None;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
        let (cmd, args) = rest.split_once(' ').unwrap_or((rest, ""));
        let mut reply = String::new();
        match cmd.to_ascii_uppercase().as_str() {
            "LOGIN" => {
                let (u, p) = args.split_once("\" \"").unwrap_or(("", ""));
                let (u, p) = (unquote(u), unquote(p));
                let ok = accounts
                    .lock()
                    .unwrap()
                    .get(&u)
                    .is_some_and(|(pw, _)| *pw == p);
                if ok {
                    user = Some(u);
                    reply.push_str(&format!("{tag} OK LOGIN completed\r\n"));
                } else {
                    reply.push_str(&format!("{tag} NO LOGIN failed\r\n"));
                }
            }
            "SELECT" => {
                let count = user
                    .as_ref()
                    .map_or(0, |u| accounts.lock().unwrap()[u].1.len());
                reply.push_str(&format!(
                    "* {count} EXISTS\r\n* 0 RECENT\r\n* FLAGS (\\Seen)\r\n{tag} OK [READ-WRITE] SELECT completed\r\n"
                ));
            }
            "SEARCH" => {
                let needle = args
                    .strip_prefix("SUBJECT ")
                    .map(unquote)
                    .unwrap_or_default();
                let inbox = accounts.lock().unwrap()[user.as_ref().unwrap()].1.clone();
                let hits: Vec<String> = inbox
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| subject_of(&m.raw).contains(&needle))
                    .map(|(i, _)| (i + 1).to_string())
                    .collect();
                reply.push_str(&format!("* SEARCH {}\r\n{tag} OK SEARCH completed\r\n", hits.join(" ")));
            }
            "FETCH" => {
                let (set, _) = args.split_once(' ').unwrap_or((args, ""));
                let inbox = accounts.lock().unwrap()[user.as_ref().unwrap()].1.clone();
                let mut bytes = Vec::new();
                for seq in set.split(',') {
                    let seq: usize = seq.parse().unwrap();
                    let mail = &inbox[seq - 1];
                    bytes.extend_from_slice(
                        format!(
                            "* {seq} FETCH (INTERNALDATE \"{}\" BODY[] {{{}}}\r\n",
                            mail.internal_date,
                            mail.raw.len()
                        )
                        .as_bytes(),
                    );
                    bytes.extend_from_slice(&mail.raw);
                    bytes.extend_from_slice(b")\r\n");
                }
                bytes.extend_from_slice(format!("{tag} OK FETCH completed\r\n").as_bytes());
                out.write_all(&bytes).unwrap();
                continue;
            }
            "LOGOUT" => {
                out.write_all(format!("* BYE\r\n{tag} OK LOGOUT completed\r\n").as_bytes()).unwrap();
                return;
            }
            _ => reply.push_str(&format!("{tag} BAD unknown command\r\n")),
        }
        out.write_all(reply.as_bytes()).unwrap();
    }
}
