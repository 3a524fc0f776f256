//! Line-oriented token envelope carried in the body of a recovery mail.
//!
//! ```text
//! version: 1
//! recovery-id: 6f1c0b9e-0a47-4b55-9d5e-3f1a2c7e8d90
//! index: 1
//! k: 2
//! n: 3
//! payload: Kg==
//! crc32: 1a2b3c4d
//! ```
//!
//! Every line ends in LF, keys appear exactly once and in this order. The
//! CRC-32 covers the bytes of the six preceding lines including their LFs.

use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::sss::Share;

pub const ENVELOPE_VERSION: u32 = 1;
pub const SUBJECT_MARKER: &str = "MAILDUST-TOKEN";

const KEYS: [&str; 7] = ["version", "recovery-id", "index", "k", "n", "payload", "crc32"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvelopeError {
    #[error("malformed envelope: {0}")]
    Malformed(String),
    #[error("checksum mismatch: computed {computed:08x}, envelope says {stated:08x}")]
    ChecksumMismatch { computed: u32, stated: u32 },
    #[error("unsupported envelope version {0}")]
    UnsupportedVersion(u32),
}

fn malformed(msg: impl Into<String>) -> EnvelopeError {
    EnvelopeError::Malformed(msg.into())
}

/// Per-recovery random identifier, rendered as a lowercase hyphenated UUID.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RecoveryId(Uuid);

impl RecoveryId {
    pub fn from_random_bytes(bytes: [u8; 16]) -> Self {
        RecoveryId(uuid::Builder::from_random_bytes(bytes).into_uuid())
    }

    pub fn nil() -> Self {
        RecoveryId(Uuid::nil())
    }

    pub fn as_uuid(&self) -> &Uuid {
        &self.0
    }
}

impl fmt::Display for RecoveryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.hyphenated())
    }
}

impl FromStr for RecoveryId {
    type Err = EnvelopeError;

    /// Only the canonical lowercase hyphenated form is accepted.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let uuid = Uuid::try_parse(s).map_err(|e| malformed(format!("recovery id: {e}")))?;
        if uuid.hyphenated().to_string() != s {
            return Err(malformed("recovery id is not in canonical form"));
        }
        Ok(RecoveryId(uuid))
    }
}

impl TryFrom<String> for RecoveryId {
    type Error = EnvelopeError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<RecoveryId> for String {
    fn from(id: RecoveryId) -> Self {
        id.to_string()
    }
}

/// One share plus the metadata needed to reassemble the secret.
#[derive(Clone, PartialEq, Eq)]
pub struct TokenEnvelope {
    pub version: u32,
    pub recovery_id: RecoveryId,
    pub share_index: u8,
    pub k: u8,
    pub n: u8,
    pub payload: Vec<u8>,
}

impl fmt::Debug for TokenEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TokenEnvelope")
            .field("version", &self.version)
            .field("recovery_id", &self.recovery_id)
            .field("share_index", &self.share_index)
            .field("k", &self.k)
            .field("n", &self.n)
            .field("payload_len", &self.payload.len())
            .finish()
    }
}

impl TokenEnvelope {
    pub fn new(recovery_id: RecoveryId, share: &Share, k: u8, n: u8) -> Self {
        TokenEnvelope {
            version: ENVELOPE_VERSION,
            recovery_id,
            share_index: share.index,
            k,
            n,
            payload: share.payload.clone(),
        }
    }

    pub fn share(&self) -> Share {
        Share {
            index: self.share_index,
            payload: self.payload.clone(),
        }
    }

    fn validate(&self) -> Result<(), EnvelopeError> {
        if self.version != ENVELOPE_VERSION {
            return Err(EnvelopeError::UnsupportedVersion(self.version));
        }
        if self.k == 0 || self.k > self.n {
            return Err(malformed(format!("threshold k={} n={}", self.k, self.n)));
        }
        if self.share_index == 0 || self.share_index > self.n {
            return Err(malformed(format!(
                "index {} outside 1..={}",
                self.share_index, self.n
            )));
        }
        if self.payload.is_empty() {
            return Err(malformed("empty payload"));
        }
        Ok(())
    }

    fn canonical_prefix(&self) -> String {
        format!(
            "version: {}\nrecovery-id: {}\nindex: {}\nk: {}\nn: {}\npayload: {}\n",
            self.version,
            self.recovery_id,
            self.share_index,
            self.k,
            self.n,
            STANDARD.encode(&self.payload)
        )
    }

    pub fn checksum(&self) -> u32 {
        crc32fast::hash(self.canonical_prefix().as_bytes())
    }

    /// Mail subject line that marks a token mail.
    pub fn subject(&self) -> String {
        token_subject(&self.recovery_id)
    }
}

pub fn token_subject(id: &RecoveryId) -> String {
    format!("{SUBJECT_MARKER} {id}")
}

/// Recovery id named by a token subject, `None` if the subject is not a token mail.
pub fn parse_token_subject(subject: &str) -> Option<Result<RecoveryId, EnvelopeError>> {
    let rest = subject.trim().strip_prefix(SUBJECT_MARKER)?;
    let id = rest.strip_prefix(' ')?;
    Some(id.parse())
}

/// Serializes an envelope to its mail body. Panics if the envelope violates
/// its own invariants (k <= n, 1 <= index <= n, non-empty payload).
pub fn encode_token(envelope: &TokenEnvelope) -> String {
    if let Err(e) = envelope.validate() {
        panic!("refusing to encode invalid envelope: {e}");
    }
    let prefix = envelope.canonical_prefix();
    let crc = crc32fast::hash(prefix.as_bytes());
    format!("{prefix}crc32: {crc:08x}\n")
}

fn parse_decimal<T: FromStr>(key: &str, value: &str) -> Result<T, EnvelopeError> {
    let canonical = !value.is_empty()
        && value.bytes().all(|b| b.is_ascii_digit())
        && (value == "0" || !value.starts_with('0'));
    if !canonical {
        return Err(malformed(format!("{key}: not a canonical decimal")));
    }
    value
        .parse()
        .map_err(|_| malformed(format!("{key}: out of range")))
}

/// Parses a mail body produced by [`encode_token`].
pub fn decode_token(body: &str) -> Result<TokenEnvelope, EnvelopeError> {
    let content = body
        .strip_suffix('\n')
        .ok_or_else(|| malformed("body does not end with a newline"))?;

    let mut values: Vec<&str> = Vec::with_capacity(KEYS.len());
    let mut crc_offset = 0;
    let mut offset = 0;
    for (i, line) in content.split('\n').enumerate() {
        let (key, value) = line
            .split_once(": ")
            .ok_or_else(|| malformed(format!("line {} is not `key: value`", i + 1)))?;
        match KEYS.get(i) {
            Some(expected) if *expected == key => {}
            Some(expected) => {
                return Err(if KEYS.contains(&key) {
                    malformed(format!("key `{key}` out of order, expected `{expected}`"))
                } else {
                    malformed(format!("unknown key `{key}`"))
                });
            }
            None => return Err(malformed(format!("unexpected trailing line `{key}`"))),
        }
        if key == "crc32" {
            crc_offset = offset;
        }
        values.push(value);
        offset += line.len() + 1;
    }
    if values.len() != KEYS.len() {
        return Err(malformed(format!("missing key `{}`", KEYS[values.len()])));
    }

    let crc_text = values[6];
    if crc_text.len() != 8 || !crc_text.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return Err(malformed("crc32 must be 8 lowercase hex digits"));
    }
    let stated = u32::from_str_radix(crc_text, 16).expect("validated hex");
    let computed = crc32fast::hash(&body.as_bytes()[..crc_offset]);
    if computed != stated {
        return Err(EnvelopeError::ChecksumMismatch { computed, stated });
    }

    let version: u32 = parse_decimal("version", values[0])?;
    if version != ENVELOPE_VERSION {
        return Err(EnvelopeError::UnsupportedVersion(version));
    }
    let envelope = TokenEnvelope {
        version,
        recovery_id: values[1].parse()?,
        share_index: parse_decimal("index", values[2])?,
        k: parse_decimal("k", values[3])?,
        n: parse_decimal("n", values[4])?,
        payload: STANDARD
            .decode(values[5])
            .map_err(|e| malformed(format!("payload: {e}")))?,
    };
    envelope.validate()?;
    // rejects alternative spellings that the checksum happened to cover
    if envelope.canonical_prefix().len() != crc_offset {
        return Err(malformed("non-canonical field encoding"));
    }
    Ok(envelope)
}

/// An outbound or stored mail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MailMessage {
    pub to: String,
    pub subject: String,
    pub body: String,
}

impl MailMessage {
    pub fn token(to: &str, envelope: &TokenEnvelope) -> Self {
        MailMessage {
            to: to.to_string(),
            subject: envelope.subject(),
            body: encode_token(envelope),
        }
    }
}
