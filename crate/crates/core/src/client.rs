//! Token harvesting and password reconstruction on the user's side.
//!
//! Tokens from every reachable mailbox are grouped by recovery id. The
//! requested group, or else the most recently received one, is reassembled
//! with the threshold carried in the envelopes themselves.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::envelope::{RecoveryId, TokenEnvelope};
use crate::fabric::{fetch_tokens, FetchReport, FetchWarning, FetchedToken, MailError, Mailbox};
use crate::sss::{self, SssError};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid mailbox configuration: {0}")]
    InvalidConfig(String),
    #[error("every mailbox was unreachable")]
    AllMailboxesUnreachable(Vec<MailError>),
    #[error("no recovery tokens found")]
    NoTokensFound,
    #[error("recovery {recovery_id}: gathered {have} of {need} tokens, {} more needed", need - have)]
    InsufficientTokens {
        recovery_id: RecoveryId,
        have: usize,
        need: usize,
    },
    #[error("recovery {0}: tokens disagree on their metadata")]
    ConflictingMetadata(RecoveryId),
    #[error("tokens belong to different recoveries")]
    MixedRecoveries,
    #[error("reconstruction failed: {0}")]
    Reconstruction(#[from] SssError),
    #[error("reconstructed secret is not valid UTF-8")]
    NotUtf8,
}

impl ClientError {
    /// Process exit status for the command-line client.
    pub fn exit_code(&self) -> i32 {
        match self {
            ClientError::InsufficientTokens { .. } | ClientError::NoTokensFound => 2,
            ClientError::AllMailboxesUnreachable(_) => 3,
            _ => 1,
        }
    }
}

/// The mailboxes registered as recovery resources.
pub struct MailboxConfig {
    entries: Vec<Box<dyn Mailbox>>,
}

impl MailboxConfig {
    pub fn new(entries: Vec<Box<dyn Mailbox>>) -> Result<Self, ClientError> {
        if entries.is_empty() {
            return Err(ClientError::InvalidConfig("no mailboxes".into()));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.address().to_ascii_lowercase()) {
                return Err(ClientError::InvalidConfig(format!(
                    "mailbox {} listed twice",
                    e.address()
                )));
            }
        }
        Ok(MailboxConfig { entries })
    }

    pub fn entries(&self) -> &[Box<dyn Mailbox>] {
        &self.entries
    }
}

/// Everything gathered from one pass over the configured mailboxes.
#[derive(Debug, Default)]
pub struct Harvest {
    pub tokens: Vec<FetchedToken>,
    pub warnings: Vec<FetchWarning>,
    pub unreachable: Vec<MailError>,
    pub reachable: usize,
}

pub fn harvest(config: &MailboxConfig, filter: Option<&RecoveryId>) -> Harvest {
    let results: Vec<Result<FetchReport, MailError>> = if cfg!(target_arch = "wasm32") || config.entries.len() == 1 {
        config.entries.iter().map(|m| fetch_tokens(m.as_ref(), filter)).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = config
                .entries
                .iter()
                .map(|m| scope.spawn(move || fetch_tokens(m.as_ref(), filter)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("mailbox fetch panicked"))
                .collect()
        })
    };

    let mut harvest = Harvest::default();
    for result in results {
        match result {
            Ok(report) => {
                harvest.reachable += 1;
                harvest.tokens.extend(report.tokens);
                harvest.warnings.extend(report.warnings);
            }
            Err(e) => harvest.unreachable.push(e),
        }
    }
    harvest.tokens.sort_by_key(|t| std::cmp::Reverse(t.received));
    harvest
}

pub struct RecoveredPassword {
    pub password: String,
    pub recovery_id: RecoveryId,
    pub tokens_used: usize,
    pub threshold: usize,
    pub unreachable: Vec<MailError>,
    pub warnings: Vec<FetchWarning>,
}

impl fmt::Debug for RecoveredPassword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RecoveredPassword")
            .field("password", &"<redacted>")
            .field("recovery_id", &self.recovery_id)
            .field("tokens_used", &self.tokens_used)
            .field("threshold", &self.threshold)
            .field("unreachable", &self.unreachable)
            .field("warnings", &self.warnings)
            .finish()
    }
}

/// Reassembles the secret carried by envelopes of a single recovery.
///
/// Identical duplicates (the same token read twice) are collapsed; two
/// different payloads for one index, or disagreeing k/n, are rejected.
pub fn reconstruct_from_envelopes(envelopes: &[TokenEnvelope]) -> Result<String, ClientError> {
    let first = envelopes.first().ok_or(ClientError::NoTokensFound)?;
    if envelopes.iter().any(|e| e.recovery_id != first.recovery_id) {
        return Err(ClientError::MixedRecoveries);
    }
    let id = first.recovery_id;
    if envelopes.iter().any(|e| e.k != first.k || e.n != first.n) {
        return Err(ClientError::ConflictingMetadata(id));
    }

    let mut by_index: BTreeMap<u8, &TokenEnvelope> = BTreeMap::new();
    for e in envelopes {
        match by_index.get(&e.share_index) {
            Some(existing) if existing.payload != e.payload => {
                return Err(ClientError::ConflictingMetadata(id));
            }
            Some(_) => {}
            None => {
                by_index.insert(e.share_index, e);
            }
        }
    }

    let need = first.k as usize;
    if by_index.len() < need {
        return Err(ClientError::InsufficientTokens {
            recovery_id: id,
            have: by_index.len(),
            need,
        });
    }
    let shares: Vec<_> = by_index.values().map(|e| e.share()).collect();
    let secret = sss::reconstruct(&shares, need)?;
    String::from_utf8(secret).map_err(|_| ClientError::NotUtf8)
}

/// Gathers tokens from every reachable mailbox and rebuilds the password.
pub fn recover_password(
    config: &MailboxConfig,
    recovery_id: Option<&RecoveryId>,
) -> Result<RecoveredPassword, ClientError> {
    let harvest = harvest(config, recovery_id);
    if harvest.reachable == 0 {
        return Err(ClientError::AllMailboxesUnreachable(harvest.unreachable));
    }

    // group by recovery, remembering the newest arrival in each group
    let mut groups: BTreeMap<RecoveryId, (u64, Vec<TokenEnvelope>)> = BTreeMap::new();
    for token in harvest.tokens {
        let group = groups
            .entry(token.envelope.recovery_id)
            .or_insert((0, Vec::new()));
        group.0 = group.0.max(token.received);
        group.1.push(token.envelope);
    }

    let selected = match recovery_id {
        Some(id) => groups.remove(id),
        None => groups
            .into_values()
            .max_by_key(|(newest, _)| *newest),
    };
    let (_, envelopes) = selected.ok_or(ClientError::NoTokensFound)?;

    let password = reconstruct_from_envelopes(&envelopes)?;
    let distinct: HashSet<u8> = envelopes.iter().map(|e| e.share_index).collect();
    Ok(RecoveredPassword {
        password,
        recovery_id: envelopes[0].recovery_id,
        tokens_used: distinct.len(),
        threshold: envelopes[0].k as usize,
        unreachable: harvest.unreachable,
        warnings: harvest.warnings,
    })
}
