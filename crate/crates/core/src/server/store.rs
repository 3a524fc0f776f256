//! User and recovery persistence.
//!
//! `LogStore` appends one JSON record per line and keeps an in-memory index.
//! A recovery commit (new hash plus new event) is a single line, so a crash
//! leaves either the whole commit or none of it. A torn final line is
//! discarded on open.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::RecoveryId;
use crate::password::PasswordHashRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub username: String,
    pub hash: PasswordHashRecord,
    pub recovery_addresses: Vec<String>,
    pub threshold: u8,
    pub created_at: u64,
    pub updated_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecoveryStatus {
    Active,
    Superseded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryEvent {
    pub recovery_id: RecoveryId,
    pub username: String,
    pub n: u8,
    pub k: u8,
    pub issued_at: u64,
    pub status: RecoveryStatus,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("username already registered")]
    DuplicateUsername,
    #[error("unknown user")]
    UnknownUser,
    #[error("storage I/O: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt record on line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

pub trait UserStore: Send + Sync {
    fn user(&self, username: &str) -> Option<UserRecord>;

    fn insert_user(&self, record: UserRecord) -> Result<(), StoreError>;

    /// Atomically replaces the user's hash, supersedes every earlier active
    /// recovery and records `event` as the active one.
    fn commit_recovery(
        &self,
        username: &str,
        hash: PasswordHashRecord,
        event: RecoveryEvent,
    ) -> Result<(), StoreError>;

    /// All recoveries for a user, oldest first.
    fn recovery_events(&self, username: &str) -> Vec<RecoveryEvent>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum LogRecord {
    Register {
        user: UserRecord,
    },
    Recovery {
        username: String,
        hash: PasswordHashRecord,
        event: RecoveryEvent,
    },
}

#[derive(Debug, Default)]
struct Index {
    users: HashMap<String, UserRecord>,
    events: HashMap<String, Vec<RecoveryEvent>>,
}

impl Index {
    fn check(&self, record: &LogRecord) -> Result<(), StoreError> {
        match record {
            LogRecord::Register { user } if self.users.contains_key(&user.username) => {
                Err(StoreError::DuplicateUsername)
            }
            LogRecord::Recovery { username, .. } if !self.users.contains_key(username) => {
                Err(StoreError::UnknownUser)
            }
            _ => Ok(()),
        }
    }

    fn apply(&mut self, record: LogRecord) {
        match record {
            LogRecord::Register { user } => {
                self.users.insert(user.username.clone(), user);
            }
            LogRecord::Recovery {
                username,
                hash,
                mut event,
            } => {
                if let Some(user) = self.users.get_mut(&username) {
                    user.hash = hash;
                    user.updated_at = event.issued_at;
                }
                let events = self.events.entry(username).or_default();
                for prior in events.iter_mut() {
                    prior.status = RecoveryStatus::Superseded;
                }
                event.status = RecoveryStatus::Active;
                events.push(event);
            }
        }
    }
}

/// Volatile store, for tests and the browser demo.
#[derive(Debug, Default)]
pub struct MemoryStore {
    index: RwLock<Index>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn write(&self, record: LogRecord) -> Result<(), StoreError> {
        let mut index = self.index.write().unwrap_or_else(|e| e.into_inner());
        index.check(&record)?;
        index.apply(record);
        Ok(())
    }
}

impl UserStore for MemoryStore {
    fn user(&self, username: &str) -> Option<UserRecord> {
        let index = self.index.read().unwrap_or_else(|e| e.into_inner());
        index.users.get(username).cloned()
    }

    fn insert_user(&self, record: UserRecord) -> Result<(), StoreError> {
        self.write(LogRecord::Register { user: record })
    }

    fn commit_recovery(
        &self,
        username: &str,
        hash: PasswordHashRecord,
        event: RecoveryEvent,
    ) -> Result<(), StoreError> {
        self.write(LogRecord::Recovery {
            username: username.to_string(),
            hash,
            event,
        })
    }

    fn recovery_events(&self, username: &str) -> Vec<RecoveryEvent> {
        let index = self.index.read().unwrap_or_else(|e| e.into_inner());
        index.events.get(username).cloned().unwrap_or_default()
    }
}

/// Append-only JSON-lines store.
#[derive(Debug)]
pub struct LogStore {
    path: PathBuf,
    index: RwLock<Index>,
    file: Mutex<File>,
    torn_write: Mutex<Option<usize>>,
}

impl LogStore {
    /// Opens (or creates) the log at `path` and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw)?;

        // bytes after the last newline belong to an interrupted append
        let complete = raw.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        if complete < raw.len() {
            log::warn!(
                "discarding {} bytes of torn record at end of {}",
                raw.len() - complete,
                path.display()
            );
            file.set_len(complete as u64)?;
        }
        file.seek(SeekFrom::End(0))?;

        let mut index = Index::default();
        for (i, line) in raw[..complete].split(|&b| b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let record: LogRecord = serde_json::from_slice(line).map_err(|e| StoreError::Corrupt {
                line: i + 1,
                reason: e.to_string(),
            })?;
            index.check(&record).map_err(|e| StoreError::Corrupt {
                line: i + 1,
                reason: e.to_string(),
            })?;
            index.apply(record);
        }

        Ok(LogStore {
            path,
            index: RwLock::new(index),
            file: Mutex::new(file),
            torn_write: Mutex::new(None),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Crash-testing hook: the next append writes only its first
    /// `keep_bytes` bytes and then fails as if the process had died.
    pub fn inject_torn_write(&self, keep_bytes: usize) {
        *self.torn_write.lock().unwrap_or_else(|e| e.into_inner()) = Some(keep_bytes);
    }

    fn append(&self, record: LogRecord) -> Result<(), StoreError> {
        let mut index = self.index.write().unwrap_or_else(|e| e.into_inner());
        index.check(&record)?;

        let mut line = serde_json::to_vec(&record).expect("log records serialize");
        line.push(b'\n');

        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        let torn = self.torn_write.lock().unwrap_or_else(|e| e.into_inner()).take();
        if let Some(keep) = torn {
            file.write_all(&line[..keep.min(line.len() - 1)])?;
            file.sync_data()?;
            return Err(StoreError::Io(io::Error::other("injected crash during append")));
        }
        file.write_all(&line)?;
        file.sync_data()?;

        index.apply(record);
        Ok(())
    }
}

impl UserStore for LogStore {
    fn user(&self, username: &str) -> Option<UserRecord> {
        let index = self.index.read().unwrap_or_else(|e| e.into_inner());
        index.users.get(username).cloned()
    }

    fn insert_user(&self, record: UserRecord) -> Result<(), StoreError> {
        self.append(LogRecord::Register { user: record })
    }

    fn commit_recovery(
        &self,
        username: &str,
        hash: PasswordHashRecord,
        event: RecoveryEvent,
    ) -> Result<(), StoreError> {
        self.append(LogRecord::Recovery {
            username: username.to_string(),
            hash,
            event,
        })
    }

    fn recovery_events(&self, username: &str) -> Vec<RecoveryEvent> {
        let index = self.index.read().unwrap_or_else(|e| e.into_inner());
        index.events.get(username).cloned().unwrap_or_default()
    }
}
