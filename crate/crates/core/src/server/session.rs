use std::collections::HashMap;
use std::sync::RwLock;

use rand::RngCore;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    /// 16 random bytes as 32 lowercase hex characters.
    pub token: String,
    pub username: String,
    pub expires_at: u64,
}

#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, SessionToken>>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn issue<R: RngCore + ?Sized>(
        &self,
        username: &str,
        expires_at: u64,
        rng: &mut R,
    ) -> SessionToken {
        let mut raw = [0u8; 16];
        rng.fill_bytes(&mut raw);
        let session = SessionToken {
            token: hex::encode(raw),
            username: username.to_string(),
            expires_at,
        };
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(session.token.clone(), session.clone());
        session
    }

    /// Username behind an unexpired token.
    pub fn lookup(&self, token: &str, now: u64) -> Option<String> {
        let sessions = self.sessions.read().unwrap_or_else(|e| e.into_inner());
        match sessions.get(token) {
            Some(s) if s.expires_at > now => Some(s.username.clone()),
            Some(_) => {
                drop(sessions);
                self.revoke(token);
                None
            }
            None => None,
        }
    }

    /// Removes a token; unknown tokens are a no-op.
    pub fn revoke(&self, token: &str) {
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .remove(token);
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn issue_lookup_expire_revoke() {
        let store = SessionStore::new();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let s = store.issue("alice", 100, &mut rng);
        assert_eq!(s.token.len(), 32);
        assert!(s.token.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
        assert_eq!(store.lookup(&s.token, 99).as_deref(), Some("alice"));
        assert_eq!(store.lookup(&s.token, 100), None);
        assert!(store.is_empty());

        let s = store.issue("alice", 100, &mut rng);
        store.revoke(&s.token);
        store.revoke(&s.token);
        assert_eq!(store.lookup(&s.token, 0), None);
    }
}
