//! The recovery service: registration, login/logout and the threshold
//! recovery pipeline.
//!
//! A recovery generates a fresh password, splits it into one share per
//! registered address, mails every share in a token envelope and only then
//! commits the new salted hash together with the new active recovery event.
//! If any delivery fails nothing is committed and the backend is asked to
//! retract what was already sent.

mod session;
mod store;

pub use session::{SessionStore, SessionToken};
pub use store::{LogStore, MemoryStore, RecoveryEvent, RecoveryStatus, StoreError, UserRecord, UserStore};

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{MailMessage, RecoveryId, TokenEnvelope};
use crate::fabric::{is_valid_address, MailError, MailTransport};
use crate::password::{self, PasswordHashRecord, PasswordPolicy, StrengthClass};
use crate::sss::{self, SharingPolicy, MAX_SHARES};

const LOCK_STRIPES: usize = 64;
const MAX_USERNAME_LEN: usize = 64;

/// Seconds since the Unix epoch.
pub trait Clock: Send + Sync {
    fn now(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    }
}

/// Settable clock for tests and environments without a system time.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start: u64) -> Self {
        ManualClock(AtomicU64::new(start))
    }

    pub fn advance(&self, secs: u64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// Points in the recovery pipeline where a crash can be injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PipelineStep {
    Generated,
    Split,
    /// After the n-th (0-based) token mail went out.
    Dispatched(usize),
    Hashed,
    Committed,
}

/// Test hook consulted at every [`PipelineStep`]. Returning `true` aborts the
/// pipeline on the spot, without any cleanup, as a process crash would.
pub trait FaultInjector: Send + Sync {
    fn crash_at(&self, step: PipelineStep) -> bool;
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("username already registered")]
    DuplicateUsername,
    #[error("invalid username")]
    InvalidUsername,
    #[error("invalid recovery address list: {0}")]
    InvalidAddressList(String),
    #[error("invalid threshold k={k} for {n} addresses")]
    InvalidThreshold { k: usize, n: usize },
    #[error("password is too weak")]
    WeakPassword,
    #[error("authentication failed")]
    AuthenticationFailed,
    #[error("invalid or expired session")]
    InvalidSession,
    #[error("token mail dispatch failed: {0}")]
    MailDispatchFailed(MailError),
    #[error("storage failure: {0}")]
    Storage(StoreError),
    #[error("injected crash at {0:?}")]
    InjectedCrash(PipelineStep),
}

impl ServerError {
    /// Stable machine-readable code used by the HTTP API.
    pub fn code(&self) -> &'static str {
        match self {
            ServerError::DuplicateUsername => "duplicate_username",
            ServerError::InvalidUsername => "invalid_username",
            ServerError::InvalidAddressList(_) => "invalid_address_list",
            ServerError::InvalidThreshold { .. } => "invalid_threshold",
            ServerError::WeakPassword => "weak_password",
            ServerError::AuthenticationFailed => "authentication_failed",
            ServerError::InvalidSession => "invalid_session",
            ServerError::MailDispatchFailed(_) => "mail_dispatch_failed",
            ServerError::Storage(_) | ServerError::InjectedCrash(_) => "internal",
        }
    }
}

impl From<StoreError> for ServerError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::DuplicateUsername => ServerError::DuplicateUsername,
            other => ServerError::Storage(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerSettings {
    pub session_ttl_secs: u64,
    pub password_policy: PasswordPolicy,
}

impl Default for ServerSettings {
    fn default() -> Self {
        ServerSettings {
            session_ttl_secs: 3600,
            password_policy: PasswordPolicy::default(),
        }
    }
}

/// k = n - 1 from three addresses up, otherwise every address is needed.
pub fn default_threshold(n: usize) -> usize {
    if n >= 3 {
        n - 1
    } else {
        n
    }
}

pub struct MaildustServer {
    store: Arc<dyn UserStore>,
    transport: Arc<dyn MailTransport>,
    sessions: SessionStore,
    settings: ServerSettings,
    rng: Mutex<ChaCha20Rng>,
    clock: Arc<dyn Clock>,
    stripes: Vec<Mutex<()>>,
    decoy: PasswordHashRecord,
    faults: Option<Arc<dyn FaultInjector>>,
}

pub struct ServerBuilder {
    store: Arc<dyn UserStore>,
    transport: Arc<dyn MailTransport>,
    settings: ServerSettings,
    seed: Option<u64>,
    clock: Arc<dyn Clock>,
    faults: Option<Arc<dyn FaultInjector>>,
}

impl ServerBuilder {
    pub fn settings(mut self, settings: ServerSettings) -> Self {
        self.settings = settings;
        self
    }

    /// Deterministic randomness; without a seed the generator is seeded from the OS.
    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn faults(mut self, faults: Arc<dyn FaultInjector>) -> Self {
        self.faults = Some(faults);
        self
    }

    pub fn build(self) -> MaildustServer {
        let mut rng = match self.seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::from_entropy(),
        };
        let decoy_password = password::generate(&self.settings.password_policy, &mut rng);
        let decoy = password::hash_password(&decoy_password, &password::new_salt(&mut rng));
        MaildustServer {
            store: self.store,
            transport: self.transport,
            sessions: SessionStore::new(),
            settings: self.settings,
            rng: Mutex::new(rng),
            clock: self.clock,
            stripes: (0..LOCK_STRIPES).map(|_| Mutex::new(())).collect(),
            decoy,
            faults: self.faults,
        }
    }
}

fn validate_username(username: &str) -> Result<(), ServerError> {
    let ok = !username.is_empty()
        && username.len() <= MAX_USERNAME_LEN
        && username.chars().all(|c| !c.is_whitespace() && !c.is_control());
    if ok {
        Ok(())
    } else {
        Err(ServerError::InvalidUsername)
    }
}

fn validate_addresses(addresses: &[String]) -> Result<(), ServerError> {
    if addresses.is_empty() {
        return Err(ServerError::InvalidAddressList("no addresses".into()));
    }
    if addresses.len() > MAX_SHARES {
        return Err(ServerError::InvalidAddressList(format!(
            "at most {MAX_SHARES} addresses"
        )));
    }
    let mut seen = HashSet::new();
    for addr in addresses {
        if !is_valid_address(addr) {
            return Err(ServerError::InvalidAddressList(format!("invalid address {addr:?}")));
        }
        if !seen.insert(addr.to_ascii_lowercase()) {
            return Err(ServerError::InvalidAddressList(format!("duplicate address {addr:?}")));
        }
    }
    Ok(())
}

impl MaildustServer {
    pub fn builder(store: Arc<dyn UserStore>, transport: Arc<dyn MailTransport>) -> ServerBuilder {
        ServerBuilder {
            store,
            transport,
            settings: ServerSettings::default(),
            seed: None,
            clock: Arc::new(SystemClock),
            faults: None,
        }
    }

    pub fn settings(&self) -> &ServerSettings {
        &self.settings
    }

    fn rng(&self) -> MutexGuard<'_, ChaCha20Rng> {
        self.rng.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Serializes every mutation of one username.
    fn user_lock(&self, username: &str) -> MutexGuard<'_, ()> {
        let mut hasher = DefaultHasher::new();
        username.hash(&mut hasher);
        let stripe = (hasher.finish() % LOCK_STRIPES as u64) as usize;
        self.stripes[stripe].lock().unwrap_or_else(|e| e.into_inner())
    }

    fn crash_at(&self, step: PipelineStep) -> Result<(), ServerError> {
        match &self.faults {
            Some(f) if f.crash_at(step) => Err(ServerError::InjectedCrash(step)),
            _ => Ok(()),
        }
    }

    pub fn register(
        &self,
        username: &str,
        password: &str,
        recovery_addresses: &[String],
        k: Option<usize>,
    ) -> Result<UserRecord, ServerError> {
        validate_username(username)?;
        validate_addresses(recovery_addresses)?;
        let n = recovery_addresses.len();
        let k = k.unwrap_or_else(|| default_threshold(n));
        if k < 1 || k > n {
            return Err(ServerError::InvalidThreshold { k, n });
        }
        if password::chosen_password_strength(password) == StrengthClass::Weak {
            return Err(ServerError::WeakPassword);
        }

        let _guard = self.user_lock(username);
        let salt = password::new_salt(&mut *self.rng());
        let now = self.clock.now();
        let record = UserRecord {
            username: username.to_string(),
            hash: password::hash_password(password, &salt),
            recovery_addresses: recovery_addresses.to_vec(),
            threshold: k as u8,
            created_at: now,
            updated_at: now,
        };
        self.store.insert_user(record.clone())?;
        log::info!("registered {username} with {n} recovery addresses, k={k}");
        Ok(record)
    }

    /// Unknown users and wrong passwords fail identically, after the same
    /// hash-and-compare work.
    pub fn login(&self, username: &str, password: &str) -> Result<SessionToken, ServerError> {
        let user = self.store.user(username);
        let record = user.as_ref().map_or(&self.decoy, |u| &u.hash);
        let matches = password::verify_password(password, record);
        if !(matches && user.is_some()) {
            return Err(ServerError::AuthenticationFailed);
        }
        let expires_at = self.clock.now().saturating_add(self.settings.session_ttl_secs);
        Ok(self.sessions.issue(username, expires_at, &mut *self.rng()))
    }

    /// Idempotent.
    pub fn logout(&self, token: &str) {
        self.sessions.revoke(token);
    }

    pub fn session_user(&self, token: &str) -> Result<String, ServerError> {
        self.sessions
            .lookup(token, self.clock.now())
            .ok_or(ServerError::InvalidSession)
    }

    /// Starts a recovery. Succeeds silently for unknown usernames.
    pub fn recover(&self, username: &str) -> Result<(), ServerError> {
        let _guard = self.user_lock(username);
        match self.store.user(username) {
            Some(user) => self.run_recovery(&user),
            None => {
                // same generate/split/hash work, nothing sent or stored
                let mut rng = self.rng();
                let pw = password::generate(&self.settings.password_policy, &mut *rng);
                let policy = SharingPolicy::new(2, 3).expect("static policy");
                let _ = sss::split(pw.as_bytes(), policy, &mut *rng);
                let _ = password::hash_password(&pw, &password::new_salt(&mut *rng));
                Ok(())
            }
        }
    }

    fn run_recovery(&self, user: &UserRecord) -> Result<(), ServerError> {
        let n = user.recovery_addresses.len();
        let k = user.threshold as usize;
        let policy = SharingPolicy::new(k, n).map_err(|_| ServerError::InvalidThreshold { k, n })?;

        let (new_password, shares, recovery_id, salt) = {
            let mut rng = self.rng();
            let new_password = password::generate(&self.settings.password_policy, &mut *rng);
            let shares = sss::split(new_password.as_bytes(), policy, &mut *rng)
                .expect("generated passwords are non-empty");
            let mut id = [0u8; 16];
            rng.fill_bytes(&mut id);
            let salt = password::new_salt(&mut *rng);
            (new_password, shares, RecoveryId::from_random_bytes(id), salt)
        };
        self.crash_at(PipelineStep::Generated)?;
        self.crash_at(PipelineStep::Split)?;

        for (i, (address, share)) in user.recovery_addresses.iter().zip(&shares).enumerate() {
            let envelope = TokenEnvelope::new(recovery_id, share, k as u8, n as u8);
            if let Err(e) = self.transport.send(&MailMessage::token(address, &envelope)) {
                log::warn!("recovery for {} rolled back: {e}", user.username);
                self.transport.retract(&recovery_id);
                return Err(ServerError::MailDispatchFailed(e));
            }
            self.crash_at(PipelineStep::Dispatched(i))?;
        }

        let hash = password::hash_password(&new_password, &salt);
        drop(new_password);
        self.crash_at(PipelineStep::Hashed)?;

        let event = RecoveryEvent {
            recovery_id,
            username: user.username.clone(),
            n: n as u8,
            k: k as u8,
            issued_at: self.clock.now(),
            status: RecoveryStatus::Active,
        };
        if let Err(e) = self.store.commit_recovery(&user.username, hash, event) {
            self.transport.retract(&recovery_id);
            return Err(e.into());
        }
        self.crash_at(PipelineStep::Committed)?;
        log::info!("recovery for {} dispatched to {n} mailboxes", user.username);
        Ok(())
    }

    /// Conventional single-message recovery that mails the new password in
    /// clear to every registered address. Exists only as the comparison
    /// baseline for the attack simulation.
    pub(crate) fn recover_plaintext(&self, username: &str) -> Result<(), ServerError> {
        let _guard = self.user_lock(username);
        let Some(user) = self.store.user(username) else {
            return Ok(());
        };
        let (new_password, id, salt) = {
            let mut rng = self.rng();
            let pw = password::generate(&self.settings.password_policy, &mut *rng);
            let mut id = [0u8; 16];
            rng.fill_bytes(&mut id);
            (pw, RecoveryId::from_random_bytes(id), password::new_salt(&mut *rng))
        };
        for address in &user.recovery_addresses {
            let message = MailMessage {
                to: address.clone(),
                subject: "Your new password".into(),
                body: format!("password: {new_password}\n"),
            };
            self.transport
                .send(&message)
                .map_err(ServerError::MailDispatchFailed)?;
        }
        let event = RecoveryEvent {
            recovery_id: id,
            username: user.username.clone(),
            n: user.recovery_addresses.len() as u8,
            k: 1,
            issued_at: self.clock.now(),
            status: RecoveryStatus::Active,
        };
        self.store
            .commit_recovery(username, password::hash_password(&new_password, &salt), event)?;
        Ok(())
    }

    pub fn user(&self, username: &str) -> Option<UserRecord> {
        self.store.user(username)
    }

    pub fn recovery_events(&self, username: &str) -> Vec<RecoveryEvent> {
        self.store.recovery_events(username)
    }

    pub fn active_recovery(&self, username: &str) -> Option<RecoveryEvent> {
        self.store
            .recovery_events(username)
            .into_iter()
            .find(|e| e.status == RecoveryStatus::Active)
    }
}
