//! Attacker taxonomy, access matrix and detectability tables, plus a
//! simulation of a mail-provider attacker against plaintext-mail recovery
//! and threshold recovery.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{self, ClientError, MailboxConfig};
use crate::fabric::{Mailbox, SimProvider};
use crate::gf256::Gf256;
use crate::password::{self, PasswordPolicy};
use crate::server::{MaildustServer, ManualClock, MemoryStore, ServerError};
use crate::sss::{Share, MAX_SHARES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackerKind {
    MailProvider,
    WebServerIntruder,
    ClientIntruder,
    Sniffing,
}

impl AttackerKind {
    pub const ALL: [AttackerKind; 4] = [
        AttackerKind::MailProvider,
        AttackerKind::WebServerIntruder,
        AttackerKind::ClientIntruder,
        AttackerKind::Sniffing,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AttackerKind::MailProvider => "Mail service provider-level",
            AttackerKind::WebServerIntruder => "Web server intruder",
            AttackerKind::ClientIntruder => "Client intruder",
            AttackerKind::Sniffing => "Sniffing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Passive,
    Active,
}

/// The five e-mail based recovery mechanisms, most severe first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecoveryMechanism {
    OldPw,
    NewPw,
    TempPw,
    HttpLink,
    HttpsLink,
}

impl RecoveryMechanism {
    pub const ALL: [RecoveryMechanism; 5] = [
        RecoveryMechanism::OldPw,
        RecoveryMechanism::NewPw,
        RecoveryMechanism::TempPw,
        RecoveryMechanism::HttpLink,
        RecoveryMechanism::HttpsLink,
    ];

    /// Every mechanism except the HTTPS link counts as vulnerable.
    pub fn is_vulnerable(self) -> bool {
        self != RecoveryMechanism::HttpsLink
    }

    pub fn label(self) -> &'static str {
        match self {
            RecoveryMechanism::OldPw => "Old Pw",
            RecoveryMechanism::NewPw => "New Pw",
            RecoveryMechanism::TempPw => "Temp Pw",
            RecoveryMechanism::HttpLink => "HTTP link",
            RecoveryMechanism::HttpsLink => "HTTPS link",
        }
    }
}

impl fmt::Display for RecoveryMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Detectability {
    Undetectable,
    Detectable,
    /// Depends on how the site stores passwords.
    StorageMethod,
    DetectableOrStorageMethod,
    DetectableOrUserBehavior,
    /// Detectable, and the attack gains nothing.
    DetectableUseless,
    /// Detectable, but brute force becomes easier.
    DetectableEasier,
}

impl Detectability {
    pub fn label(self) -> &'static str {
        match self {
            Detectability::Undetectable => "undetectable",
            Detectability::Detectable => "detectable",
            Detectability::StorageMethod => "storage method",
            Detectability::DetectableOrStorageMethod => "detectable / storage method",
            Detectability::DetectableOrUserBehavior => "detectable / user's behavior",
            Detectability::DetectableUseless => "detectable - useless",
            Detectability::DetectableEasier => "detectable - easier",
        }
    }
}

impl fmt::Display for Detectability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Access {
    pub user_emails: bool,
    pub password_db: bool,
    pub recovery_method: bool,
}

pub fn access_matrix(kind: AttackerKind) -> Access {
    let (user_emails, password_db) = match kind {
        AttackerKind::MailProvider => (true, false),
        AttackerKind::WebServerIntruder => (false, true),
        AttackerKind::ClientIntruder => (true, false),
        AttackerKind::Sniffing => (false, false),
    };
    Access {
        user_emails,
        password_db,
        recovery_method: true,
    }
}

pub fn detectability(kind: AttackerKind, mode: Mode, mech: RecoveryMechanism) -> Detectability {
    use AttackerKind::*;
    use Detectability::*;
    use RecoveryMechanism::*;

    // Old Pw reveals the stored password itself: only the active sniffer,
    // who cannot read the mail, gains nothing from it.
    if mech == OldPw {
        return match (kind, mode) {
            (Sniffing, Mode::Active) => DetectableUseless,
            _ => Undetectable,
        };
    }
    match mode {
        Mode::Passive => match kind {
            MailProvider if mech == NewPw => Undetectable,
            MailProvider => Detectable,
            WebServerIntruder => StorageMethod,
            ClientIntruder if mech == NewPw => Undetectable,
            ClientIntruder => DetectableOrUserBehavior,
            Sniffing => Undetectable,
        },
        Mode::Active => match kind {
            MailProvider | ClientIntruder => Detectable,
            WebServerIntruder => DetectableOrStorageMethod,
            Sniffing if matches!(mech, NewPw | TempPw) => DetectableEasier,
            Sniffing => Detectable,
        },
    }
}

/// Plain-text rendering of one synoptic table.
pub fn render_table(mode: Mode) -> String {
    let width = 30;
    let cell = 28;
    let mut header = format!("{:<width$}", "Attacks / Recovery methods");
    for mech in RecoveryMechanism::ALL {
        header.push_str(&format!("| {:<cell$}", mech.label()));
    }
    let mut out = format!("{}\n{}\n", header.trim_end(), "-".repeat(header.trim_end().len()));
    for kind in AttackerKind::ALL {
        let mut row = format!("{:<width$}", kind.label());
        for mech in RecoveryMechanism::ALL {
            row.push_str(&format!("| {:<cell$}", detectability(kind, mode, mech).label()));
        }
        out.push_str(row.trim_end());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// New password mailed in clear to the registered addresses.
    Baseline,
    /// One threshold share per registered address.
    Maildust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    FullCompromise,
    NoInformation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackReport {
    pub outcome: Outcome,
    /// Token or password mails the attacker could read for this recovery.
    pub mails_seen: usize,
    /// Shares needed; 1 for the baseline.
    pub threshold: usize,
    /// Whether the attacker actually logged in with what it gathered.
    pub login_verified: bool,
}

#[derive(Debug, Error)]
pub enum ThreatError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("server refused the recovery: {0}")]
    Server(#[from] ServerError),
    #[error("attacker reconstructed a password that does not log in")]
    ReconstructionRejected,
}

const BASELINE_SUBJECT: &str = "Your new password";

/// An active mail-provider attacker that reads `compromised` triggers a
/// recovery for `username` and tries to take the account over.
pub fn simulate_provider_attack(
    server: &MaildustServer,
    fabric: &SimProvider,
    username: &str,
    compromised: &[String],
    scheme: Scheme,
) -> Result<AttackReport, ThreatError> {
    let user = server
        .user(username)
        .ok_or_else(|| ThreatError::InvalidScenario(format!("unknown user {username}")))?;
    let registered: HashSet<String> = user
        .recovery_addresses
        .iter()
        .map(|a| a.to_ascii_lowercase())
        .collect();
    if let Some(outsider) = compromised
        .iter()
        .find(|a| !registered.contains(&a.to_ascii_lowercase()))
    {
        return Err(ThreatError::InvalidScenario(format!(
            "{outsider} is not a recovery address of {username}"
        )));
    }
    fabric.set_compromised(compromised.iter().map(String::as_str));
    let attacker = fabric.attacker();

    match scheme {
        Scheme::Baseline => {
            server.recover_plaintext(username)?;
            let mails = attacker.fetch_messages().unwrap_or_default();
            let leaked: Vec<&str> = mails
                .iter()
                .filter(|m| m.subject == BASELINE_SUBJECT)
                .filter_map(|m| m.body.trim_end().strip_prefix("password: "))
                .collect();
            let login_verified = leaked.iter().any(|pw| server.login(username, pw).is_ok());
            Ok(AttackReport {
                outcome: if login_verified {
                    Outcome::FullCompromise
                } else {
                    Outcome::NoInformation
                },
                mails_seen: leaked.len(),
                threshold: 1,
                login_verified,
            })
        }
        Scheme::Maildust => {
            server.recover(username)?;
            let threshold = user.threshold as usize;
            let config = MailboxConfig::new(vec![Box::new(attacker)])
                .expect("single attacker mailbox");
            match client::recover_password(&config, None) {
                Ok(recovered) => {
                    if server.login(username, &recovered.password).is_err() {
                        return Err(ThreatError::ReconstructionRejected);
                    }
                    Ok(AttackReport {
                        outcome: Outcome::FullCompromise,
                        mails_seen: recovered.tokens_used,
                        threshold,
                        login_verified: true,
                    })
                }
                Err(ClientError::InsufficientTokens { have, .. }) => Ok(AttackReport {
                    outcome: Outcome::NoInformation,
                    mails_seen: have,
                    threshold,
                    login_verified: false,
                }),
                Err(ClientError::NoTokensFound) => Ok(AttackReport {
                    outcome: Outcome::NoInformation,
                    mails_seen: 0,
                    threshold,
                    login_verified: false,
                }),
                Err(other) => Err(ThreatError::InvalidScenario(other.to_string())),
            }
        }
    }
}

/// Builds a throwaway server and simulated provider with one victim holding
/// `n` recovery addresses and threshold `k`, compromises `compromised` of
/// them at random and runs [`simulate_provider_attack`].
pub fn simulate_scenario(
    n: usize,
    k: usize,
    compromised: usize,
    scheme: Scheme,
    seed: u64,
) -> Result<AttackReport, ThreatError> {
    if n == 0 || n > MAX_SHARES || k == 0 || k > n {
        return Err(ThreatError::InvalidScenario(format!(
            "need 1 <= k <= n <= {MAX_SHARES}, got n={n} k={k}"
        )));
    }
    if compromised > n {
        return Err(ThreatError::InvalidScenario(format!(
            "cannot compromise {compromised} of {n} mailboxes"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let fabric = SimProvider::new();
    let server = MaildustServer::builder(Arc::new(MemoryStore::new()), Arc::new(fabric.clone()))
        .seed(seed)
        .clock(Arc::new(ManualClock::new(0)))
        .build();
    let addresses: Vec<String> = (1..=n).map(|i| format!("victim{i}@provider{i}.example")).collect();
    let initial = password::generate(&PasswordPolicy::default(), &mut rng);
    server.register("victim", &initial, &addresses, Some(k))?;
    let chosen: Vec<String> = addresses
        .choose_multiple(&mut rng, compromised)
        .cloned()
        .collect();
    simulate_provider_attack(&server, &fabric, "victim", &chosen, scheme)
}

/// Single-byte secrets that some polynomial of degree below `k` passes
/// through together with `shares`, found by enumerating every polynomial.
/// Only tractable for small k; returns `None` above k = 3.
pub fn consistent_secrets(shares: &[Share], k: usize) -> Option<Vec<u8>> {
    if k == 0 || k > 3 || shares.iter().any(|s| s.payload.len() != 1) {
        return None;
    }
    let higher_terms = k - 1;
    let total = 1usize << (8 * higher_terms);
    let mut candidates = Vec::new();
    for secret in 0..=255u8 {
        let consistent = (0..total).any(|packed| {
            let coeffs: Vec<Gf256> = (0..higher_terms)
                .map(|i| Gf256((packed >> (8 * i)) as u8))
                .collect();
            shares.iter().all(|s| {
                let x = Gf256(s.index);
                let mut y = Gf256(secret);
                let mut power = Gf256::ONE;
                for &c in &coeffs {
                    power *= x;
                    y += c * power;
                }
                y == Gf256(s.payload[0])
            })
        });
        if consistent {
            candidates.push(secret);
        }
    }
    Some(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn access_rows() {
        assert_eq!(
            access_matrix(AttackerKind::MailProvider),
            Access { user_emails: true, password_db: false, recovery_method: true }
        );
        assert_eq!(
            access_matrix(AttackerKind::Sniffing),
            Access { user_emails: false, password_db: false, recovery_method: true }
        );
        assert_eq!(
            access_matrix(AttackerKind::WebServerIntruder),
            Access { user_emails: false, password_db: true, recovery_method: true }
        );
        assert_eq!(
            access_matrix(AttackerKind::ClientIntruder),
            Access { user_emails: true, password_db: false, recovery_method: true }
        );
    }

    #[test]
    fn spot_cells() {
        use RecoveryMechanism::*;
        assert_eq!(
            detectability(AttackerKind::MailProvider, Mode::Passive, NewPw),
            Detectability::Undetectable
        );
        assert_eq!(
            detectability(AttackerKind::Sniffing, Mode::Active, OldPw),
            Detectability::DetectableUseless
        );
        assert_eq!(
            detectability(AttackerKind::ClientIntruder, Mode::Passive, TempPw),
            Detectability::DetectableOrUserBehavior
        );
    }

    #[test]
    fn vulnerable_flag() {
        let vulnerable: Vec<_> = RecoveryMechanism::ALL
            .into_iter()
            .filter(|m| m.is_vulnerable())
            .collect();
        assert_eq!(vulnerable.len(), 4);
        assert!(!RecoveryMechanism::HttpsLink.is_vulnerable());
    }

    #[test]
    fn rendered_table_mentions_every_row() {
        let text = render_table(Mode::Active);
        for kind in AttackerKind::ALL {
            assert!(text.contains(kind.label()));
        }
        assert!(text.contains("detectable - easier"));
    }

    #[test]
    fn scenario_threshold() {
        let below = simulate_scenario(5, 3, 2, Scheme::Maildust, 1).unwrap();
        assert_eq!(below.outcome, Outcome::NoInformation);
        assert_eq!(below.mails_seen, 2);
        let at = simulate_scenario(5, 3, 3, Scheme::Maildust, 1).unwrap();
        assert_eq!(at.outcome, Outcome::FullCompromise);
        let baseline = simulate_scenario(5, 3, 1, Scheme::Baseline, 1).unwrap();
        assert_eq!(baseline.outcome, Outcome::FullCompromise);
        let none = simulate_scenario(5, 3, 0, Scheme::Baseline, 1).unwrap();
        assert_eq!(none.outcome, Outcome::NoInformation);
        assert!(simulate_scenario(3, 4, 1, Scheme::Maildust, 1).is_err());
        assert!(simulate_scenario(3, 2, 4, Scheme::Maildust, 1).is_err());
    }

    #[test]
    fn one_share_of_two_fits_every_secret() {
        let share = Share { index: 3, payload: vec![0x91] };
        assert_eq!(consistent_secrets(std::slice::from_ref(&share), 2).unwrap().len(), 256);
        // with k shares the secret is pinned down
        let second = Share { index: 5, payload: vec![0x10] };
        assert_eq!(consistent_secrets(&[share, second], 2).unwrap().len(), 1);
        assert!(consistent_secrets(&[], 4).is_none());
    }
}
