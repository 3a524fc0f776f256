//! In-memory mail provider used by tests, the attack simulation and the
//! browser demo.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex, MutexGuard};

use super::{MailError, MailTransport, Mailbox, ReceivedMail};
use crate::envelope::{token_subject, MailMessage, RecoveryId};

#[derive(Debug, Default)]
struct SimState {
    boxes: HashMap<String, Vec<ReceivedMail>>,
    compromised: HashSet<String>,
    unreachable: HashSet<String>,
    rejecting: HashSet<String>,
    sequence: u64,
    delivered: u64,
}

/// Shared handle to a simulated provider. Clones refer to the same mail store.
#[derive(Debug, Clone, Default)]
pub struct SimProvider {
    state: Arc<Mutex<SimState>>,
}

fn key(address: &str) -> String {
    address.to_ascii_lowercase()
}

impl SimProvider {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, SimState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Read handle for one address.
    pub fn mailbox(&self, address: &str) -> SimMailbox {
        SimMailbox {
            provider: self.clone(),
            address: address.to_string(),
        }
    }

    /// Read handle that sees every compromised mailbox.
    pub fn attacker(&self) -> AttackerView {
        AttackerView {
            provider: self.clone(),
        }
    }

    pub fn compromise(&self, address: &str) {
        self.lock().compromised.insert(key(address));
    }

    pub fn set_compromised<'a>(&self, addresses: impl IntoIterator<Item = &'a str>) {
        let mut state = self.lock();
        state.compromised = addresses.into_iter().map(key).collect();
    }

    pub fn compromised(&self) -> HashSet<String> {
        self.lock().compromised.clone()
    }

    /// Makes reads of `address` fail with `MailboxUnreachable`.
    pub fn set_unreachable(&self, address: &str, unreachable: bool) {
        let mut state = self.lock();
        if unreachable {
            state.unreachable.insert(key(address));
        } else {
            state.unreachable.remove(&key(address));
        }
    }

    /// Makes deliveries to `address` fail with `DeliveryFailed`.
    pub fn set_rejecting(&self, address: &str, rejecting: bool) {
        let mut state = self.lock();
        if rejecting {
            state.rejecting.insert(key(address));
        } else {
            state.rejecting.remove(&key(address));
        }
    }

    /// Total number of successful deliveries since creation.
    pub fn delivered(&self) -> u64 {
        self.lock().delivered
    }

    pub fn messages(&self, address: &str) -> Vec<ReceivedMail> {
        self.lock().boxes.get(&key(address)).cloned().unwrap_or_default()
    }

    pub fn clear(&self) {
        self.lock().boxes.clear();
    }
}

impl MailTransport for SimProvider {
    fn send(&self, message: &MailMessage) -> Result<(), MailError> {
        let mut state = self.lock();
        let to = key(&message.to);
        if state.rejecting.contains(&to) {
            return Err(MailError::DeliveryFailed {
                to: message.to.clone(),
                reason: "recipient rejected".into(),
            });
        }
        state.sequence += 1;
        state.delivered += 1;
        let received = state.sequence;
        state.boxes.entry(to).or_default().push(ReceivedMail {
            subject: message.subject.clone(),
            body: message.body.clone(),
            received,
        });
        Ok(())
    }

    fn retract(&self, recovery_id: &RecoveryId) {
        let subject = token_subject(recovery_id);
        let mut state = self.lock();
        for mails in state.boxes.values_mut() {
            mails.retain(|m| m.subject != subject);
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimMailbox {
    provider: SimProvider,
    address: String,
}

impl Mailbox for SimMailbox {
    fn address(&self) -> &str {
        &self.address
    }

    fn fetch_messages(&self) -> Result<Vec<ReceivedMail>, MailError> {
        let state = self.provider.lock();
        let k = key(&self.address);
        if state.unreachable.contains(&k) {
            return Err(MailError::MailboxUnreachable {
                address: self.address.clone(),
                reason: "simulated outage".into(),
            });
        }
        Ok(state.boxes.get(&k).cloned().unwrap_or_default())
    }
}

/// The provider-level attacker: reads every compromised mailbox.
#[derive(Debug, Clone)]
pub struct AttackerView {
    provider: SimProvider,
}

impl Mailbox for AttackerView {
    fn address(&self) -> &str {
        "attacker"
    }

    fn fetch_messages(&self) -> Result<Vec<ReceivedMail>, MailError> {
        let state = self.provider.lock();
        Ok(state
            .compromised
            .iter()
            .filter_map(|addr| state.boxes.get(addr))
            .flatten()
            .cloned()
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::fetch_tokens;

    fn msg(to: &str, subject: &str) -> MailMessage {
        MailMessage {
            to: to.into(),
            subject: subject.into(),
            body: "body\n".into(),
        }
    }

    #[test]
    fn delivery_is_isolated_per_address() {
        let sim = SimProvider::new();
        sim.send(&msg("a@x.org", "hi")).unwrap();
        assert_eq!(sim.mailbox("a@x.org").fetch_messages().unwrap().len(), 1);
        assert!(sim.mailbox("b@x.org").fetch_messages().unwrap().is_empty());
        // addresses are case-insensitive
        assert_eq!(sim.mailbox("A@X.org").fetch_messages().unwrap().len(), 1);
    }

    #[test]
    fn outages_and_rejections() {
        let sim = SimProvider::new();
        sim.set_rejecting("a@x.org", true);
        assert!(matches!(
            sim.send(&msg("a@x.org", "hi")),
            Err(MailError::DeliveryFailed { .. })
        ));
        sim.set_rejecting("a@x.org", false);
        sim.send(&msg("a@x.org", "hi")).unwrap();
        sim.set_unreachable("a@x.org", true);
        assert!(matches!(
            fetch_tokens(&sim.mailbox("a@x.org"), None),
            Err(MailError::MailboxUnreachable { .. })
        ));
        assert_eq!(sim.delivered(), 1);
    }

    #[test]
    fn retract_removes_only_that_recovery() {
        let sim = SimProvider::new();
        let a = RecoveryId::from_random_bytes([1; 16]);
        let b = RecoveryId::from_random_bytes([2; 16]);
        sim.send(&msg("a@x.org", &token_subject(&a))).unwrap();
        sim.send(&msg("a@x.org", &token_subject(&b))).unwrap();
        sim.retract(&a);
        let left = sim.messages("a@x.org");
        assert_eq!(left.len(), 1);
        assert_eq!(left[0].subject, token_subject(&b));
    }

    #[test]
    fn attacker_sees_only_compromised() {
        let sim = SimProvider::new();
        sim.send(&msg("a@x.org", "one")).unwrap();
        sim.send(&msg("b@x.org", "two")).unwrap();
        sim.compromise("B@x.org");
        let seen = sim.attacker().fetch_messages().unwrap();
        assert_eq!(seen.len(), 1);
        assert_eq!(seen[0].subject, "two");
    }
}
