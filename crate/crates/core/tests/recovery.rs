use std::sync::Arc;
use std::thread;

use maildust_core::client::{recover_password, ClientError, MailboxConfig};
use maildust_core::fabric::{fetch_tokens, Mailbox, MaildirMailbox, MaildirTransport, SimProvider};
use maildust_core::password::PasswordPolicy;
use maildust_core::server::{
    LogStore, MaildustServer, ManualClock, MemoryStore, RecoveryStatus, ServerError, ServerSettings,
};
use maildust_core::threat::{self, Outcome, Scheme};

const INITIAL: &str = "Initial-Passw0rd-123";

fn addresses(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("r{i}@provider{i}.example")).collect()
}

fn config(sim: &SimProvider, addrs: &[String]) -> MailboxConfig {
    MailboxConfig::new(
        addrs
            .iter()
            .map(|a| Box::new(sim.mailbox(a)) as Box<dyn Mailbox>)
            .collect(),
    )
    .unwrap()
}

fn server(sim: &SimProvider) -> MaildustServer {
    MaildustServer::builder(Arc::new(MemoryStore::new()), Arc::new(sim.clone()))
        .seed(9)
        .clock(Arc::new(ManualClock::new(1_000)))
        .build()
}

#[test]
fn second_recovery_supersedes_first() {
    let sim = SimProvider::new();
    let server = server(&sim);
    let addrs = addresses(3);
    server.register("dana", INITIAL, &addrs, Some(2)).unwrap();

    server.recover("dana").unwrap();
    let first = recover_password(&config(&sim, &addrs), None).unwrap();
    server.recover("dana").unwrap();
    let second = recover_password(&config(&sim, &addrs), None).unwrap();

    assert_ne!(first.recovery_id, second.recovery_id);
    assert!(server.login("dana", &second.password).is_ok());
    assert!(server.login("dana", &first.password).is_err());

    let events = server.recovery_events("dana");
    assert_eq!(events.len(), 2);
    assert_eq!(events.iter().filter(|e| e.status == RecoveryStatus::Active).count(), 1);
    assert_eq!(server.active_recovery("dana").unwrap().recovery_id, second.recovery_id);

    // asking explicitly for the stale recovery still rebuilds its (dead) password
    let stale = recover_password(&config(&sim, &addrs), Some(&first.recovery_id)).unwrap();
    assert_eq!(stale.password, first.password);
}

#[test]
fn below_threshold_reports_insufficient() {
    let sim = SimProvider::new();
    let server = server(&sim);
    let addrs = addresses(4);
    server.register("erin", INITIAL, &addrs, Some(3)).unwrap();
    server.recover("erin").unwrap();
    sim.set_unreachable(&addrs[0], true);
    sim.set_unreachable(&addrs[3], true);
    let err = recover_password(&config(&sim, &addrs), None).unwrap_err();
    assert!(matches!(err, ClientError::InsufficientTokens { have: 2, need: 3, .. }), "{err:?}");
    assert_eq!(err.exit_code(), 2);

    for a in &addrs {
        sim.set_unreachable(a, true);
    }
    let err = recover_password(&config(&sim, &addrs), None).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn rejected_mail_rolls_back() {
    let sim = SimProvider::new();
    let server = server(&sim);
    let addrs = addresses(3);
    server.register("fay", INITIAL, &addrs, Some(2)).unwrap();
    sim.set_rejecting(&addrs[2], true);
    let err = server.recover("fay").unwrap_err();
    assert!(matches!(err, ServerError::MailDispatchFailed(_)));
    assert_eq!(err.code(), "mail_dispatch_failed");
    for a in &addrs {
        assert!(sim.messages(a).is_empty(), "{a} still holds a token");
    }
    assert!(server.login("fay", INITIAL).is_ok());
    assert!(server.recovery_events("fay").is_empty());
}

#[test]
fn concurrent_recoveries_leave_one_active() {
    let sim = SimProvider::new();
    let server = Arc::new(server(&sim));
    let addrs = addresses(3);
    server.register("gus", INITIAL, &addrs, Some(2)).unwrap();

    let handles: Vec<_> = (0..100)
        .map(|_| {
            let server = Arc::clone(&server);
            thread::spawn(move || server.recover("gus").unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let events = server.recovery_events("gus");
    assert_eq!(events.len(), 100);
    assert_eq!(events.iter().filter(|e| e.status == RecoveryStatus::Active).count(), 1);

    let active = server.active_recovery("gus").unwrap();
    let recovered = recover_password(&config(&sim, &addrs), Some(&active.recovery_id)).unwrap();
    assert!(server.login("gus", &recovered.password).is_ok());
}

#[test]
fn unknown_user_recovery_is_silent() {
    let sim = SimProvider::new();
    let server = server(&sim);
    server.recover("nobody").unwrap();
    assert_eq!(sim.delivered(), 0);
    let unknown = server.login("nobody", INITIAL).unwrap_err();
    server.register("hal", INITIAL, &addresses(2), None).unwrap();
    let wrong = server.login("hal", "Not-The-Passw0rd!").unwrap_err();
    assert_eq!(unknown.code(), wrong.code());
}

#[test]
fn log_never_holds_plaintext_passwords() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("users.log");
    let sim = SimProvider::new();
    let addrs = addresses(3);
    let mut issued = vec![INITIAL.to_string()];
    {
        let server = MaildustServer::builder(Arc::new(LogStore::open(&path).unwrap()), Arc::new(sim.clone()))
            .seed(5)
            .build();
        server.register("ivy", INITIAL, &addrs, Some(2)).unwrap();
        for _ in 0..5 {
            server.recover("ivy").unwrap();
            issued.push(recover_password(&config(&sim, &addrs), None).unwrap().password);
        }
    }
    let bytes = std::fs::read(&path).unwrap();
    for pw in &issued {
        assert!(
            !bytes.windows(pw.len()).any(|w| w == pw.as_bytes()),
            "plaintext password found in the log"
        );
    }

    // survives a restart
    let server = MaildustServer::builder(Arc::new(LogStore::open(&path).unwrap()), Arc::new(sim.clone()))
        .seed(6)
        .build();
    assert!(server.login("ivy", issued.last().unwrap()).is_ok());
    assert_eq!(server.recovery_events("ivy").len(), 5);
}

#[test]
fn maildir_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let transport = Arc::new(MaildirTransport::new(dir.path()));
    let server = MaildustServer::builder(Arc::new(MemoryStore::new()), transport.clone())
        .seed(11)
        .build();
    let addrs = addresses(3);
    server.register("jo", INITIAL, &addrs, Some(2)).unwrap();
    server.recover("jo").unwrap();

    let boxes: Vec<Box<dyn Mailbox>> = addrs
        .iter()
        .map(|a| Box::new(MaildirMailbox::new(a.clone(), transport.maildir_for(a))) as Box<dyn Mailbox>)
        .collect();
    let report = fetch_tokens(&boxes[0], None).unwrap();
    assert_eq!(report.tokens.len(), 1);
    let recovered = recover_password(&MailboxConfig::new(boxes).unwrap(), None).unwrap();
    assert!(server.login("jo", &recovered.password).is_ok());
}

#[test]
fn attacker_below_threshold_learns_nothing_about_one_byte_password() {
    let sim = SimProvider::new();
    let settings = ServerSettings {
        password_policy: PasswordPolicy::printable_ascii(1).unwrap(),
        ..ServerSettings::default()
    };
    let server = MaildustServer::builder(Arc::new(MemoryStore::new()), Arc::new(sim.clone()))
        .settings(settings)
        .seed(21)
        .build();
    let addrs = addresses(3);
    server.register("kim", INITIAL, &addrs, Some(2)).unwrap();

    let report =
        threat::simulate_provider_attack(&server, &sim, "kim", &addrs[1..2], Scheme::Maildust).unwrap();
    assert_eq!(report.outcome, Outcome::NoInformation);
    assert_eq!(report.mails_seen, 1);

    let seen = fetch_tokens(&sim.attacker(), None).unwrap();
    let share = seen.tokens[0].envelope.share();
    assert_eq!(threat::consistent_secrets(&[share], 2).unwrap().len(), 256);
}

#[test]
fn attack_rejects_foreign_addresses() {
    let sim = SimProvider::new();
    let server = server(&sim);
    server.register("lee", INITIAL, &addresses(2), None).unwrap();
    let outsider = vec!["someone@else.example".to_string()];
    assert!(matches!(
        threat::simulate_provider_attack(&server, &sim, "lee", &outsider, Scheme::Maildust),
        Err(threat::ThreatError::InvalidScenario(_))
    ));
    assert!(matches!(
        threat::simulate_provider_attack(&server, &sim, "ghost", &[], Scheme::Baseline),
        Err(threat::ThreatError::InvalidScenario(_))
    ));
}

#[test]
fn growing_the_compromised_set_never_helps_the_victim() {
    for n in 1..=5 {
        for k in 1..=n {
            let mut compromised_before = false;
            for m in 0..=n {
                let report = threat::simulate_scenario(n, k, m, Scheme::Maildust, (n * 10 + k) as u64).unwrap();
                let compromised = report.outcome == Outcome::FullCompromise;
                assert!(compromised || !compromised_before, "n={n} k={k} m={m}");
                assert_eq!(compromised, m >= k);
                compromised_before = compromised;
            }
        }
    }
}
